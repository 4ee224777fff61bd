#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ssmcast/actions.hpp"
#include "ssmcast/rng.hpp"
#include "ssmcast/tensor.hpp"

namespace ssmcast {

// Empirical verb-noun co-occurrence statistics, used at inference time to
// pull the decoder's independent verb/noun distributions toward pairs that
// actually happen. A book gets read, not eaten: pairs with zero counts get
// zero adjusted mass (unless smoothing is turned on).
struct CooccurrenceMatrix {
  std::size_t vocab_verbs = 0;
  std::size_t vocab_nouns = 0;
  std::vector<std::int64_t> counts;  // [V * N] row-major
  std::vector<double> o;             // normalized so the whole matrix sums to 1
  double smoothing = 0.0;            // additive count smoothing used for o
  std::string source_split = "train";

  std::int64_t count_at(std::size_t v, std::size_t n) const {
    return counts[v * vocab_nouns + n];
  }
  double o_at(std::size_t v, std::size_t n) const {
    return o[v * vocab_nouns + n];
  }
};

// Tallies (verb, noun) pairs. Throws on an empty stream (nothing to
// normalize) and on out-of-range ids, naming the offending record index.
// smoothing > 0 adds that much virtual count to every cell before
// normalizing; counts themselves stay exact.
CooccurrenceMatrix build_cooccurrence(const std::vector<SlotPair>& pairs,
                                      std::size_t vocab_verbs,
                                      std::size_t vocab_nouns,
                                      const std::string& source_split = "train",
                                      double smoothing = 0.0);

// Every pair observed at least once, sorted by (verb, noun). The index in
// `actions` is the action id.
struct ActionTaxonomy {
  std::size_t vocab_verbs = 0;
  std::size_t vocab_nouns = 0;
  std::vector<SlotPair> actions;
  std::vector<std::int64_t> pair_to_id;  // [V * N], -1 when the pair is absent

  std::size_t size() const { return actions.size(); }
  std::int64_t action_id(std::size_t v, std::size_t n) const {
    return pair_to_id[v * vocab_nouns + n];
  }
};

ActionTaxonomy build_taxonomy(const CooccurrenceMatrix& cooc);

// verbs [Z,V], nouns [Z,N], rows must each sum to 1 within 1e-6 and be
// nonnegative -> joint [Z,V,N] with joint[z,v,n] = verbs[z,v] * nouns[z,n].
Tensor joint_probabilities(const Tensor& verbs, const Tensor& nouns);

struct AdjustedJoint {
  Tensor adjusted;  // [Z,V,N], each slot renormalized to sum 1
  // slots whose joint had no mass on any observed pair; they keep their
  // unadjusted distribution and the caller should surface a warning
  std::vector<std::size_t> fallback_slots;
};

// Multiplies each slot of the joint elementwise by O and renormalizes.
// Pure data transform for inference; never records gradients.
AdjustedJoint apply_interaction(const Tensor& joint,
                                const CooccurrenceMatrix& cooc);

// Draws K sequences; slot z of each candidate is one (verb, noun) pair drawn
// jointly from adjusted[z] (verb from the slot marginal, then noun from the
// conditional row, both by CDF inversion). Draw order is candidate-major,
// two uniforms per slot, so results are reproducible from the rng seed.
std::vector<ActionSequence> sample_sequences(const Tensor& adjusted,
                                             std::size_t k, Rng& rng);

// Deterministic mode: per slot the maximum-probability pair, ties broken
// toward the lexicographically smallest (verb, noun).
ActionSequence argmax_sequence(const Tensor& adjusted);

// CSV persistence. Counts are stored exactly as integer triplets (only the
// nonzero cells); o is recomputed on load.
void save_cooccurrence(const std::string& path, const CooccurrenceMatrix& cooc);
CooccurrenceMatrix load_cooccurrence(const std::string& path);

void save_taxonomy(const std::string& path, const ActionTaxonomy& tax);
ActionTaxonomy load_taxonomy(const std::string& path);

}  // namespace ssmcast
