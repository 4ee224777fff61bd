#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ssmcast/actions.hpp"
#include "ssmcast/rng.hpp"
#include "ssmcast/tensor.hpp"

namespace ssmcast {

struct ClipEvent {
  double start_s = 0;
  double end_s = 0;
  std::uint32_t verb = 0;
  std::uint32_t noun = 0;
};

struct ClipAnnotation {
  std::string clip_id;
  std::size_t vocab_verbs = 0;
  std::size_t vocab_nouns = 0;
  std::vector<ClipEvent> events;  // ordered, non-overlapping
};

struct FeatureSequence {
  std::string clip_id;
  std::size_t rows = 0;
  std::size_t dim = 0;
  double window_seconds = 0.533;
  std::vector<Real> data;  // rows x dim, one embedding per window
};

// A deterministic stand-in for real video features: a Markov chain over the
// permitted (verb, noun) pairs, per-action durations, and noisy prototype
// embeddings. Everything regenerates from the stored seeds.
struct SyntheticWorldSpec {
  std::uint64_t seed = 0;
  std::size_t vocab_verbs = 0;
  std::size_t vocab_nouns = 0;
  std::size_t feature_dim = 32;
  double sparsity = 0.2;
  double emission_noise = 0.1;
  bool two_stream = false;  // split the embedding into verb/noun halves
  std::uint64_t prototype_seed = 0;

  std::vector<std::uint8_t> mask;     // [V*N] affordance booleans
  std::vector<SlotPair> actions;      // permitted pairs, (verb, noun) sorted
  std::vector<double> transitions;    // [A*A] rows sum to 1, zero diagonal
  std::vector<double> duration_mean;  // [A] seconds

  bool permitted(std::size_t v, std::size_t n) const {
    return mask[v * vocab_nouns + n] != 0;
  }
  // the class embedding an action emits before noise; recomputed on demand
  std::vector<Real> prototype(std::size_t action_index) const;
};

// Affordance mask keeps ~sparsity of all pairs; noun columns that come out
// empty are redrawn so every noun has at least one permitted verb. Markov
// rows put mass 0.55/0.30/0.15 on three preferred successors (fewer when the
// world is tiny), never on self.
SyntheticWorldSpec generate_world(std::uint64_t seed, std::size_t vocab_verbs,
                                  std::size_t vocab_nouns, double sparsity,
                                  std::size_t feature_dim = 32,
                                  double emission_noise = 0.1,
                                  bool two_stream = false);

// Consistency checks for a world (hand-built or loaded): mask/transition
// agreement, row sums, zero diagonal, every noun reachable.
void validate_world(const SyntheticWorldSpec& world);

struct GeneratedClip {
  ClipAnnotation annotation;
  FeatureSequence features;
};

// Samples an action chain until it covers duration_s, clips the final event,
// then emits one noisy embedding per window (midpoint rule). Throws when the
// chain ends up shorter than min_events.
GeneratedClip generate_clip(const SyntheticWorldSpec& world,
                            std::uint64_t clip_seed,
                            const std::string& clip_id, double duration_s,
                            std::size_t min_events = 2);

// One training example: the observation memory and the next Z actions.
struct MemoryExample {
  Tensor memory;                     // [L+S, feature_dim], zero rows = padding
  std::vector<std::uint8_t> observed;  // [L+S] row validity
  std::vector<std::int64_t> aux_verbs;  // [S] per recent row, -1 = no label
  std::vector<std::int64_t> aux_nouns;  // [S]
  ActionSequence targets;            // Z upcoming (verb, noun) pairs
};

// Windows fully before cut_time become the memory: the most recent S of them
// fill the short block (right-aligned), the up-to-L before those fill the
// long block. The first Z events starting at or after cut_time become the
// targets. Throws when there is no observed window or fewer than Z future
// events.
MemoryExample make_example(const ClipAnnotation& ann,
                           const FeatureSequence& feat, double cut_time,
                           std::size_t long_tokens, std::size_t short_tokens,
                           std::size_t targets_z);

// The evaluation cut for a clip: right at the start of the Z-th event from
// the end, so the targets are exactly the clip's last Z events.
double eval_cut_time(const ClipAnnotation& ann, std::size_t targets_z);

// --- persistence ---

void save_world(const std::string& path, const SyntheticWorldSpec& world);
SyntheticWorldSpec load_world(const std::string& path);

// annotations.jsonl, one clip per line
void save_annotations(const std::string& path,
                      const std::vector<ClipAnnotation>& clips);
std::vector<ClipAnnotation> load_annotations(const std::string& path);

// features/<clip_id>.bin (little-endian float32) + <clip_id>.json sidecar
void save_features(const std::string& dir, const FeatureSequence& feat);
FeatureSequence load_features(const std::string& dir,
                              const std::string& clip_id);

// Reads the public egocentric forecasting annotation layout: a top-level
// "clips" array whose entries carry clip_uid, action_idx, verb_label,
// noun_label and segment times; entries are grouped per clip and ordered by
// action_idx.
std::vector<ClipAnnotation> load_ego4d_annotations(const std::string& path,
                                                   std::size_t vocab_verbs,
                                                   std::size_t vocab_nouns);

}  // namespace ssmcast
