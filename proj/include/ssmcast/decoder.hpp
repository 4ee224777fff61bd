#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ssmcast/params.hpp"
#include "ssmcast/rng.hpp"
#include "ssmcast/tensor.hpp"

namespace ssmcast {

// Z slot queries cross-attend to the encoded recent memory and are decoded
// in parallel; slot i forecasts the i-th upcoming action. Queries start as
// zero content vectors plus a learnable per-slot positional embedding that
// is added to attention q/k inputs (not to values), DETR style.
struct DecoderConfig {
  std::size_t d_model = 64;
  std::size_t heads = 8;
  std::size_t layers = 4;
  std::size_t queries = 8;   // Z, number of forecast slots
  std::size_t ffn_mult = 4;
  bool self_attention = true;      // slot-to-slot attention before cross
  bool learnable_queries = false;  // train the content vectors too
  bool key_positional = false;     // add sinusoidal positions to memory keys
};

struct AttentionWeights {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
  AttentionWeights() = default;
  AttentionWeights(std::size_t d_model, Rng& rng, ParamRegistry& reg,
                   const std::string& prefix);
};

// q: [Zq, D] rows attending over k/v: [Sk, D] rows. Heads are column slices
// of the projected q/k/v; scores are scaled by 1/sqrt(D/heads).
Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const AttentionWeights& w, std::size_t heads);

struct DecoderLayerWeights {
  Tensor ln1_g, ln1_b;
  AttentionWeights self_attn;
  Tensor ln2_g, ln2_b;
  AttentionWeights cross_attn;
  Tensor ln3_g, ln3_b;
  Tensor ffn_w1, ffn_b1, ffn_w2, ffn_b2;
};

struct DecoderWeights {
  DecoderConfig cfg;
  Tensor q_content;  // [Z, D]; zeros unless learnable_queries
  Tensor q_pos;      // [Z, D] learnable slot embedding
  std::vector<DecoderLayerWeights> layers;
  Tensor ln_f_g, ln_f_b;

  DecoderWeights(const DecoderConfig& cfg, Rng& rng, ParamRegistry& reg,
                 const std::string& prefix);
};

// e_short: [S, d_model] -> slot features F: [Z, d_model]
Tensor decode(const Tensor& e_short, const DecoderWeights& w);

// Per-slot classifiers on top of the slot features. The action head over
// the joint verb-noun label space is optional.
struct HeadsConfig {
  std::size_t d_model = 64;
  std::size_t vocab_verbs = 12;
  std::size_t vocab_nouns = 24;
  bool action_head = false;
  std::size_t vocab_actions = 0;  // required when action_head
};

struct HeadWeights {
  HeadsConfig cfg;
  Tensor w_verb, b_verb;
  Tensor w_noun, b_noun;
  Tensor w_action, b_action;  // only when cfg.action_head

  HeadWeights(const HeadsConfig& cfg, Rng& rng, ParamRegistry& reg,
              const std::string& prefix);
};

struct SlotLogits {
  Tensor verbs;    // [Z, vocab_verbs]
  Tensor nouns;    // [Z, vocab_nouns]
  Tensor actions;  // [Z, vocab_actions] or default-constructed
};

struct SlotDistributions {
  Tensor verbs;    // rows are softmax distributions
  Tensor nouns;
  Tensor actions;  // or default-constructed
};

SlotLogits classify_logits(const Tensor& f, const HeadWeights& w);
SlotDistributions classify_heads(const Tensor& f, const HeadWeights& w);

}  // namespace ssmcast
