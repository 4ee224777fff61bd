#pragma once

#include <cstdint>
#include <string>

namespace ssmcast {

// Every knob in one flat struct. Precedence when assembling: built-in
// defaults, then a config file, then command-line overrides.
struct Config {
  // model
  std::size_t input_dim = 32;
  std::size_t d_model = 64;
  std::size_t enc_layers = 4;
  std::size_t dec_layers = 4;
  std::size_t heads = 8;
  std::size_t n_state = 16;
  std::size_t expand = 2;
  std::size_t conv_width = 4;
  std::size_t long_tokens = 48;
  std::size_t short_tokens = 24;
  std::size_t queries = 8;  // forecast slots Z
  std::size_t ffn_mult = 4;
  bool decoder_self_attention = true;
  bool learnable_queries = false;
  bool key_positional = false;

  // vocabulary
  std::size_t vocab_verbs = 12;
  std::size_t vocab_nouns = 24;

  // loss terms
  bool loss_verb = true;
  bool loss_noun = true;
  bool loss_action = false;
  bool loss_aux = false;  // per-window classification on the recent memory

  // optimization
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double clip_norm = 1.0;
  double lr_final_frac = 0.1;  // cosine decays to this fraction
  std::size_t epochs = 10;
  std::size_t max_steps = 0;  // hard cap, 0 = run all epochs
  double stop_loss = 0.0;     // early stop threshold, 0 = off
  std::uint64_t seed = 1;

  // inference
  std::string decode_mode = "argmax";  // or "sample"
  std::size_t k_candidates = 5;
  bool use_interaction = false;

  // data
  double window_seconds = 0.533;

  void validate() const;  // throws std::invalid_argument on nonsense
};

// key=value, one per line; '#' starts a comment. Unknown keys throw.
void apply_config_kv(Config& cfg, const std::string& key,
                     const std::string& value);
void apply_config_text(Config& cfg, const std::string& text,
                       const std::string& origin);
void apply_config_file(Config& cfg, const std::string& path);

// Canonical serialization: every key, sorted, one per line. Parsing it back
// reproduces the struct exactly.
std::string config_to_text(const Config& cfg);
Config config_from_text(const std::string& text);

}  // namespace ssmcast
