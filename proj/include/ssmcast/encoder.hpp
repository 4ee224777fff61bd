#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ssmcast/params.hpp"
#include "ssmcast/rng.hpp"
#include "ssmcast/ssm.hpp"
#include "ssmcast/tensor.hpp"

namespace ssmcast {

// The observation memory is one causal sequence: L long-horizon rows followed
// by S recent rows, encoded jointly so the recent rows can attend (through
// the state) to everything before them. Missing leading observations are
// zero rows in the input; S must be at least 1, L may be 0.
struct EncoderConfig {
  std::size_t input_dim = 32;  // feature width of the raw memory rows
  std::size_t d_model = 64;
  std::size_t layers = 4;
  std::size_t long_tokens = 48;
  std::size_t short_tokens = 24;
  SsmBlockConfig block;  // d_model is forced to match
};

struct EncoderWeights {
  EncoderConfig cfg;
  Tensor w_proj, b_proj;  // [input_dim, d_model]
  std::vector<MambaBlockWeights> blocks;
  Tensor ln_f_g, ln_f_b;

  EncoderWeights(const EncoderConfig& cfg, Rng& rng, ParamRegistry& reg,
                 const std::string& prefix);
};

struct EncodedMemory {
  Tensor long_mem;   // [L, d_model]; undefined when L == 0
  Tensor short_mem;  // [S, d_model]
};

// m: [L+S, input_dim] -> [L+S, d_model] (single linear, no nonlinearity)
Tensor project_input(const Tensor& m, const EncoderWeights& w);

// m: [L+S, input_dim]; runs the projected sequence through the block stack
// and splits the result into the long and short parts.
EncodedMemory encode(const Tensor& m, const EncoderWeights& w);

}  // namespace ssmcast
