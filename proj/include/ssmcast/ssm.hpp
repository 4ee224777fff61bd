#pragma once

#include <cstddef>
#include <string>

#include "ssmcast/params.hpp"
#include "ssmcast/rng.hpp"
#include "ssmcast/tensor.hpp"

namespace ssmcast {

// Diagonal state-space system: C channels, each with N independent states.
//   h'(t) = a h(t) + b x(t),   y(t) = c h(t)
// delta holds the step size per channel ([C]) or per timestep and channel
// ([T,C]) for input-dependent discretization. All deltas must be positive.
struct SsmParams {
  Tensor a;      // [C,N]
  Tensor b;      // [C,N]
  Tensor c;      // [C,N]
  Tensor delta;  // [C] or [T,C]
};

// Zero-order-hold discretization of the above:
//   a_bar = exp(delta a),  b_bar = (delta a)^-1 (exp(delta a) - 1) delta b
// Shapes are [C,N] for a static delta and [T,C,N] for a per-timestep one.
struct DiscreteSsmParams {
  Tensor a_bar;
  Tensor b_bar;
};

DiscreteSsmParams zoh_discretize(const SsmParams& p);

// Advance h_t = a_bar h_{t-1} + b_bar x[t,c] and emit y[t,c] = c . h_t.
// x is [T,C]; c_out is [C,N]; optional h0 is [C,N] (zero when null).
// The two variants are numerically interchangeable: _sequential runs the
// plain recurrence and is the reference, _parallel reassociates it as a
// blocked prefix scan.
Tensor ssm_scan_sequential(const Tensor& x, const DiscreteSsmParams& d,
                           const Tensor& c_out, const Tensor* h0 = nullptr);
Tensor ssm_scan_parallel(const Tensor& x, const DiscreteSsmParams& d,
                         const Tensor& c_out, const Tensor* h0 = nullptr);

// One pre-norm residual block: the input is layer-normalized, expanded into
// a state-space branch (linear -> depthwise causal conv -> SiLU -> selective
// scan) and a gate branch (linear -> SiLU), recombined multiplicatively,
// projected back to width D, and added to the input.
struct SsmBlockConfig {
  std::size_t d_model = 64;
  std::size_t n_state = 16;
  std::size_t expand = 2;
  std::size_t conv_width = 4;
  double dt_min = 1e-3;  // initial step-size range
  double dt_max = 1e-1;
};

struct MambaBlockWeights {
  std::size_t d_model, d_inner, n_state, conv_width;
  Tensor ln_g, ln_b;
  Tensor w_in, b_in;  // [D, 2*d_inner]
  Tensor conv_k;      // [W, d_inner]
  Tensor w_bsel;      // [d_inner, N]
  Tensor w_csel;      // [d_inner, N]
  Tensor w_dt, b_dt;  // [d_inner, d_inner], [d_inner]
  Tensor a_log;       // [d_inner, N]; a = -exp(a_log)
  Tensor w_out, b_out;  // [d_inner, D]

  MambaBlockWeights(const SsmBlockConfig& cfg, Rng& rng, ParamRegistry& reg,
                    const std::string& prefix);
};

// x [T,D] -> [T,D]
Tensor mamba_block_forward(const Tensor& x, const MambaBlockWeights& w);

}  // namespace ssmcast
