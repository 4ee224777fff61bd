#pragma once

#include <cstdint>
#include <vector>

#include "ssmcast/params.hpp"

namespace ssmcast {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;  // decoupled, skips biases and norm gains
};

// AdamW over a parameter registry. Moments are kept in double even in
// single-precision builds so the update math stays stable.
class AdamW {
 public:
  AdamW(ParamRegistry& params, AdamWConfig cfg);

  // One update from the grads currently held by the parameters. lr_scale
  // multiplies the configured rate (schedulers pass the decayed factor).
  void step(double lr_scale = 1.0);

  std::size_t steps_taken() const { return t_; }

 private:
  ParamRegistry* params_;
  AdamWConfig cfg_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
  std::vector<bool> decay_;  // weight decay applies to this param
};

// Cosine decay from base_lr at step 0 to base_lr * final_frac at the last
// step. total must be >= 1; a single step gets base_lr.
double cosine_lr(std::size_t step, std::size_t total, double base_lr,
                 double final_frac);

// Global gradient norm across the registry; rescales grads in place when the
// norm exceeds max_norm (> 0). Returns the pre-clip norm.
double clip_global_norm(ParamRegistry& params, double max_norm);

}  // namespace ssmcast
