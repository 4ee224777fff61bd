#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "ssmcast/rng.hpp"
#include "ssmcast/tensor.hpp"

// Central finite-difference oracle for gradients. Works purely through the
// public forward API: the callable must recompute the scalar output from the
// current contents of the given input tensors, so the check is independent
// of whatever the backward pass does internally.

namespace fdtest {

struct FdResult {
  double max_err = 0.0;
  std::size_t checked = 0;
};

// err is |analytic - fd| / (max(|analytic|, |fd|) + 1e-6); pass iff <= rtol.
inline FdResult fd_check(const std::function<ssmcast::Tensor()>& forward,
                         const std::vector<ssmcast::Tensor>& inputs,
                         double h = 1e-5, std::size_t max_coords_per_input = 0,
                         ssmcast::Rng* rng = nullptr) {
  using ssmcast::Real;
  for (auto& in : inputs) {
    const_cast<ssmcast::Tensor&>(in).set_requires_grad(true);
    const_cast<ssmcast::Tensor&>(in).zero_grad();
  }

  std::vector<std::vector<Real>> analytic;
  {
    ssmcast::Tape tape;
    ssmcast::TapeScope scope(tape);
    ssmcast::Tensor out = forward();
    tape.backward(out);
  }
  for (auto& in : inputs) {
    if (in.has_grad())
      analytic.push_back(in.grad_vec());
    else
      analytic.emplace_back(in.size(), Real(0));
  }

  FdResult res;
  ssmcast::NoGradScope no_grad;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto& impl = *inputs[i].impl();
    std::vector<std::size_t> coords;
    if (max_coords_per_input == 0 || impl.size() <= max_coords_per_input) {
      coords.resize(impl.size());
      for (std::size_t j = 0; j < impl.size(); ++j) coords[j] = j;
    } else {
      for (std::size_t j = 0; j < max_coords_per_input; ++j)
        coords.push_back(rng ? rng->uniform_int(impl.size())
                             : j * impl.size() / max_coords_per_input);
    }
    for (std::size_t j : coords) {
      const Real saved = impl.data[j];
      impl.data[j] = saved + static_cast<Real>(h);
      const double fp = forward().item();
      impl.data[j] = saved - static_cast<Real>(h);
      const double fm = forward().item();
      impl.data[j] = saved;
      const double fd = (fp - fm) / (2.0 * h);
      const double an = analytic[i][j];
      const double err =
          std::fabs(an - fd) / (std::max(std::fabs(an), std::fabs(fd)) + 1e-6);
      res.max_err = std::max(res.max_err, err);
      ++res.checked;
    }
  }
  return res;
}

}  // namespace fdtest
