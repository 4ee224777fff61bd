#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ssmcast/rng.hpp"
#include "ssmcast/tensor.hpp"

namespace ssmcast {

// Flat, ordered collection of named trainable tensors. The optimizer walks
// it in insertion order; checkpoints serialize it by name.
class ParamRegistry {
 public:
  Tensor add(const std::string& name, Tensor t) {
    for (auto& it : items_)
      if (it.first == name)
        throw std::invalid_argument("duplicate parameter name: " + name);
    t.set_requires_grad(true);
    items_.emplace_back(name, t);
    return t;
  }

  const std::vector<std::pair<std::string, Tensor>>& items() const {
    return items_;
  }
  std::vector<std::pair<std::string, Tensor>>& items() { return items_; }

  Tensor* find(const std::string& name) {
    for (auto& it : items_)
      if (it.first == name) return &it.second;
    return nullptr;
  }

  std::size_t total_size() const {
    std::size_t n = 0;
    for (auto& it : items_) n += it.second.size();
    return n;
  }

  void zero_grads() {
    for (auto& it : items_) it.second.zero_grad();
  }

 private:
  std::vector<std::pair<std::string, Tensor>> items_;
};

inline Tensor uniform_init(Rng& rng, std::vector<std::size_t> shape,
                           double bound) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i)
    t.data()[i] = static_cast<Real>(rng.uniform(-bound, bound));
  return t;
}

inline Tensor normal_init(Rng& rng, std::vector<std::size_t> shape,
                          double stddev) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i)
    t.data()[i] = static_cast<Real>(rng.normal(0.0, stddev));
  return t;
}

// fan-in scaled uniform, the usual default for linear layers
inline Tensor linear_init(Rng& rng, std::size_t fan_in, std::size_t fan_out) {
  return uniform_init(rng, {fan_in, fan_out}, 1.0 / std::sqrt(double(fan_in)));
}

}  // namespace ssmcast
