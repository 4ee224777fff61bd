#include "ssmcast/optim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ssmcast {

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

AdamW::AdamW(ParamRegistry& params, AdamWConfig cfg)
    : params_(&params), cfg_(cfg) {
  if (cfg_.lr <= 0) throw std::invalid_argument("AdamW: lr must be positive");
  if (cfg_.beta1 < 0 || cfg_.beta1 >= 1 || cfg_.beta2 < 0 || cfg_.beta2 >= 1)
    throw std::invalid_argument("AdamW: betas must be in [0,1)");
  m_.reserve(params.items().size());
  v_.reserve(params.items().size());
  for (const auto& [name, t] : params.items()) {
    m_.emplace_back(t.size(), 0.0);
    v_.emplace_back(t.size(), 0.0);
    // decay matrices only; biases, norm gains and the state-decay
    // parameterization stay unregularized
    decay_.push_back(t.rank() >= 2 && !ends_with(name, ".a_log"));
  }
}

void AdamW::step(double lr_scale) {
  t_++;
  const double b1 = cfg_.beta1, b2 = cfg_.beta2;
  const double bias1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double bias2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double lr = cfg_.lr * lr_scale;
  auto& items = params_->items();
  for (std::size_t i = 0; i < items.size(); ++i) {
    Tensor& p = items[i].second;
    if (!p.has_grad()) continue;  // never touched by the tape this step
    const Real* g = p.grad_vec().data();
    Real* w = p.data();
    double* m = m_[i].data();
    double* v = v_[i].data();
    const double wd = decay_[i] ? cfg_.weight_decay : 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double gj = static_cast<double>(g[j]);
      m[j] = b1 * m[j] + (1.0 - b1) * gj;
      v[j] = b2 * v[j] + (1.0 - b2) * gj * gj;
      const double mhat = m[j] / bias1;
      const double vhat = v[j] / bias2;
      double upd = mhat / (std::sqrt(vhat) + cfg_.eps);
      upd += wd * static_cast<double>(w[j]);
      w[j] = static_cast<Real>(static_cast<double>(w[j]) - lr * upd);
    }
  }
}

double cosine_lr(std::size_t step, std::size_t total, double base_lr,
                 double final_frac) {
  if (total == 0) throw std::invalid_argument("cosine_lr: total must be >= 1");
  if (step >= total) step = total - 1;
  if (total == 1) return base_lr;
  const double x = static_cast<double>(step) / static_cast<double>(total - 1);
  const double shape = 0.5 * (1.0 + std::cos(x * 3.14159265358979323846));
  return base_lr * (final_frac + (1.0 - final_frac) * shape);
}

double clip_global_norm(ParamRegistry& params, double max_norm) {
  double sq = 0.0;
  for (auto& [name, t] : params.items()) {
    if (!t.has_grad()) continue;
    for (Real g : t.grad_vec()) sq += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const Real s = static_cast<Real>(max_norm / norm);
    for (auto& [name, t] : params.items()) {
      if (!t.has_grad()) continue;
      Real* g = t.grad();
      for (std::size_t j = 0; j < t.size(); ++j) g[j] *= s;
    }
  }
  return norm;
}

}  // namespace ssmcast
