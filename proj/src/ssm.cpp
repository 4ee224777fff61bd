#include "ssmcast/ssm.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ssmcast/kernels/scan.hpp"
#include "ssmcast/ops.hpp"
#include "ssmcast/ssm_math.hpp"

namespace ssmcast {

namespace {

void check_ssm_params(const SsmParams& p) {
  if (p.a.rank() != 2 || p.b.rank() != 2 || p.c.rank() != 2)
    throw std::invalid_argument("ssm: a, b, c must be [channels, state], got a " +
                                shape_str(p.a.shape()) + ", b " +
                                shape_str(p.b.shape()) + ", c " +
                                shape_str(p.c.shape()));
  const std::size_t C = p.a.dim(0), N = p.a.dim(1);
  if (p.b.dim(0) != C || p.b.dim(1) != N || p.c.dim(0) != C || p.c.dim(1) != N)
    throw std::invalid_argument("ssm: a " + shape_str(p.a.shape()) + ", b " +
                                shape_str(p.b.shape()) + ", c " +
                                shape_str(p.c.shape()) + " disagree");
  const bool static_dt = p.delta.rank() == 1;
  if (!(static_dt && p.delta.dim(0) == C) &&
      !(p.delta.rank() == 2 && p.delta.dim(1) == C))
    throw std::invalid_argument("ssm: delta must be [C] or [T,C], got " +
                                shape_str(p.delta.shape()) + " for " +
                                std::to_string(C) + " channels");
  for (std::size_t i = 0; i < p.delta.size(); ++i)
    if (!(p.delta.data()[i] > Real(0)))
      throw std::invalid_argument("ssm: delta must be positive");
}

}  // namespace

DiscreteSsmParams zoh_discretize(const SsmParams& p) {
  check_ssm_params(p);
  const std::size_t C = p.a.dim(0), N = p.a.dim(1);
  const bool static_dt = p.delta.rank() == 1;
  const std::size_t T = static_dt ? 1 : p.delta.dim(0);

  DiscreteSsmParams out;
  if (static_dt) {
    out.a_bar = Tensor({C, N});
    out.b_bar = Tensor({C, N});
  } else {
    out.a_bar = Tensor({T, C, N});
    out.b_bar = Tensor({T, C, N});
  }
  const Real* pa = p.a.data();
  const Real* pb = p.b.data();
  const Real* pd = p.delta.data();
  Real* oa = out.a_bar.data();
  Real* ob = out.b_bar.data();
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t ch = 0; ch < C; ++ch) {
      const Real dt = pd[static_dt ? ch : t * C + ch];
      for (std::size_t n = 0; n < N; ++n) {
        const std::size_t i = (t * C + ch) * N + n;
        const Real z = dt * pa[ch * N + n];
        oa[i] = std::exp(z);
        ob[i] = zoh_phi(z) * dt * pb[ch * N + n];
      }
    }
  return out;
}

namespace {

enum class ScanKind { kSequential, kBlocked };

Tensor ssm_scan_impl(const Tensor& x, const DiscreteSsmParams& d,
                     const Tensor& c_out, const Tensor* h0, ScanKind kind) {
  if (x.rank() != 2)
    throw std::invalid_argument("ssm_scan: x must be [T, channels], got " +
                                shape_str(x.shape()));
  const std::size_t T = x.dim(0), C = x.dim(1);
  const bool static_dt = d.a_bar.rank() == 2;
  if (!static_dt && (d.a_bar.rank() != 3 || d.a_bar.dim(0) != T))
    throw std::invalid_argument("ssm_scan: a_bar " + shape_str(d.a_bar.shape()) +
                                " does not cover " + std::to_string(T) +
                                " timesteps");
  const std::size_t N = d.a_bar.dim(d.a_bar.rank() - 1);
  if (d.a_bar.dim(d.a_bar.rank() - 2) != C ||
      d.b_bar.shape() != d.a_bar.shape())
    throw std::invalid_argument("ssm_scan: a_bar " + shape_str(d.a_bar.shape()) +
                                " / b_bar " + shape_str(d.b_bar.shape()) +
                                " do not match x " + shape_str(x.shape()));
  if (c_out.rank() != 2 || c_out.dim(0) != C || c_out.dim(1) != N)
    throw std::invalid_argument("ssm_scan: c " + shape_str(c_out.shape()) +
                                " must be [" + std::to_string(C) + ", " +
                                std::to_string(N) + "]");
  if (h0 && (h0->rank() != 2 || h0->dim(0) != C || h0->dim(1) != N))
    throw std::invalid_argument("ssm_scan: h0 " + shape_str(h0->shape()) +
                                " must be [" + std::to_string(C) + ", " +
                                std::to_string(N) + "]");

  const std::size_t K = C * N;
  std::vector<Real> a_seq(T * K), b_seq(T * K), h(T * K);
  const Real* pa = d.a_bar.data();
  const Real* pb = d.b_bar.data();
  const Real* px = x.data();
#pragma omp parallel for schedule(static)
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t ch = 0; ch < C; ++ch) {
      const std::size_t src = static_dt ? ch * N : (t * C + ch) * N;
      const std::size_t dst = (t * C + ch) * N;
      const Real xv = px[t * C + ch];
      for (std::size_t n = 0; n < N; ++n) {
        a_seq[dst + n] = pa[src + n];
        b_seq[dst + n] = pb[src + n] * xv;
      }
    }

  if (kind == ScanKind::kSequential)
    kernels::affine_scan_sequential(a_seq.data(), b_seq.data(), T, K, h.data(),
                                    h0 ? h0->data() : nullptr);
  else
    kernels::affine_scan_blocked(a_seq.data(), b_seq.data(), T, K, h.data(),
                                 h0 ? h0->data() : nullptr);

  Tensor y({T, C});
  const Real* pc = c_out.data();
  Real* py = y.data();
#pragma omp parallel for schedule(static)
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t ch = 0; ch < C; ++ch) {
      const Real* hrow = h.data() + (t * C + ch) * N;
      const Real* crow = pc + ch * N;
      Real acc = 0;
      for (std::size_t n = 0; n < N; ++n) acc += crow[n] * hrow[n];
      py[t * C + ch] = acc;
    }
  return y;
}

}  // namespace

Tensor ssm_scan_sequential(const Tensor& x, const DiscreteSsmParams& d,
                           const Tensor& c_out, const Tensor* h0) {
  return ssm_scan_impl(x, d, c_out, h0, ScanKind::kSequential);
}

Tensor ssm_scan_parallel(const Tensor& x, const DiscreteSsmParams& d,
                         const Tensor& c_out, const Tensor* h0) {
  return ssm_scan_impl(x, d, c_out, h0, ScanKind::kBlocked);
}

MambaBlockWeights::MambaBlockWeights(const SsmBlockConfig& cfg, Rng& rng,
                                     ParamRegistry& reg,
                                     const std::string& prefix)
    : d_model(cfg.d_model),
      d_inner(cfg.expand * cfg.d_model),
      n_state(cfg.n_state),
      conv_width(cfg.conv_width) {
  if (d_model == 0 || n_state == 0 || cfg.expand == 0 || conv_width == 0)
    throw std::invalid_argument("ssm block: all dimensions must be positive");

  ln_g = reg.add(prefix + ".ln.g", Tensor({d_model}, std::vector<Real>(d_model, 1)));
  ln_b = reg.add(prefix + ".ln.b", Tensor({d_model}));
  w_in = reg.add(prefix + ".in.w", linear_init(rng, d_model, 2 * d_inner));
  b_in = reg.add(prefix + ".in.b", Tensor({2 * d_inner}));
  conv_k = reg.add(prefix + ".conv.k",
                   uniform_init(rng, {conv_width, d_inner},
                                1.0 / std::sqrt(double(conv_width))));
  w_bsel = reg.add(prefix + ".bsel.w", linear_init(rng, d_inner, n_state));
  w_csel = reg.add(prefix + ".csel.w", linear_init(rng, d_inner, n_state));
  w_dt = reg.add(prefix + ".dt.w", linear_init(rng, d_inner, d_inner));

  // bias chosen so the initial step sizes land in [dt_min, dt_max]:
  // dt = exp(U(log dt_min, log dt_max)), bias = softplus^-1(dt)
  Tensor dtb({d_inner});
  for (std::size_t i = 0; i < d_inner; ++i) {
    const double dt =
        std::exp(rng.uniform(std::log(cfg.dt_min), std::log(cfg.dt_max)));
    dtb.data()[i] = static_cast<Real>(std::log(std::expm1(dt)));
  }
  b_dt = reg.add(prefix + ".dt.b", dtb);

  // state n gets log(n+1), replicated across channels
  Tensor al({d_inner, n_state});
  for (std::size_t ch = 0; ch < d_inner; ++ch)
    for (std::size_t n = 0; n < n_state; ++n)
      al.at({ch, n}) = static_cast<Real>(std::log(double(n + 1)));
  a_log = reg.add(prefix + ".a_log", al);

  w_out = reg.add(prefix + ".out.w", linear_init(rng, d_inner, d_model));
  b_out = reg.add(prefix + ".out.b", Tensor({d_model}));
}

Tensor mamba_block_forward(const Tensor& x, const MambaBlockWeights& w) {
  if (x.rank() != 2 || x.dim(1) != w.d_model)
    throw std::invalid_argument("ssm block: input " + shape_str(x.shape()) +
                                " does not match width " +
                                std::to_string(w.d_model));
  Tensor h = layer_norm(x, w.ln_g, w.ln_b);
  Tensor uz = linear(h, w.w_in, &w.b_in);
  Tensor u = slice(uz, 1, 0, w.d_inner);
  Tensor z = slice(uz, 1, w.d_inner, w.d_inner);
  u = silu(conv1d_causal(u, w.conv_k));

  Tensor bsel = linear(u, w.w_bsel);
  Tensor csel = linear(u, w.w_csel);
  Tensor dt = softplus(linear(u, w.w_dt, &w.b_dt));
  Tensor a = scale(exp(w.a_log), Real(-1));
  Tensor y = selective_scan(dt, a, bsel, csel, u);

  Tensor out = linear(mul(y, silu(z)), w.w_out, &w.b_out);
  return add(x, out);
}

}  // namespace ssmcast
