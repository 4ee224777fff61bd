#include "ssmcast/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ssmcast {

namespace {

constexpr std::size_t kOmpMinWork = 1u << 15;

void check_suffix(const Tensor& a, const Tensor& b, const char* op) {
  const auto& as = a.shape();
  const auto& bs = b.shape();
  bool ok = bs.size() <= as.size();
  if (ok)
    for (std::size_t i = 0; i < bs.size(); ++i)
      ok = ok && bs[bs.size() - 1 - i] == as[as.size() - 1 - i];
  if (!ok)
    throw std::invalid_argument(std::string(op) + ": shape " + shape_str(bs) +
                                " is not a trailing suffix of " + shape_str(as));
}

Real sigmoid(Real x) {
  if (x >= 0) return Real(1) / (Real(1) + std::exp(-x));
  Real e = std::exp(x);
  return e / (Real(1) + e);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_suffix(a, b, "add");
  const std::size_t n = a.size(), bs = b.size();
  Tensor out(a.shape());
  const Real* pa = a.data();
  const Real* pb = b.data();
  Real* po = out.data();
  for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i % bs];

  if (should_record({&a, &b})) {
    out.set_requires_grad(true);
    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    Tape::active()->record([ai, bi, oi, n, bs] {
      if (oi->grad.empty()) return;
      const Real* g = oi->grad.data();
      if (ai->requires_grad) {
        ai->ensure_grad();
        Real* ga = ai->grad.data();
        for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
      }
      if (bi->requires_grad) {
        bi->ensure_grad();
        Real* gb = bi->grad.data();
        for (std::size_t i = 0; i < n; ++i) gb[i % bs] += g[i];
      }
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_suffix(a, b, "mul");
  const std::size_t n = a.size(), bs = b.size();
  Tensor out(a.shape());
  const Real* pa = a.data();
  const Real* pb = b.data();
  Real* po = out.data();
  for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i % bs];

  if (should_record({&a, &b})) {
    out.set_requires_grad(true);
    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    Tape::active()->record([ai, bi, oi, n, bs] {
      if (oi->grad.empty()) return;
      const Real* g = oi->grad.data();
      if (ai->requires_grad) {
        ai->ensure_grad();
        Real* ga = ai->grad.data();
        const Real* pb2 = bi->data.data();
        for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * pb2[i % bs];
      }
      if (bi->requires_grad) {
        bi->ensure_grad();
        Real* gb = bi->grad.data();
        const Real* pa2 = ai->data.data();
        for (std::size_t i = 0; i < n; ++i) gb[i % bs] += g[i] * pa2[i];
      }
    });
  }
  return out;
}

Tensor scale(const Tensor& a, Real c) {
  const std::size_t n = a.size();
  Tensor out(a.shape());
  const Real* pa = a.data();
  Real* po = out.data();
  for (std::size_t i = 0; i < n; ++i) po[i] = c * pa[i];

  if (should_record({&a})) {
    out.set_requires_grad(true);
    auto ai = a.impl(), oi = out.impl();
    Tape::active()->record([ai, oi, c, n] {
      if (oi->grad.empty()) return;
      ai->ensure_grad();
      const Real* g = oi->grad.data();
      Real* ga = ai->grad.data();
      for (std::size_t i = 0; i < n; ++i) ga[i] += c * g[i];
    });
  }
  return out;
}

namespace {

void check_2d(const Tensor& t, const char* op) {
  if (t.rank() != 2)
    throw std::invalid_argument(std::string(op) + ": expected rank-2 tensor, got " +
                                shape_str(t.shape()));
}

// out[m,n] += A[m,k] * B[k,n]
void matmul_accum(const Real* a, const Real* b, std::size_t m, std::size_t k,
                  std::size_t n, Real* out) {
#pragma omp parallel for schedule(static) if (m * k * n >= kOmpMinWork)
  for (std::size_t i = 0; i < m; ++i) {
    Real* orow = out + i * n;
    const Real* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const Real aip = arow[p];
      const Real* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
}

// dA[m,k] += g[m,n] * B^T, i.e. dA[i,p] += sum_j g[i,j] B[p,j]
void matmul_grad_a(const Real* g, const Real* b, std::size_t m, std::size_t k,
                   std::size_t n, Real* da) {
#pragma omp parallel for schedule(static) if (m * k * n >= kOmpMinWork)
  for (std::size_t i = 0; i < m; ++i) {
    const Real* grow = g + i * n;
    Real* darow = da + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const Real* brow = b + p * n;
      Real acc = 0;
      for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
      darow[p] += acc;
    }
  }
}

// dB[k,n] += A^T * g, i.e. dB[p,j] += sum_i A[i,p] g[i,j]
void matmul_grad_b(const Real* a, const Real* g, std::size_t m, std::size_t k,
                   std::size_t n, Real* db) {
#pragma omp parallel for schedule(static) if (m * k * n >= kOmpMinWork)
  for (std::size_t p = 0; p < k; ++p) {
    Real* dbrow = db + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const Real aip = a[i * k + p];
      const Real* grow = g + i * n;
      for (std::size_t j = 0; j < n; ++j) dbrow[j] += aip * grow[j];
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_2d(a, "matmul");
  check_2d(b, "matmul");
  if (a.dim(1) != b.dim(0))
    throw std::invalid_argument("matmul: inner dimensions disagree, " +
                                shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out({m, n});
  matmul_accum(a.data(), b.data(), m, k, n, out.data());

  if (should_record({&a, &b})) {
    out.set_requires_grad(true);
    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    Tape::active()->record([ai, bi, oi, m, k, n] {
      if (oi->grad.empty()) return;
      const Real* g = oi->grad.data();
      if (ai->requires_grad) {
        ai->ensure_grad();
        matmul_grad_a(g, bi->data.data(), m, k, n, ai->grad.data());
      }
      if (bi->requires_grad) {
        bi->ensure_grad();
        matmul_grad_b(ai->data.data(), g, m, k, n, bi->grad.data());
      }
    });
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  check_2d(a, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  Tensor out({n, m});
  const Real* pa = a.data();
  Real* po = out.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) po[j * m + i] = pa[i * n + j];

  if (should_record({&a})) {
    out.set_requires_grad(true);
    auto ai = a.impl(), oi = out.impl();
    Tape::active()->record([ai, oi, m, n] {
      if (oi->grad.empty()) return;
      ai->ensure_grad();
      const Real* g = oi->grad.data();
      Real* ga = ai->grad.data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
    });
  }
  return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor* bias) {
  check_2d(x, "linear");
  check_2d(w, "linear");
  if (x.dim(1) != w.dim(0))
    throw std::invalid_argument("linear: input width " + shape_str(x.shape()) +
                                " does not match weight " + shape_str(w.shape()));
  const std::size_t rows = x.dim(0), in = x.dim(1), out_w = w.dim(1);
  if (bias && (bias->rank() != 1 || bias->dim(0) != out_w))
    throw std::invalid_argument("linear: bias shape " + shape_str(bias->shape()) +
                                " does not match output width " +
                                std::to_string(out_w));
  Tensor out({rows, out_w});
  if (bias) {
    const Real* pb = bias->data();
    Real* po = out.data();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy(pb, pb + out_w, po + r * out_w);
  }
  matmul_accum(x.data(), w.data(), rows, in, out_w, out.data());

  const bool rec = bias ? should_record({&x, &w, bias}) : should_record({&x, &w});
  if (rec) {
    out.set_requires_grad(true);
    auto xi = x.impl(), wi = w.impl(), oi = out.impl();
    auto biasi = bias ? bias->impl() : nullptr;
    Tape::active()->record([xi, wi, biasi, oi, rows, in, out_w] {
      if (oi->grad.empty()) return;
      const Real* g = oi->grad.data();
      if (xi->requires_grad) {
        xi->ensure_grad();
        matmul_grad_a(g, wi->data.data(), rows, in, out_w, xi->grad.data());
      }
      if (wi->requires_grad) {
        wi->ensure_grad();
        matmul_grad_b(xi->data.data(), g, rows, in, out_w, wi->grad.data());
      }
      if (biasi && biasi->requires_grad) {
        biasi->ensure_grad();
        Real* gb = biasi->grad.data();
        for (std::size_t r = 0; r < rows; ++r) {
          const Real* grow = g + r * out_w;
          for (std::size_t o = 0; o < out_w; ++o) gb[o] += grow[o];
        }
      }
    });
  }
  return out;
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank())
    throw std::invalid_argument("softmax: axis " + std::to_string(axis) +
                                " out of range for shape " + shape_str(x.shape()));
  const std::size_t n = x.size();
  const Real* px = x.data();
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(px[i]))
      throw std::invalid_argument("softmax: input contains a non-finite value");

  std::size_t outer = 1, inner = 1;
  const std::size_t C = x.dim(axis);
  for (std::size_t i = 0; i < axis; ++i) outer *= x.dim(i);
  for (std::size_t i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);

  Tensor out(x.shape());
  Real* po = out.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * C * inner + in;
      Real mx = px[base];
      for (std::size_t c = 1; c < C; ++c)
        mx = std::max(mx, px[base + c * inner]);
      Real denom = 0;
      for (std::size_t c = 0; c < C; ++c) {
        Real e = std::exp(px[base + c * inner] - mx);
        po[base + c * inner] = e;
        denom += e;
      }
      for (std::size_t c = 0; c < C; ++c) po[base + c * inner] /= denom;
    }
  }

  if (should_record({&x})) {
    out.set_requires_grad(true);
    auto xi = x.impl(), oi = out.impl();
    Tape::active()->record([xi, oi, outer, C, inner] {
      if (oi->grad.empty()) return;
      xi->ensure_grad();
      const Real* g = oi->grad.data();
      const Real* y = oi->data.data();
      Real* gx = xi->grad.data();
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
          const std::size_t base = o * C * inner + in;
          Real dot = 0;
          for (std::size_t c = 0; c < C; ++c)
            dot += g[base + c * inner] * y[base + c * inner];
          for (std::size_t c = 0; c < C; ++c) {
            const std::size_t j = base + c * inner;
            gx[j] += y[j] * (g[j] - dot);
          }
        }
      }
    });
  }
  return out;
}

namespace {

template <typename Fwd, typename Bwd>
Tensor unary_op(const Tensor& x, Fwd fwd, Bwd dydx) {
  const std::size_t n = x.size();
  Tensor out(x.shape());
  const Real* px = x.data();
  Real* po = out.data();
  for (std::size_t i = 0; i < n; ++i) po[i] = fwd(px[i]);

  if (should_record({&x})) {
    out.set_requires_grad(true);
    auto xi = x.impl(), oi = out.impl();
    Tape::active()->record([xi, oi, n, dydx] {
      if (oi->grad.empty()) return;
      xi->ensure_grad();
      const Real* g = oi->grad.data();
      const Real* xv = xi->data.data();
      const Real* yv = oi->data.data();
      Real* gx = xi->grad.data();
      for (std::size_t i = 0; i < n; ++i) gx[i] += g[i] * dydx(xv[i], yv[i]);
    });
  }
  return out;
}

}  // namespace

Tensor silu(const Tensor& x) {
  return unary_op(
      x, [](Real v) { return v * sigmoid(v); },
      [](Real v, Real) {
        const Real s = sigmoid(v);
        return s * (Real(1) + v * (Real(1) - s));
      });
}

Tensor softplus(const Tensor& x) {
  return unary_op(
      x,
      [](Real v) {
        return std::max(v, Real(0)) + std::log1p(std::exp(-std::fabs(v)));
      },
      [](Real v, Real) { return sigmoid(v); });
}

Tensor exp(const Tensor& x) {
  return unary_op(
      x, [](Real v) { return std::exp(v); },
      [](Real, Real y) { return y; });
}

Tensor sum(const Tensor& x) {
  const std::size_t n = x.size();
  const Real* px = x.data();
  Real acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += px[i];
  Tensor out = Tensor::scalar(acc);

  if (should_record({&x})) {
    out.set_requires_grad(true);
    auto xi = x.impl(), oi = out.impl();
    Tape::active()->record([xi, oi, n] {
      if (oi->grad.empty()) return;
      xi->ensure_grad();
      const Real g = oi->grad[0];
      Real* gx = xi->grad.data();
      for (std::size_t i = 0; i < n; ++i) gx[i] += g;
    });
  }
  return out;
}

Tensor mean(const Tensor& x) {
  return scale(sum(x), Real(1) / static_cast<Real>(x.size()));
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no tensors given");
  const std::size_t rank = parts[0].rank();
  if (axis >= rank)
    throw std::invalid_argument("concat: axis " + std::to_string(axis) +
                                " out of range for shape " +
                                shape_str(parts[0].shape()));
  std::size_t axis_total = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != rank)
      throw std::invalid_argument("concat: rank mismatch between " +
                                  shape_str(parts[0].shape()) + " and " +
                                  shape_str(p.shape()));
    for (std::size_t i = 0; i < rank; ++i)
      if (i != axis && p.dim(i) != parts[0].dim(i))
        throw std::invalid_argument("concat: shape mismatch between " +
                                    shape_str(parts[0].shape()) + " and " +
                                    shape_str(p.shape()));
    axis_total += p.dim(axis);
  }
  std::vector<std::size_t> oshape = parts[0].shape();
  oshape[axis] = axis_total;

  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= oshape[i];
  for (std::size_t i = axis + 1; i < rank; ++i) inner *= oshape[i];

  Tensor out(oshape);
  Real* po = out.data();
  const std::size_t out_row = axis_total * inner;
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    const std::size_t block = p.dim(axis) * inner;
    const Real* pp = p.data();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy(pp + o * block, pp + (o + 1) * block,
                po + o * out_row + offset);
    offset += block;
  }

  bool rec = false;
  for (const Tensor& p : parts) rec = rec || should_record({&p});
  if (rec) {
    out.set_requires_grad(true);
    std::vector<std::shared_ptr<TensorImpl>> part_impls;
    std::vector<std::size_t> blocks;
    for (const Tensor& p : parts) {
      part_impls.push_back(p.impl());
      blocks.push_back(p.dim(axis) * inner);
    }
    auto oi = out.impl();
    Tape::active()->record([part_impls, blocks, oi, outer, out_row] {
      if (oi->grad.empty()) return;
      const Real* g = oi->grad.data();
      std::size_t offset2 = 0;
      for (std::size_t pi = 0; pi < part_impls.size(); ++pi) {
        auto& impl = part_impls[pi];
        const std::size_t block = blocks[pi];
        if (impl->requires_grad) {
          impl->ensure_grad();
          Real* gp = impl->grad.data();
          for (std::size_t o = 0; o < outer; ++o) {
            const Real* src = g + o * out_row + offset2;
            Real* dst = gp + o * block;
            for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
          }
        }
        offset2 += block;
      }
    });
  }
  return out;
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t start,
             std::size_t len) {
  if (axis >= x.rank())
    throw std::invalid_argument("slice: axis " + std::to_string(axis) +
                                " out of range for shape " + shape_str(x.shape()));
  if (len == 0 || start + len > x.dim(axis))
    throw std::invalid_argument(
        "slice: range [" + std::to_string(start) + ", " +
        std::to_string(start + len) + ") invalid for shape " +
        shape_str(x.shape()) + " axis " + std::to_string(axis));

  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= x.dim(i);
  for (std::size_t i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);
  const std::size_t in_row = x.dim(axis) * inner;
  const std::size_t block = len * inner;

  std::vector<std::size_t> oshape = x.shape();
  oshape[axis] = len;
  Tensor out(oshape);
  const Real* px = x.data();
  Real* po = out.data();
  for (std::size_t o = 0; o < outer; ++o)
    std::copy(px + o * in_row + start * inner,
              px + o * in_row + start * inner + block, po + o * block);

  if (should_record({&x})) {
    out.set_requires_grad(true);
    auto xi = x.impl(), oi = out.impl();
    const std::size_t off = start * inner;
    Tape::active()->record([xi, oi, outer, in_row, block, off] {
      if (oi->grad.empty()) return;
      xi->ensure_grad();
      const Real* g = oi->grad.data();
      Real* gx = xi->grad.data();
      for (std::size_t o = 0; o < outer; ++o) {
        Real* dst = gx + o * in_row + off;
        const Real* src = g + o * block;
        for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
      }
    });
  }
  return out;
}

Tensor outer(const Tensor& u, const Tensor& w) {
  check_2d(u, "outer");
  check_2d(w, "outer");
  if (u.dim(0) != w.dim(0))
    throw std::invalid_argument("outer: leading dimensions disagree, " +
                                shape_str(u.shape()) + " vs " + shape_str(w.shape()));
  const std::size_t Z = u.dim(0), V = u.dim(1), N = w.dim(1);
  Tensor out({Z, V, N});
  const Real* pu = u.data();
  const Real* pw = w.data();
  Real* po = out.data();
  for (std::size_t z = 0; z < Z; ++z)
    for (std::size_t v = 0; v < V; ++v) {
      const Real uv = pu[z * V + v];
      const Real* wrow = pw + z * N;
      Real* orow = po + (z * V + v) * N;
      for (std::size_t n = 0; n < N; ++n) orow[n] = uv * wrow[n];
    }

  if (should_record({&u, &w})) {
    out.set_requires_grad(true);
    auto ui = u.impl(), wi = w.impl(), oi = out.impl();
    Tape::active()->record([ui, wi, oi, Z, V, N] {
      if (oi->grad.empty()) return;
      const Real* g = oi->grad.data();
      if (ui->requires_grad) {
        ui->ensure_grad();
        Real* gu = ui->grad.data();
        const Real* pw2 = wi->data.data();
        for (std::size_t z = 0; z < Z; ++z)
          for (std::size_t v = 0; v < V; ++v) {
            const Real* grow = g + (z * V + v) * N;
            const Real* wrow = pw2 + z * N;
            Real acc = 0;
            for (std::size_t n = 0; n < N; ++n) acc += grow[n] * wrow[n];
            gu[z * V + v] += acc;
          }
      }
      if (wi->requires_grad) {
        wi->ensure_grad();
        Real* gw = wi->grad.data();
        const Real* pu2 = ui->data.data();
        for (std::size_t z = 0; z < Z; ++z)
          for (std::size_t v = 0; v < V; ++v) {
            const Real uv = pu2[z * V + v];
            const Real* grow = g + (z * V + v) * N;
            Real* gwrow = gw + z * N;
            for (std::size_t n = 0; n < N; ++n) gwrow[n] += uv * grow[n];
          }
      }
    });
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  Real eps) {
  const std::size_t D = x.dim(x.rank() - 1);
  if (gamma.rank() != 1 || gamma.dim(0) != D || beta.rank() != 1 ||
      beta.dim(0) != D)
    throw std::invalid_argument("layer_norm: gamma " + shape_str(gamma.shape()) +
                                " / beta " + shape_str(beta.shape()) +
                                " do not match feature width of " +
                                shape_str(x.shape()));
  const std::size_t rows = x.size() / D;
  Tensor out(x.shape());
  auto xhat = std::make_shared<std::vector<Real>>(x.size());
  auto inv_std = std::make_shared<std::vector<Real>>(rows);

  const Real* px = x.data();
  const Real* pg = gamma.data();
  const Real* pb = beta.data();
  Real* po = out.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const Real* row = px + r * D;
    Real mu = 0;
    for (std::size_t d = 0; d < D; ++d) mu += row[d];
    mu /= static_cast<Real>(D);
    Real var = 0;
    for (std::size_t d = 0; d < D; ++d) {
      const Real c = row[d] - mu;
      var += c * c;
    }
    var /= static_cast<Real>(D);
    const Real s = Real(1) / std::sqrt(var + eps);
    (*inv_std)[r] = s;
    Real* hrow = xhat->data() + r * D;
    Real* orow = po + r * D;
    for (std::size_t d = 0; d < D; ++d) {
      hrow[d] = (row[d] - mu) * s;
      orow[d] = pg[d] * hrow[d] + pb[d];
    }
  }

  if (should_record({&x, &gamma, &beta})) {
    out.set_requires_grad(true);
    auto xi = x.impl(), gi = gamma.impl(), bi = beta.impl(), oi = out.impl();
    Tape::active()->record([xi, gi, bi, oi, xhat, inv_std, rows, D] {
      if (oi->grad.empty()) return;
      const Real* g = oi->grad.data();
      const Real* pg2 = gi->data.data();
      if (xi->requires_grad) {
        xi->ensure_grad();
        Real* gx = xi->grad.data();
        for (std::size_t r = 0; r < rows; ++r) {
          const Real* grow = g + r * D;
          const Real* hrow = xhat->data() + r * D;
          const Real s = (*inv_std)[r];
          Real m1 = 0, m2 = 0;
          for (std::size_t d = 0; d < D; ++d) {
            const Real dh = grow[d] * pg2[d];
            m1 += dh;
            m2 += dh * hrow[d];
          }
          m1 /= static_cast<Real>(D);
          m2 /= static_cast<Real>(D);
          Real* gxrow = gx + r * D;
          for (std::size_t d = 0; d < D; ++d) {
            const Real dh = grow[d] * pg2[d];
            gxrow[d] += s * (dh - m1 - hrow[d] * m2);
          }
        }
      }
      if (gi->requires_grad) {
        gi->ensure_grad();
        Real* gg = gi->grad.data();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t d = 0; d < D; ++d)
            gg[d] += g[r * D + d] * (*xhat)[r * D + d];
      }
      if (bi->requires_grad) {
        bi->ensure_grad();
        Real* gb = bi->grad.data();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t d = 0; d < D; ++d) gb[d] += g[r * D + d];
      }
    });
  }
  return out;
}

Tensor cross_entropy(const Tensor& logits,
                     const std::vector<std::int64_t>& targets,
                     std::int64_t ignore_index) {
  check_2d(logits, "cross_entropy");
  const std::size_t B = logits.dim(0), C = logits.dim(1);
  if (targets.size() != B)
    throw std::invalid_argument("cross_entropy: " + std::to_string(targets.size()) +
                                " targets for " + std::to_string(B) + " rows");
  std::size_t counted = 0;
  for (std::int64_t t : targets) {
    if (t == ignore_index) continue;
    if (t < 0 || t >= static_cast<std::int64_t>(C))
      throw std::out_of_range("cross_entropy: target " + std::to_string(t) +
                              " out of range for " + std::to_string(C) +
                              " classes");
    ++counted;
  }
  if (counted == 0) return Tensor::scalar(0);

  auto probs = std::make_shared<std::vector<Real>>(B * C);
  const Real* pl = logits.data();
  Real loss = 0;
  for (std::size_t r = 0; r < B; ++r) {
    const Real* row = pl + r * C;
    Real mx = row[0];
    for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, row[c]);
    Real denom = 0;
    Real* prow = probs->data() + r * C;
    for (std::size_t c = 0; c < C; ++c) {
      prow[c] = std::exp(row[c] - mx);
      denom += prow[c];
    }
    for (std::size_t c = 0; c < C; ++c) prow[c] /= denom;
    if (targets[r] != ignore_index) {
      const Real lse = mx + std::log(denom);
      loss += lse - row[targets[r]];
    }
  }
  Tensor out = Tensor::scalar(loss / static_cast<Real>(counted));

  if (should_record({&logits})) {
    out.set_requires_grad(true);
    auto li = logits.impl(), oi = out.impl();
    auto tgt = std::make_shared<std::vector<std::int64_t>>(targets);
    Tape::active()->record([li, oi, probs, tgt, ignore_index, B, C, counted] {
      if (oi->grad.empty()) return;
      li->ensure_grad();
      const Real g = oi->grad[0] / static_cast<Real>(counted);
      Real* gl = li->grad.data();
      for (std::size_t r = 0; r < B; ++r) {
        if ((*tgt)[r] == ignore_index) continue;
        const Real* prow = probs->data() + r * C;
        Real* grow = gl + r * C;
        for (std::size_t c = 0; c < C; ++c) grow[c] += g * prow[c];
        grow[(*tgt)[r]] -= g;
      }
    });
  }
  return out;
}

Tensor conv1d_causal(const Tensor& x, const Tensor& kernel) {
  check_2d(x, "conv1d_causal");
  check_2d(kernel, "conv1d_causal");
  if (x.dim(1) != kernel.dim(1))
    throw std::invalid_argument("conv1d_causal: channel counts disagree, x " +
                                shape_str(x.shape()) + " vs kernel " +
                                shape_str(kernel.shape()));
  const std::size_t T = x.dim(0), D = x.dim(1), W = kernel.dim(0);
  Tensor out({T, D});
  const Real* px = x.data();
  const Real* pk = kernel.data();
  Real* po = out.data();
#pragma omp parallel for schedule(static) if (T * D * W >= kOmpMinWork)
  for (std::size_t t = 0; t < T; ++t) {
    Real* orow = po + t * D;
    const std::size_t wmax = std::min(W, t + 1);
    for (std::size_t w = 0; w < wmax; ++w) {
      const Real* krow = pk + w * D;
      const Real* xrow = px + (t - w) * D;
      for (std::size_t d = 0; d < D; ++d) orow[d] += krow[d] * xrow[d];
    }
  }

  if (should_record({&x, &kernel})) {
    out.set_requires_grad(true);
    auto xi = x.impl(), ki = kernel.impl(), oi = out.impl();
    Tape::active()->record([xi, ki, oi, T, D, W] {
      if (oi->grad.empty()) return;
      const Real* g = oi->grad.data();
      if (xi->requires_grad) {
        xi->ensure_grad();
        Real* gx = xi->grad.data();
        const Real* pk2 = ki->data.data();
#pragma omp parallel for schedule(static) if (T * D * W >= kOmpMinWork)
        for (std::size_t s = 0; s < T; ++s) {
          Real* gxrow = gx + s * D;
          const std::size_t wmax = std::min(W, T - s);
          for (std::size_t w = 0; w < wmax; ++w) {
            const Real* grow = g + (s + w) * D;
            const Real* krow = pk2 + w * D;
            for (std::size_t d = 0; d < D; ++d) gxrow[d] += grow[d] * krow[d];
          }
        }
      }
      if (ki->requires_grad) {
        ki->ensure_grad();
        Real* gk = ki->grad.data();
        const Real* px2 = xi->data.data();
        for (std::size_t w = 0; w < W; ++w) {
          Real* gkrow = gk + w * D;
          for (std::size_t t = w; t < T; ++t) {
            const Real* grow = g + t * D;
            const Real* xrow = px2 + (t - w) * D;
            for (std::size_t d = 0; d < D; ++d) gkrow[d] += grow[d] * xrow[d];
          }
        }
      }
    });
  }
  return out;
}

}  // namespace ssmcast
