#pragma once

#include <cstdint>
#include <vector>

#include "ssmcast/tensor.hpp"

// Differentiable tensor operations. Every op validates shapes up front and
// throws std::invalid_argument naming both shapes on mismatch. When a tape is
// active and an input requires a gradient, the op records a backward closure.
//
// Broadcasting is restricted to trailing-dimension alignment: where noted, the
// second argument's shape must equal a suffix of the first argument's shape
// and is repeated over the leading dimensions. Nothing else broadcasts.

namespace ssmcast {

// b broadcasts (suffix rule).
Tensor add(const Tensor& a, const Tensor& b);
// b broadcasts (suffix rule).
Tensor mul(const Tensor& a, const Tensor& b);
// out = a * c with a compile-time constant factor; c carries no gradient.
Tensor scale(const Tensor& a, Real c);

Tensor matmul(const Tensor& a, const Tensor& b);  // [m,k] x [k,n] -> [m,n]
Tensor transpose(const Tensor& a);                // [m,n] -> [n,m]

// x [rows,in] -> [rows,out]; w [in,out]; optional bias [out] broadcast per row.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor* bias = nullptr);

// Normalizes along `axis`. Rejects non-finite input.
Tensor softmax(const Tensor& x, std::size_t axis);

Tensor silu(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor exp(const Tensor& x);

Tensor sum(const Tensor& x);   // -> scalar [1]
Tensor mean(const Tensor& x);  // -> scalar [1]

// All parts must agree on every dimension except `axis`.
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);

// Copies indices [start, start+len) along `axis`.
Tensor slice(const Tensor& x, std::size_t axis, std::size_t start,
             std::size_t len);

// u [Z,V], w [Z,N] -> [Z,V,N] with out[z,v,n] = u[z,v] * w[z,n].
Tensor outer(const Tensor& u, const Tensor& w);

// x [rows,D] normalized per row; gamma/beta [D].
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  Real eps = Real(1e-5));

// Mean negative log-likelihood over rows whose target != ignore_index.
// logits [B,C]; targets.size() == B; out-of-range targets throw
// std::out_of_range. If every row is ignored the result is 0 with no
// gradient.
Tensor cross_entropy(const Tensor& logits, const std::vector<std::int64_t>& targets,
                     std::int64_t ignore_index = -1);

// Depthwise causal convolution: x [T,D], kernel [W,D],
// out[t,d] = sum_w kernel[w,d] * x[t-w,d] with x[<0] treated as zero.
Tensor conv1d_causal(const Tensor& x, const Tensor& kernel);

// Fused selective state-space layer over all channels.
//   delta [T,C] (> 0), a [C,N], b [T,N], c [T,N], u [T,C]  ->  y [T,C]
// Per channel ch and state n with z = delta[t,ch] * a[ch,n]:
//   h_t = exp(z) h_{t-1} + phi(z) * delta[t,ch] * b[t,n] * u[t,ch]
//   y[t,ch] = sum_n c[t,n] * h_t[n]
// where phi(z) = (e^z - 1)/z (zero-order-hold input gain).
Tensor selective_scan(const Tensor& delta, const Tensor& a, const Tensor& b,
                      const Tensor& c, const Tensor& u);

}  // namespace ssmcast
