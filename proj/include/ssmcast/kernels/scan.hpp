#pragma once

#include <cstddef>

#include "ssmcast/tensor.hpp"

// Raw recurrence kernels shared by the state-space layers. Layout is row
// major [T, K]: K independent lanes advancing together over T steps,
//   h[t][k] = a[t][k] * h[t-1][k] + b[t][k],   h[-1] = h0 (zeros if null).
//
// The blocked variant reassociates the recurrence as a prefix scan over the
// affine pairs (a, b) under the composition (a2*a1, a2*b1 + b2): each fixed
// size block is scanned locally in parallel, block carries are combined
// serially, and carries are applied in parallel. The block size is a
// constant, so results are bitwise identical for any thread count.

namespace ssmcast::kernels {

void affine_scan_sequential(const Real* a, const Real* b, std::size_t T,
                            std::size_t K, Real* h, const Real* h0 = nullptr);

void affine_scan_blocked(const Real* a, const Real* b, std::size_t T,
                         std::size_t K, Real* h, const Real* h0 = nullptr);

}  // namespace ssmcast::kernels
