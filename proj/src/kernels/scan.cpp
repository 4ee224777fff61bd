#include "ssmcast/kernels/scan.hpp"

#include <algorithm>
#include <vector>

namespace ssmcast::kernels {

void affine_scan_sequential(const Real* a, const Real* b, std::size_t T,
                            std::size_t K, Real* h, const Real* h0) {
  if (T == 0) return;
  for (std::size_t k = 0; k < K; ++k)
    h[k] = a[k] * (h0 ? h0[k] : Real(0)) + b[k];
  for (std::size_t t = 1; t < T; ++t) {
    const Real* at = a + t * K;
    const Real* bt = b + t * K;
    const Real* hp = h + (t - 1) * K;
    Real* ht = h + t * K;
    for (std::size_t k = 0; k < K; ++k) ht[k] = at[k] * hp[k] + bt[k];
  }
}

namespace {
constexpr std::size_t kScanBlock = 512;
}

void affine_scan_blocked(const Real* a, const Real* b, std::size_t T,
                         std::size_t K, Real* h, const Real* h0) {
  if (T == 0) return;
  if (T <= kScanBlock) {
    affine_scan_sequential(a, b, T, K, h, h0);
    return;
  }
  const std::size_t nblocks = (T + kScanBlock - 1) / kScanBlock;

  // prod[t][k] = product of a over this block up to and including t
  std::vector<Real> prod(T * K);

#pragma omp parallel for schedule(static)
  for (std::size_t blk = 0; blk < nblocks; ++blk) {
    const std::size_t t0 = blk * kScanBlock;
    const std::size_t t1 = std::min(T, t0 + kScanBlock);
    for (std::size_t k = 0; k < K; ++k) {
      h[t0 * K + k] = b[t0 * K + k];
      prod[t0 * K + k] = a[t0 * K + k];
    }
    for (std::size_t t = t0 + 1; t < t1; ++t) {
      const Real* at = a + t * K;
      const Real* bt = b + t * K;
      Real* ht = h + t * K;
      Real* pt = prod.data() + t * K;
      const Real* hp = h + (t - 1) * K;
      const Real* pp = prod.data() + (t - 1) * K;
      for (std::size_t k = 0; k < K; ++k) {
        ht[k] = at[k] * hp[k] + bt[k];
        pt[k] = at[k] * pp[k];
      }
    }
  }

  // carry[blk][k] = true state entering block blk
  std::vector<Real> carry(nblocks * K, Real(0));
  if (h0)
    for (std::size_t k = 0; k < K; ++k) carry[k] = h0[k];
  for (std::size_t blk = 1; blk < nblocks; ++blk) {
    const std::size_t last = std::min(T, blk * kScanBlock) - 1;
    const Real* hl = h + last * K;
    const Real* pl = prod.data() + last * K;
    const Real* cin = carry.data() + (blk - 1) * K;
    Real* cout = carry.data() + blk * K;
    for (std::size_t k = 0; k < K; ++k) cout[k] = hl[k] + pl[k] * cin[k];
  }

#pragma omp parallel for schedule(static)
  for (std::size_t blk = 0; blk < nblocks; ++blk) {
    const Real* cin = carry.data() + blk * K;
    if (blk == 0 && !h0) continue;
    const std::size_t t0 = blk * kScanBlock;
    const std::size_t t1 = std::min(T, t0 + kScanBlock);
    for (std::size_t t = t0; t < t1; ++t) {
      Real* ht = h + t * K;
      const Real* pt = prod.data() + t * K;
      for (std::size_t k = 0; k < K; ++k) ht[k] += pt[k] * cin[k];
    }
  }
}

}  // namespace ssmcast::kernels
