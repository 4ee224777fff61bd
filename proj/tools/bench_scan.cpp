// Times the sequential recurrence against the blocked parallel scan on the
// shapes the encoder actually runs, and checks they agree bitwise.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "ssmcast/kernels/scan.hpp"
#include "ssmcast/rng.hpp"

using namespace ssmcast;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
  // one warm-up, then the best of reps
  fn();
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    auto t0 = std::chrono::steady_clock::now();
    fn();
    auto t1 = std::chrono::steady_clock::now();
    best = std::min(best,
                    std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("openmp threads: %d\n", omp_get_max_threads());
#else
  std::printf("openmp threads: 1 (built without openmp)\n");
#endif
  std::printf("%8s %6s %14s %12s %8s %10s\n", "T", "K", "sequential ms",
              "blocked ms", "speedup", "max |diff|");

  Rng rng(7);
  for (std::size_t T : {std::size_t{4096}, std::size_t{16384},
                        std::size_t{65536}}) {
    for (std::size_t K : {std::size_t{16}, std::size_t{64}}) {
      std::vector<Real> a(T * K), b(T * K), h_seq(T * K), h_blk(T * K);
      for (std::size_t i = 0; i < T * K; ++i) {
        // decay factors in (0,1) keep the recurrence bounded
        a[i] = static_cast<Real>(0.5 + 0.499 * rng.uniform());
        b[i] = static_cast<Real>(rng.normal());
      }
      const double ms_seq = time_ms(
          [&] {
            kernels::affine_scan_sequential(a.data(), b.data(), T, K,
                                            h_seq.data());
          },
          5);
      const double ms_blk = time_ms(
          [&] {
            kernels::affine_scan_blocked(a.data(), b.data(), T, K,
                                         h_blk.data());
          },
          5);
      Real max_diff = 0;
      for (std::size_t i = 0; i < T * K; ++i)
        max_diff = std::max(max_diff, std::abs(h_seq[i] - h_blk[i]));
      std::printf("%8zu %6zu %14.3f %12.3f %7.2fx %10.3g\n", T, K, ms_seq,
                  ms_blk, ms_seq / ms_blk, static_cast<double>(max_diff));
    }
  }
  return 0;
}
