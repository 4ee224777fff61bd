#include <cmath>
#include <vector>

#include "doctest.h"
#include "ssmcast/kernels/scan.hpp"
#include "ssmcast/rng.hpp"

using namespace ssmcast;

namespace {
double max_abs_diff(const std::vector<Real>& a, const std::vector<Real>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::fabs(double(a[i]) - double(b[i])));
  return m;
}
}  // namespace

TEST_CASE("scan with a=1, b=1 counts steps") {
  const std::size_t T = 1300, K = 2;
  std::vector<Real> a(T * K, 1.0), b(T * K, 1.0), h(T * K);
  kernels::affine_scan_blocked(a.data(), b.data(), T, K, h.data());
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t k = 0; k < K; ++k)
      CHECK(h[t * K + k] == doctest::Approx(double(t + 1)));
}

TEST_CASE("scan with a=0 is memoryless") {
  const std::size_t T = 700, K = 3;
  Rng rng(4);
  std::vector<Real> a(T * K, 0.0), b(T * K), h(T * K);
  for (auto& v : b) v = rng.normal();
  kernels::affine_scan_blocked(a.data(), b.data(), T, K, h.data());
  for (std::size_t i = 0; i < T * K; ++i) CHECK(h[i] == b[i]);
}

TEST_CASE("blocked scan matches sequential scan") {
  Rng rng(8);
  for (int rep = 0; rep < 10; ++rep) {
    const std::size_t T = 1 + rng.uniform_int(3000);
    const std::size_t K = 1 + rng.uniform_int(8);
    std::vector<Real> a(T * K), b(T * K), hs(T * K), hb(T * K);
    for (auto& v : a) v = rng.uniform(0.0, 0.999);
    for (auto& v : b) v = rng.normal();
    kernels::affine_scan_sequential(a.data(), b.data(), T, K, hs.data());
    kernels::affine_scan_blocked(a.data(), b.data(), T, K, hb.data());
    CHECK(max_abs_diff(hs, hb) < 1e-9);
  }
}

TEST_CASE("blocked scan matches sequential with an initial state") {
  Rng rng(9);
  const std::size_t T = 1600, K = 4;
  std::vector<Real> a(T * K), b(T * K), h0(K), hs(T * K), hb(T * K);
  for (auto& v : a) v = rng.uniform(0.0, 0.999);
  for (auto& v : b) v = rng.normal();
  for (auto& v : h0) v = rng.normal();
  kernels::affine_scan_sequential(a.data(), b.data(), T, K, hs.data(), h0.data());
  kernels::affine_scan_blocked(a.data(), b.data(), T, K, hb.data(), h0.data());
  CHECK(max_abs_diff(hs, hb) < 1e-9);
  // first step folds in h0
  CHECK(hs[0] == doctest::Approx(a[0] * h0[0] + b[0]));
}

TEST_CASE("single-step and empty scans") {
  std::vector<Real> a = {0.5, 0.25}, b = {1.0, 2.0}, h(2);
  kernels::affine_scan_blocked(a.data(), b.data(), 1, 2, h.data());
  CHECK(h[0] == doctest::Approx(1.0));
  CHECK(h[1] == doctest::Approx(2.0));
  kernels::affine_scan_blocked(nullptr, nullptr, 0, 2, nullptr);  // no-op
}

TEST_CASE("contractive dynamics keep the state bounded") {
  Rng rng(12);
  const std::size_t T = 10000, K = 4;
  std::vector<Real> a(T * K), b(T * K), h(T * K);
  Real bmax = 0;
  for (auto& v : a) v = rng.uniform(0.0, 0.98);
  for (auto& v : b) {
    v = rng.uniform(-2.0, 2.0);
    bmax = std::max(bmax, std::fabs(v));
  }
  kernels::affine_scan_blocked(a.data(), b.data(), T, K, h.data());
  const Real bound = bmax / (1.0 - 0.98) + 1.0;
  for (Real v : h) {
    CHECK(std::isfinite(v));
    CHECK(std::fabs(v) <= bound);
  }
}
