#pragma once

#include <cmath>

#include "ssmcast/tensor.hpp"

namespace ssmcast {

// Zero-order-hold input gain phi(z) = (e^z - 1) / z, so that for a diagonal
// system discretized with step delta: a_bar = e^(delta a) and
// b_bar = phi(delta a) * delta * b. Below 1e-8 the two-term series is exact
// to machine precision and avoids the 0/0 at z = 0.
inline Real zoh_phi(Real z) {
  if (std::fabs(z) < Real(1e-8)) return Real(1) + Real(0.5) * z;
  return std::expm1(z) / z;
}

// d/dz phi(z) = (e^z (z - 1) + 1) / z^2. The closed form cancels
// catastrophically near zero, so a three-term series takes over there.
inline Real zoh_phi_prime(Real z) {
  if (std::fabs(z) < Real(1e-4))
    return Real(0.5) + z / Real(3) + z * z / Real(8);
  return (std::exp(z) * (z - Real(1)) + Real(1)) / (z * z);
}

}  // namespace ssmcast
