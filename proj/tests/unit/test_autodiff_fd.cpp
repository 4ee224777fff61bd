#include <string>

#include "doctest.h"
#include "support/op_fd_suite.hpp"

// Every differentiable op against central finite differences. The acceptance
// suite reruns these scenarios with more instances; here a handful per op
// keeps the unit run fast.

TEST_CASE("all ops match finite differences") {
  ssmcast::Rng rng(2024);
  for (auto& c : fdtest::op_fd_cases()) {
    double worst = 0;
    for (int rep = 0; rep < 5; ++rep) {
      auto res = c.run(rng);
      worst = std::max(worst, res.max_err);
    }
    INFO("op: " << c.name << " max rel err " << worst);
    CHECK(worst < 1e-4);
  }
}
