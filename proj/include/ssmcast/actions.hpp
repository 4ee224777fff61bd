#pragma once

#include <cstdint>
#include <tuple>
#include <vector>

namespace ssmcast {

// One forecast slot: a verb acting on a noun.
struct SlotPair {
  std::uint32_t verb = 0;
  std::uint32_t noun = 0;

  friend bool operator==(const SlotPair& a, const SlotPair& b) {
    return a.verb == b.verb && a.noun == b.noun;
  }
  friend bool operator!=(const SlotPair& a, const SlotPair& b) {
    return !(a == b);
  }
  friend bool operator<(const SlotPair& a, const SlotPair& b) {
    return std::tie(a.verb, a.noun) < std::tie(b.verb, b.noun);
  }
};

using ActionSequence = std::vector<SlotPair>;

}  // namespace ssmcast
