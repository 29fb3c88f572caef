#pragma once

#include <cstdint>
#include <stdexcept>

namespace permideal {

// Finite evaluation domain [0, bound). Results derived from points in
// [0, bound - margin) that never consulted anything >= bound are certified;
// everything else is reported but excluded from property assertions.
struct Window {
  std::uint64_t bound = 0;
  std::uint64_t margin = 0;

  Window() = default;
  Window(std::uint64_t bound_, std::uint64_t margin_ = 0)
      : bound(bound_), margin(margin_) {
    if (bound == 0 || margin >= bound)
      throw std::invalid_argument("Window: need bound > margin >= 0");
  }

  std::uint64_t interior() const { return bound - margin; }
  bool operator==(const Window&) const = default;
};

}  // namespace permideal
