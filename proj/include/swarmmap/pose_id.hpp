#pragma once

#include <compare>
#include <cstdint>

namespace swarmmap {

// Globally unique pose identifier: 4-bit drone address space (0xF is the
// broadcast address and never a drone) plus a 24-bit per-drone index.
struct PoseId {
  uint8_t drone = 0;
  uint32_t index = 0;

  auto operator<=>(const PoseId&) const = default;

  uint32_t packed() const { return uint32_t(drone) | (index << 8); }
  static PoseId from_packed(uint32_t v) {
    return {uint8_t(v & 0xFF), v >> 8};
  }
};

}  // namespace swarmmap
