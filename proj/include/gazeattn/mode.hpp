#pragma once

#include <array>
#include <string>
#include <string_view>

#include "gazeattn/error.hpp"

namespace gazeattn {

/// Robot behaviour modes, ordered by increasing attention awareness.
enum class BehaviorMode { Manual, Slave, Autonomous, Cooperative };

inline constexpr std::array<BehaviorMode, 4> kAllModes = {
    BehaviorMode::Manual, BehaviorMode::Slave, BehaviorMode::Autonomous,
    BehaviorMode::Cooperative};

inline std::string_view to_string(BehaviorMode mode) {
  switch (mode) {
    case BehaviorMode::Manual: return "manual";
    case BehaviorMode::Slave: return "slave";
    case BehaviorMode::Autonomous: return "autonomous";
    case BehaviorMode::Cooperative: return "cooperative";
  }
  return "manual";
}

inline BehaviorMode parse_mode(std::string_view s) {
  for (BehaviorMode m : kAllModes) {
    if (to_string(m) == s) return m;
  }
  throw Error(ErrorKind::ConfigInvalid, "unknown behaviour mode '" + std::string(s) + "'");
}

}  // namespace gazeattn
