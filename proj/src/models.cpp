#include "sea/models.hpp"

namespace sea {

std::string_view gate_policy_name(GatePolicy p) {
  switch (p) {
    case GatePolicy::learned: return "learned";
    case GatePolicy::always_on: return "on";
    case GatePolicy::always_off: return "off";
    case GatePolicy::random: return "random";
  }
  return "unknown";
}

GatePolicy parse_gate_policy(std::string_view s) {
  if (s == "learned") return GatePolicy::learned;
  if (s == "on") return GatePolicy::always_on;
  if (s == "off") return GatePolicy::always_off;
  if (s == "random") return GatePolicy::random;
  throw std::invalid_argument("unknown gate policy '" + std::string(s) +
                              "' (expected learned, on, off or random)");
}

}  // namespace sea
