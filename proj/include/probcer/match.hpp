#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "probcer/event.hpp"
#include "probcer/lineage.hpp"

namespace probcer {

struct SelectedEvent {
  std::string id;
  std::string type;
  Timestamp ts = 0;
  int alt = 0;
  double prob = 1.0;  // chosen alternative (a promoted CE carries its marginal)
  double mass = 1.0;  // occurrence mass of the whole event
  std::uint64_t seq = 0;
  bool complex = false;
};

/// One recognized pattern instance together with the CE it produces.
struct Match {
  std::size_t plan = 0;
  std::size_t rule = 0;
  int branch = 0;
  int head = 0;
  std::vector<SelectedEvent> events;  // arrival order
  /// Product of (1 - P(violating alternatives)) over negation candidates.
  double negation_factor = 1.0;
  double rule_prob = 1.0;
  double head_prob = 1.0;
  int intervening = 0;
  CEInstance ce;
  Lineage lineage;
  double prob = 0.0;
};

}  // namespace probcer
