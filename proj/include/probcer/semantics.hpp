#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "probcer/event.hpp"
#include "probcer/pattern.hpp"

namespace probcer {

/// One solution of a rule body over a crisp event list, as computed by
/// direct recursive evaluation of the expression tree.
struct NaiveMatch {
  std::size_t rule = 0;
  int head = 0;
  /// Chosen alternative of every '|' node on the solution path: (node id, child).
  std::vector<std::pair<int, int>> or_path;
  /// (atom node id, event index), sorted.
  std::vector<std::pair<int, std::size_t>> assignment;
  std::vector<std::size_t> events;  // selected event indices into the rule's input, ascending
  std::vector<std::string> event_ids;
  std::map<std::string, AttrValue> bindings;
  InstanceKey key;

  /// Identity of the grounding, stable across histories of one stream.
  std::string grounding(const std::vector<ProbEvent>& events) const;
};

/// Evaluates one rule over `events` (each with exactly one alternative, in
/// arrival order). Negations are checked against the same list.
std::vector<NaiveMatch> naive_rule_matches(const Rule& rule, std::size_t rule_index,
                                           const std::vector<ProbEvent>& events);

/// Evaluates a whole rule set level by level, feeding every recognized CE
/// instance (as a certain event) to the rules above it.
std::vector<NaiveMatch> naive_recognize(const RuleSet& rules, const std::vector<ProbEvent>& events);

/// Turns a CE instance into an input event for higher levels.
ProbEvent instance_event(const InstanceKey& key, double prob);

/// Penalty-decay exponent: input events with first < ts < last that are not
/// part of the selection (`selected_inside` of them are).
int intervening_count(const std::vector<Timestamp>& input_ts_sorted, Timestamp first, Timestamp last,
                      int selected_inside);

}  // namespace probcer
