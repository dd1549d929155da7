#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "probcer/event.hpp"
#include "probcer/pattern.hpp"
#include "probcer/prob.hpp"

namespace probcer {

inline constexpr std::uint64_t kOracleSpaceCap = std::uint64_t{1} << 22;

struct OracleConfig {
  ProbModelConfig model;
  std::uint64_t space_cap = kOracleSpaceCap;
};

/// Identity of one match across histories: rule, selected event ids (sorted),
/// head alternative and produced instance.
struct MatchKey {
  std::size_t rule = 0;
  std::vector<std::string> event_ids;
  int head = 0;
  InstanceKey instance;

  friend bool operator<(const MatchKey& a, const MatchKey& b) {
    return std::tie(a.rule, a.event_ids, a.head, a.instance) < std::tie(b.rule, b.event_ids, b.head, b.instance);
  }
};

struct OracleResult {
  std::uint64_t histories = 0;
  /// P(instance recognized) for every instance recognized in some history.
  std::map<InstanceKey, double> marginals;
  /// Per match: P(the selected alternatives occur, negations hold) times its
  /// head probability. Summed over equal keys from different or-paths.
  std::map<MatchKey, double> match_probs;
};

/// Exhaustive possible-worlds evaluation. Each history is scored by the
/// naive evaluator; rule and head probabilities act as one independent
/// choice per grounding. Throws SPACE_TOO_LARGE above `space_cap`.
OracleResult run_oracle(const RuleSet& rules, const std::vector<ProbEvent>& events, const OracleConfig& config);

/// Marginal of one instance. Throws NO_SUCH_CE if no rule defines its type.
double oracle_marginal(const RuleSet& rules, const std::vector<ProbEvent>& events, const InstanceKey& query,
                       const OracleConfig& config);

MatchKey match_key(std::size_t rule, std::vector<std::string> event_ids, int head, const InstanceKey& instance);

}  // namespace probcer
