#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace probcer::testing {

struct CheckSummary {
  int cases = 0;
  int failures = 0;
  int nonempty = 0;  // cases that produced at least one match or instance
  double max_error = 0.0;
  std::string first_failure;

  bool ok() const { return cases > 0 && failures == 0; }
};

/// Automaton match multisets against the direct evaluator on crisp streams.
/// Every third case carries an iteration.
CheckSummary crisp_equivalence(std::uint64_t seed, int cases);
/// Same over three-level hierarchies with crisp streams.
CheckSummary crisp_hierarchy_equivalence(std::uint64_t seed, int cases);

/// Instance marginals (no iteration, streams of at most 12 events).
CheckSummary marginal_equivalence(std::uint64_t seed, int cases);
/// Per-match probabilities of rules with iteration, streams of at most 8 events.
CheckSummary kleene_equivalence(std::uint64_t seed, int cases);
/// Instance marginals under decay (even cases) and a Markov CPT (odd cases).
CheckSummary model_equivalence(std::uint64_t seed, int cases);

/// Hierarchy instance marginals against enumeration. With `approx` the
/// summary reports the deviation instead of counting it as a failure.
CheckSummary hierarchy_equivalence(std::uint64_t seed, int cases, bool approx);

/// Output of a pruned run equals the unpruned output filtered by prob >= eps.
CheckSummary pruning_soundness(std::uint64_t seed, int cases, const std::vector<double>& epsilons);

}  // namespace probcer::testing
