#pragma once

#include <optional>
#include <string>
#include <vector>

#include "probcer/lineage.hpp"
#include "probcer/match.hpp"

namespace probcer {

struct ProbModelConfig {
  enum class Kind { independent, markov };

  Kind kind = Kind::independent;
  CPT cpt;
  std::optional<double> decay;
  /// Running match probabilities never increase as a run grows.
  bool monotone = true;
  /// Gap negation as a hard filter over the most likely world instead of a factor.
  bool hard_negation = false;
};

/// Product of the chosen alternative probabilities times negation factors.
double match_prob_independent(const Match& m);

/// First event contributes its probability; each later event contributes
/// the CPT entry for the adjacent type pair (scaled to its alternative) or
/// its own probability. Times negation factors.
double match_prob_markov(const Match& m, const CPT& cpt);

/// p * decay^intervening
double apply_decay(double p, int intervening, double decay);

double apply_rule_prob(double rule_prob, double match_prob);

/// 1 - prod(1 - p_i)
double combine_noisy_or(const std::vector<double>& probs);

/// Most probable match; ties go to the earliest last event, then to the
/// lexicographically smallest id list. Throws EMPTY_MATCH_SET.
const Match& map_query(const std::vector<Match>& matches);

/// Reads `{"shooting->ballInNet": 0.95}`.
CPT parse_cpt(const std::string& json_text);

}  // namespace probcer
