#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "probcer/event.hpp"
#include "probcer/oracle.hpp"
#include "probcer/pattern.hpp"
#include "probcer/runtime.hpp"

namespace probcer::testing {

struct CaseOptions {
  int max_events = 12;
  int min_events = 1;
  int max_depth = 3;
  bool kleene = false;
  bool negation = true;
  bool crisp = false;
  bool rule_probs = true;
  std::vector<std::string> types = {"a", "b", "c", "d"};
};

struct Case {
  std::string rules_text;
  RuleSet rules;
  std::vector<ProbEvent> events;
};

class CaseGenerator {
 public:
  explicit CaseGenerator(std::uint64_t seed) : rng_(seed) {}

  /// One compilable single-level rule set (1-2 rules) and a stream.
  Case single_level(const CaseOptions& opt);
  /// Three levels of CE types over SDEs a-d; streams of at most `max_events`.
  Case hierarchy(int max_events);
  std::vector<ProbEvent> stream(const CaseOptions& opt, int n);

  std::mt19937_64& rng() { return rng_; }
  int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool coin(double p) { return std::bernoulli_distribution(p)(rng_); }

 private:
  std::string body(const CaseOptions& opt, int depth, std::vector<std::string>& times, bool& used_star);
  std::string atom(const CaseOptions& opt, std::vector<std::string>& times);
  std::string prob_prefix();

  std::mt19937_64 rng_;
  int next_var_ = 0;
};

/// Per-match results keyed like the oracle, probabilities summed.
std::map<MatchKey, double> keyed_matches(const std::vector<Match>& matches);
/// Instance marginals from an engine run in marginal mode.
std::map<InstanceKey, double> keyed_instances(const std::vector<CEInstance>& instances);

/// Largest absolute difference over the union of keys; keys below 1e-12 on
/// both sides are ignored. `missing` counts keys present on one side only
/// with a value of at least 1e-12.
template <class K>
double max_diff(const std::map<K, double>& a, const std::map<K, double>& b, int* missing = nullptr) {
  double d = 0.0;
  int miss = 0;
  auto probe = [&](const std::map<K, double>& x, const std::map<K, double>& y) {
    for (const auto& [k, v] : x) {
      auto it = y.find(k);
      double w = it == y.end() ? 0.0 : it->second;
      if (it == y.end() && v >= 1e-12) ++miss;
      d = std::max(d, std::abs(v - w));
    }
  };
  probe(a, b);
  probe(b, a);
  if (missing) *missing = miss;
  return d;
}

std::string describe(const Case& c);

}  // namespace probcer::testing
