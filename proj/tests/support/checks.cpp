#include "checks.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "probcer/error.hpp"
#include "probcer/oracle.hpp"
#include "probcer/plan.hpp"
#include "probcer/runtime.hpp"
#include "probcer/semantics.hpp"
#include "random_cases.hpp"

namespace probcer::testing {

namespace {

using MatchMultiset = std::map<std::tuple<std::size_t, std::vector<std::string>, int, InstanceKey>, int>;

MatchMultiset naive_multiset(const Case& c) {
  MatchMultiset out;
  for (const auto& m : naive_recognize(c.rules, c.events)) {
    auto ids = m.event_ids;
    std::sort(ids.begin(), ids.end());
    ++out[{m.rule, ids, m.head, m.key}];
  }
  return out;
}

MatchMultiset engine_multiset(const Case& c, const CompileOptions& options) {
  MatchMultiset out;
  for (const auto& m : recognize(c.rules, c.events, {}, options).matches) {
    std::vector<std::string> ids;
    for (const auto& e : m.events) ids.push_back(e.id);
    std::sort(ids.begin(), ids.end());
    ++out[{m.rule, ids, m.head, InstanceKey{m.ce.ce_type, m.ce.attrs, m.ce.ts}}];
  }
  return out;
}

void fail(CheckSummary& s, const Case& c, const std::string& what) {
  if (s.failures++ == 0) s.first_failure = what + "\n" + describe(c);
}

void compare(CheckSummary& s, const Case& c, const std::map<MatchKey, double>& engine,
             const std::map<MatchKey, double>& oracle) {
  int missing = 0;
  double d = max_diff(engine, oracle, &missing);
  s.max_error = std::max(s.max_error, d);
  if (!oracle.empty()) ++s.nonempty;
  if (d >= 1e-9 || missing > 0) fail(s, c, "difference " + std::to_string(d) + ", unmatched " + std::to_string(missing));
}

void compare(CheckSummary& s, const Case& c, const std::map<InstanceKey, double>& engine,
             const std::map<InstanceKey, double>& oracle) {
  int missing = 0;
  double d = max_diff(engine, oracle, &missing);
  s.max_error = std::max(s.max_error, d);
  if (!oracle.empty()) ++s.nonempty;
  if (d >= 1e-9 || missing > 0) fail(s, c, "difference " + std::to_string(d) + ", unmatched " + std::to_string(missing));
}

std::map<InstanceKey, double> engine_marginals(const Case& c, EngineConfig cfg) {
  cfg.instance_marginals = true;
  return keyed_instances(recognize(c.rules, c.events, cfg).instances);
}

}  // namespace

CheckSummary crisp_equivalence(std::uint64_t seed, int cases) {
  CaseGenerator gen(seed);
  CaseOptions opt;
  opt.crisp = true;
  CheckSummary s;
  for (int i = 0; i < cases; ++i, ++s.cases) {
    opt.kleene = i % 3 == 0;
    opt.types = opt.kleene ? std::vector<std::string>{"a", "b", "c"} : std::vector<std::string>{"a", "b", "c", "d"};
    Case c = gen.single_level(opt);
    auto expected = naive_multiset(c);
    if (!expected.empty()) ++s.nonempty;
    if (engine_multiset(c, {}) != expected) {
      fail(s, c, "match sets differ");
      continue;
    }
    CompileOptions late;
    late.all_late = true;
    if (engine_multiset(c, late) != expected) fail(s, c, "match sets differ with late predicates");
  }
  return s;
}

CheckSummary crisp_hierarchy_equivalence(std::uint64_t seed, int cases) {
  CaseGenerator gen(seed);
  CheckSummary s;
  for (int i = 0; i < cases; ++i, ++s.cases) {
    Case c = gen.hierarchy(10);
    for (auto& e : c.events) {
      e.alternatives.resize(1);
      e.alternatives[0].prob = 1.0;
    }
    auto expected = naive_multiset(c);
    if (!expected.empty()) ++s.nonempty;
    if (engine_multiset(c, {}) != expected) fail(s, c, "match sets differ");
  }
  return s;
}

CheckSummary marginal_equivalence(std::uint64_t seed, int cases) {
  CaseGenerator gen(seed);
  CaseOptions opt;
  CheckSummary s;
  for (int i = 0; i < cases; ++i, ++s.cases) {
    Case c = gen.single_level(opt);
    compare(s, c, engine_marginals(c, {}), run_oracle(c.rules, c.events, {}).marginals);
  }
  return s;
}

CheckSummary kleene_equivalence(std::uint64_t seed, int cases) {
  CaseGenerator gen(seed);
  CaseOptions opt;
  opt.kleene = true;
  opt.max_events = 8;
  opt.min_events = 5;
  opt.max_depth = 2;
  opt.types = {"a", "b", "c"};
  CheckSummary s;
  for (int i = 0; i < cases; ++i, ++s.cases) {
    Case c = gen.single_level(opt);
    compare(s, c, keyed_matches(recognize(c.rules, c.events, {}).matches),
            run_oracle(c.rules, c.events, {}).match_probs);
  }
  return s;
}

CheckSummary model_equivalence(std::uint64_t seed, int cases) {
  CaseGenerator gen(seed);
  CaseOptions opt;
  opt.max_events = 9;
  CheckSummary s;
  for (int i = 0; i < cases; ++i, ++s.cases) {
    Case c = gen.single_level(opt);
    EngineConfig cfg;
    if (i % 2 == 0) {
      cfg.model.decay = 0.8;
    } else {
      cfg.model.kind = ProbModelConfig::Kind::markov;
      cfg.model.cpt.entries[{"a", "b"}] = 0.9;
      cfg.model.cpt.entries[{"b", "c"}] = 0.3;
      cfg.model.cpt.entries[{"c", "a"}] = 0.6;
    }
    OracleConfig oc;
    oc.model = cfg.model;
    compare(s, c, engine_marginals(c, cfg), run_oracle(c.rules, c.events, oc).marginals);
  }
  return s;
}

CheckSummary hierarchy_equivalence(std::uint64_t seed, int cases, bool approx) {
  CaseGenerator gen(seed);
  CheckSummary s;
  for (int i = 0; i < cases; ++i, ++s.cases) {
    Case c = gen.hierarchy(9);
    EngineConfig cfg;
    cfg.approx_hierarchy = approx;
    auto oracle = run_oracle(c.rules, c.events, {}).marginals;
    auto engine = engine_marginals(c, cfg);
    if (!approx) {
      compare(s, c, engine, oracle);
      continue;
    }
    if (!oracle.empty()) ++s.nonempty;
    s.max_error = std::max(s.max_error, max_diff(engine, oracle));
  }
  return s;
}

CheckSummary pruning_soundness(std::uint64_t seed, int cases, const std::vector<double>& epsilons) {
  CaseGenerator gen(seed);
  CaseOptions opt;
  opt.max_events = 12;
  opt.min_events = 6;
  CheckSummary s;
  using Entry = std::pair<MatchKey, double>;
  auto filtered = [](const std::vector<Match>& matches, double eps) {
    std::vector<Entry> out;
    for (const auto& m : matches) {
      if (m.prob < eps) continue;
      std::vector<std::string> ids;
      for (const auto& e : m.events) ids.push_back(e.id);
      out.emplace_back(match_key(m.rule, ids, m.head, InstanceKey{m.ce.ce_type, m.ce.attrs, m.ce.ts}), m.prob);
    }
    std::sort(out.begin(), out.end());
    return out;
  };
  for (int i = 0; i < cases; ++i, ++s.cases) {
    opt.kleene = i % 2 == 1;
    opt.types = opt.kleene ? std::vector<std::string>{"a", "b", "c"} : std::vector<std::string>{"a", "b", "c", "d"};
    Case c = gen.single_level(opt);
    auto full = recognize(c.rules, c.events, {}).matches;
    bool counted = false;
    for (double eps : epsilons) {
      EngineConfig cfg;
      cfg.prune_threshold = eps;
      auto expected = filtered(full, eps);
      auto pruned = filtered(recognize(c.rules, c.events, cfg).matches, eps);
      if (!expected.empty() && !counted) {
        ++s.nonempty;
        counted = true;
      }
      bool same = expected.size() == pruned.size();
      for (std::size_t k = 0; same && k < expected.size(); ++k) {
        same = !(expected[k].first < pruned[k].first) && !(pruned[k].first < expected[k].first) &&
               std::abs(expected[k].second - pruned[k].second) < 1e-12;
      }
      if (!same) {
        fail(s, c, "pruned output differs at epsilon " + std::to_string(eps));
        break;
      }
    }
  }
  return s;
}

}  // namespace probcer::testing
