#include "probcer/oracle.hpp"

#include <algorithm>
#include <functional>
#include <set>

#include "probcer/error.hpp"
#include "probcer/plan.hpp"
#include "probcer/semantics.hpp"

namespace probcer {

MatchKey match_key(std::size_t rule, std::vector<std::string> event_ids, int head, const InstanceKey& instance) {
  std::sort(event_ids.begin(), event_ids.end());
  return MatchKey{rule, std::move(event_ids), head, instance};
}

namespace {

struct Grounding {
  std::vector<const NaiveMatch*> heads;  // one per recognized head alternative
  std::vector<double> coin;               // probability of each alternative of the rule
};

class Oracle {
 public:
  Oracle(const RuleSet& rules, const std::vector<ProbEvent>& events, const OracleConfig& config)
      : rules_(rules), events_(events), config_(config), level_(type_levels(rules)) {
    for (const auto& [t, l] : level_) max_level_ = std::max(max_level_, l);
    for (const auto& r : rules_.rules) {
      for (const auto& d : rules_.dependencies.at(r.head_type)) {
        if (rules_.defines(d)) referenced_.insert(d);
      }
    }
    for (const auto& e : events_) input_ts_.push_back(e.ts);
    std::sort(input_ts_.begin(), input_ts_.end());
    if (config_.model.kind == ProbModelConfig::Kind::markov) markov_parents();
  }

  OracleResult run() {
    const std::uint64_t size = history_space_size(events_);
    if (size > config_.space_cap) {
      throw Error(Errc::space_too_large, std::to_string(size) + " histories exceed the oracle cap of " +
                                             std::to_string(config_.space_cap));
    }
    result_.histories = size;
    for_each_history(events_, [&](const std::vector<int>& choices) {
      double w = weight(choices);
      if (w == 0.0) return;
      CrispView view = crisp_history(events_, choices);
      std::vector<bool> sde(view.events.size(), true);
      evaluate(0, view.events, sde, w);
    });
    return std::move(result_);
  }

 private:
  void markov_parents() {
    const CPT& cpt = config_.model.cpt;
    parent_.assign(events_.size(), -1);
    std::map<std::string, int> last;
    std::set<std::string> preds;
    for (const auto& [k, v] : cpt.entries) preds.insert(k.first);
    for (std::size_t i = 0; i < events_.size(); ++i) {
      int best = -1;
      for (const auto& p : cpt.predecessors(events_[i].type)) {
        auto it = last.find(p);
        if (it != last.end() && it->second > best) best = it->second;
      }
      parent_[i] = best;
      if (preds.count(events_[i].type)) last[events_[i].type] = static_cast<int>(i);
    }
  }

  double weight(const std::vector<int>& choices) const {
    double w = 1.0;
    for (std::size_t i = 0; i < events_.size() && w > 0.0; ++i) {
      const ProbEvent& e = events_[i];
      const double mass = e.occurrence_mass();
      double occ = mass;
      if (!parent_.empty() && parent_[i] >= 0 && choices[static_cast<std::size_t>(parent_[i])] != kNonOccurrence) {
        occ = config_.model.cpt.lookup(events_[static_cast<std::size_t>(parent_[i])].type, e.type).value_or(mass);
      }
      if (choices[i] == kNonOccurrence) {
        w *= std::max(0.0, 1.0 - occ);
      } else {
        double p = e.alternatives[static_cast<std::size_t>(choices[i])].prob;
        w *= mass > 0.0 ? occ * p / mass : 0.0;
      }
    }
    return w;
  }

  double decay() const { return config_.model.decay.value_or(1.0); }

  std::vector<double> coins(const Rule& r, const NaiveMatch& m, const std::vector<ProbEvent>& input,
                            const std::vector<bool>& sde) const {
    int k = 0;
    if (decay() < 1.0) {
      Timestamp first = input[m.events.front()].ts;
      Timestamp last = first;
      for (auto i : m.events) {
        first = std::min(first, input[i].ts);
        last = std::max(last, input[i].ts);
      }
      int inside = 0;
      for (auto i : m.events) inside += sde[i] && input[i].ts > first && input[i].ts < last;
      k = intervening_count(input_ts_, first, last, inside);
    }
    std::vector<double> out;
    for (const auto& h : r.effective_heads()) out.push_back(apply_decay(apply_rule_prob(r.rule_prob, h.prob), k, decay()));
    return out;
  }

  void evaluate(int level, const std::vector<ProbEvent>& input, const std::vector<bool>& sde, double w) {
    if (level > max_level_) return;
    std::vector<NaiveMatch> matches;
    for (std::size_t r = 0; r < rules_.rules.size(); ++r) {
      if (level_.at(rules_.rules[r].head_type) != level) continue;
      auto ms = naive_rule_matches(rules_.rules[r], r, input);
      std::move(ms.begin(), ms.end(), std::back_inserter(matches));
    }
    std::map<std::string, Grounding> groundings;
    for (const auto& m : matches) {
      auto& g = groundings[m.grounding(input)];
      if (g.heads.empty()) g.coin = coins(rules_.rules[m.rule], m, input, sde);
      g.heads.push_back(&m);
      std::vector<std::string> ids;
      for (auto i : m.events) ids.push_back(input[i].id);
      result_.match_probs[match_key(m.rule, ids, m.head, m.key)] += w * g.coin[static_cast<std::size_t>(m.head)];
    }

    // instances nobody reads: closed form over independent coins
    std::map<InstanceKey, double> none_prob;
    std::vector<const Grounding*> enumerated;
    for (const auto& [id, g] : groundings) {
      const std::string& type = rules_.rules[g.heads.front()->rule].head_type;
      if (referenced_.count(type)) {
        enumerated.push_back(&g);
        continue;
      }
      std::map<InstanceKey, double> hit;
      for (const auto* m : g.heads) hit[m->key] += g.coin[static_cast<std::size_t>(m->head)];
      for (const auto& [key, p] : hit) {
        auto [it, fresh] = none_prob.emplace(key, 1.0);
        it->second *= std::max(0.0, 1.0 - p);
      }
    }
    for (const auto& [key, q] : none_prob) result_.marginals[key] += w * (1.0 - q);

    if (enumerated.empty()) {
      evaluate(level + 1, input, sde, w);
      return;
    }
    std::set<InstanceKey> produced;
    std::map<InstanceKey, int> counts;
    std::function<void(std::size_t, double)> choose = [&](std::size_t i, double p) {
      if (p == 0.0) return;
      if (i == enumerated.size()) {
        std::set<InstanceKey> keys;
        for (const auto& [k, n] : counts) {
          if (n > 0) keys.insert(k);
        }
        for (const auto& k : keys) result_.marginals[k] += w * p;
        std::vector<ProbEvent> next = input;
        std::vector<bool> next_sde = sde;
        for (const auto& k : keys) {
          next.push_back(instance_event(k, 1.0));
          next_sde.push_back(false);
        }
        std::vector<std::size_t> idx(next.size());
        for (std::size_t j = 0; j < idx.size(); ++j) idx[j] = j;
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return next[a].ts < next[b].ts; });
        std::vector<ProbEvent> sorted;
        std::vector<bool> sorted_sde;
        for (auto j : idx) {
          sorted.push_back(next[j]);
          sorted_sde.push_back(next_sde[j]);
        }
        evaluate(level + 1, sorted, sorted_sde, w * p);
        return;
      }
      const Grounding& g = *enumerated[i];
      double rest = 1.0;
      for (std::size_t h = 0; h < g.coin.size(); ++h) {
        rest -= g.coin[h];
        std::vector<const NaiveMatch*> picked;
        for (const auto* m : g.heads) {
          if (m->head == static_cast<int>(h)) picked.push_back(m);
        }
        for (const auto* m : picked) ++counts[m->key];
        choose(i + 1, p * g.coin[h]);
        for (const auto* m : picked) --counts[m->key];
      }
      choose(i + 1, p * std::max(0.0, rest));
    };
    choose(0, 1.0);
  }

  const RuleSet& rules_;
  const std::vector<ProbEvent>& events_;
  const OracleConfig& config_;
  std::map<std::string, int> level_;
  int max_level_ = -1;
  std::set<std::string> referenced_;
  std::vector<Timestamp> input_ts_;
  std::vector<int> parent_;
  OracleResult result_;
};

}  // namespace

OracleResult run_oracle(const RuleSet& rules, const std::vector<ProbEvent>& events, const OracleConfig& config) {
  return Oracle(rules, events, config).run();
}

double oracle_marginal(const RuleSet& rules, const std::vector<ProbEvent>& events, const InstanceKey& query,
                       const OracleConfig& config) {
  if (!rules.defines(query.ce_type)) throw Error(Errc::no_such_ce, "no rule defines " + query.ce_type);
  auto res = run_oracle(rules, events, config);
  auto it = res.marginals.find(query);
  return it == res.marginals.end() ? 0.0 : it->second;
}

}  // namespace probcer
