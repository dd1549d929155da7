#include "probcer/prob.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "probcer/error.hpp"

namespace probcer {

double match_prob_independent(const Match& m) {
  double p = 1.0;
  for (const auto& e : m.events) p *= e.prob;
  return p * m.negation_factor;
}

double match_prob_markov(const Match& m, const CPT& cpt) {
  double p = 1.0;
  for (std::size_t i = 0; i < m.events.size(); ++i) {
    const auto& e = m.events[i];
    if (i == 0) {
      p *= e.prob;
      continue;
    }
    auto c = cpt.lookup(m.events[i - 1].type, e.type);
    if (!c) {
      p *= e.prob;
    } else if (e.prob == e.mass) {
      p *= *c;
    } else {
      p *= *c * (e.prob / e.mass);
    }
  }
  return p * m.negation_factor;
}

double apply_decay(double p, int intervening, double decay) {
  if (intervening <= 0 || decay == 1.0) return p;
  return p * std::pow(decay, intervening);
}

double apply_rule_prob(double rule_prob, double match_prob) { return rule_prob * match_prob; }

double combine_noisy_or(const std::vector<double>& probs) {
  double none = 1.0;
  for (double p : probs) none *= 1.0 - p;
  return 1.0 - none;
}

const Match& map_query(const std::vector<Match>& matches) {
  if (matches.empty()) throw Error(Errc::empty_match_set, "no match to choose from");
  auto ids = [](const Match& m) {
    std::vector<std::string> out;
    for (const auto& e : m.events) out.push_back(e.id);
    return out;
  };
  const Match* best = &matches.front();
  for (const auto& m : matches) {
    if (m.prob > best->prob) {
      best = &m;
      continue;
    }
    if (m.prob < best->prob) continue;
    Timestamp a = m.events.empty() ? 0 : m.events.back().ts;
    Timestamp b = best->events.empty() ? 0 : best->events.back().ts;
    if (a < b || (a == b && ids(m) < ids(*best))) best = &m;
  }
  return *best;
}

CPT parse_cpt(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::config_error, std::string("CPT file: ") + e.what());
  }
  if (!j.is_object()) throw Error(Errc::config_error, "CPT file must hold a JSON object");
  CPT cpt;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    auto arrow = key.find("->");
    if (arrow == std::string::npos || arrow == 0 || arrow + 2 >= key.size()) {
      throw Error(Errc::config_error, "CPT key must look like \"prev->next\": " + key);
    }
    if (!it.value().is_number()) throw Error(Errc::config_error, "CPT value for " + key + " is not a number");
    double p = it.value().get<double>();
    if (!(p >= 0.0 && p <= 1.0)) throw Error(Errc::config_error, "CPT value for " + key + " outside [0,1]");
    cpt.entries[{key.substr(0, arrow), key.substr(arrow + 2)}] = p;
  }
  return cpt;
}

}  // namespace probcer
