#include "probcer/lineage.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "probcer/error.hpp"

namespace probcer {

std::optional<Conjunct> normalize(Conjunct c) {
  std::sort(c.begin(), c.end());
  c.erase(std::unique(c.begin(), c.end()), c.end());
  Conjunct out;
  std::size_t i = 0;
  while (i < c.size()) {
    std::size_t j = i;
    while (j < c.size() && c[j].var == c[i].var) ++j;
    std::optional<int> pos;
    for (std::size_t k = i; k < j; ++k) {
      if (!c[k].positive) continue;
      if (pos && *pos != c[k].alt) return std::nullopt;
      pos = c[k].alt;
    }
    if (pos) {
      for (std::size_t k = i; k < j; ++k) {
        if (!c[k].positive && c[k].alt == *pos) return std::nullopt;
      }
      out.push_back({c[i].var, *pos, true});
    } else {
      out.insert(out.end(), c.begin() + static_cast<std::ptrdiff_t>(i), c.begin() + static_cast<std::ptrdiff_t>(j));
    }
    i = j;
  }
  return out;
}

Lineage Lineage::of(Conjunct c) {
  Lineage l;
  l.add(std::move(c));
  return l;
}

void Lineage::add(Conjunct c) {
  if (auto n = normalize(std::move(c))) conjuncts.push_back(std::move(*n));
}

void Lineage::add(const Lineage& other) {
  conjuncts.insert(conjuncts.end(), other.conjuncts.begin(), other.conjuncts.end());
}

Lineage conjoin(const Lineage& a, const Lineage& b) {
  Lineage out;
  for (const auto& x : a.conjuncts) {
    for (const auto& y : b.conjuncts) {
      Conjunct c = x;
      c.insert(c.end(), y.begin(), y.end());
      out.add(std::move(c));
    }
  }
  return out;
}

std::set<int> variables(const Lineage& l) {
  std::set<int> out;
  for (const auto& c : l.conjuncts) {
    for (const auto& lit : c) out.insert(lit.var);
  }
  return out;
}

double Variable::mass() const { return std::accumulate(probs.begin(), probs.end(), 0.0); }

int VariableTable::add(Variable v) {
  vars_.push_back(std::move(v));
  return static_cast<int>(vars_.size()) - 1;
}

std::optional<double> CPT::lookup(const std::string& prev, const std::string& next) const {
  auto it = entries.find({prev, next});
  if (it == entries.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> CPT::predecessors(const std::string& next) const {
  std::vector<std::string> out;
  for (const auto& [k, v] : entries) {
    if (k.second == next) out.push_back(k.first);
  }
  return out;
}

double conjunct_prob(const Conjunct& c, const VariableTable& vars) {
  double p = 1.0;
  std::size_t i = 0;
  while (i < c.size()) {
    const Variable& v = vars[c[i].var];
    if (c[i].positive) {
      p *= v.probs[static_cast<std::size_t>(c[i].alt)];
      ++i;
      continue;
    }
    double excluded = 0.0;
    const int var = c[i].var;
    for (; i < c.size() && c[i].var == var; ++i) excluded += v.probs[static_cast<std::size_t>(c[i].alt)];
    p *= std::max(0.0, 1.0 - excluded);
  }
  return p;
}

namespace {

using DNF = std::vector<Conjunct>;

void canonicalize(DNF& f) {
  for (auto& c : f) std::sort(c.begin(), c.end());
  std::sort(f.begin(), f.end());
  f.erase(std::unique(f.begin(), f.end()), f.end());
  // absorption: drop conjuncts that contain another conjunct
  DNF kept;
  for (std::size_t i = 0; i < f.size(); ++i) {
    bool absorbed = false;
    for (std::size_t j = 0; j < f.size() && !absorbed; ++j) {
      if (i != j && f[j].size() < f[i].size() && std::includes(f[i].begin(), f[i].end(), f[j].begin(), f[j].end())) {
        absorbed = true;
      }
    }
    if (!absorbed) kept.push_back(f[i]);
  }
  f = std::move(kept);
}

bool has_empty(const DNF& f) {
  return std::any_of(f.begin(), f.end(), [](const Conjunct& c) { return c.empty(); });
}

/// Restricts f to `var` taking outcome `alt` (kNonOccurrence-like values
/// below -1 stand for "an alternative not mentioned in f").
DNF condition(const DNF& f, int var, int alt) {
  DNF out;
  for (const auto& c : f) {
    Conjunct r;
    bool dead = false;
    for (const auto& lit : c) {
      if (lit.var != var) {
        r.push_back(lit);
        continue;
      }
      bool holds = lit.positive ? lit.alt == alt : lit.alt != alt;
      if (!holds) {
        dead = true;
        break;
      }
    }
    if (!dead) out.push_back(std::move(r));
  }
  return out;
}

constexpr int kOtherOutcome = -2;

class IndependentSolver {
 public:
  explicit IndependentSolver(const VariableTable& vars) : vars_(vars) {}

  double solve(DNF f) {
    canonicalize(f);
    if (f.empty()) return 0.0;
    if (has_empty(f)) return 1.0;
    if (auto it = memo_.find(f); it != memo_.end()) return it->second;

    double result;
    auto comps = components(f);
    if (comps.size() > 1) {
      double none = 1.0;
      for (auto& comp : comps) none *= 1.0 - solve(std::move(comp));
      result = 1.0 - none;
    } else {
      result = expand(f);
    }
    memo_.emplace(std::move(f), result);
    return result;
  }

 private:
  std::vector<DNF> components(const DNF& f) {
    std::vector<int> parent(f.size());
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
    std::unordered_map<int, int> owner;
    for (std::size_t i = 0; i < f.size(); ++i) {
      for (const auto& lit : f[i]) {
        auto [it, fresh] = owner.emplace(lit.var, static_cast<int>(i));
        if (!fresh) parent[find(static_cast<int>(i))] = find(it->second);
      }
    }
    std::map<int, DNF> groups;
    for (std::size_t i = 0; i < f.size(); ++i) groups[find(static_cast<int>(i))].push_back(f[i]);
    std::vector<DNF> out;
    for (auto& [k, g] : groups) out.push_back(std::move(g));
    return out;
  }

  double expand(const DNF& f) {
    std::map<int, int> count;
    for (const auto& c : f) {
      for (const auto& lit : c) ++count[lit.var];
    }
    int var = std::max_element(count.begin(), count.end(), [](const auto& a, const auto& b) {
                return a.second < b.second;
              })->first;
    std::set<int> alts;
    for (const auto& c : f) {
      for (const auto& lit : c) {
        if (lit.var == var) alts.insert(lit.alt);
      }
    }
    const Variable& v = vars_[var];
    double total = 0.0;
    double rest = 1.0;
    for (int a : alts) {
      double p = v.probs[static_cast<std::size_t>(a)];
      rest -= p;
      if (p > 0.0) total += p * solve(condition(f, var, a));
    }
    if (rest > 0.0) total += rest * solve(condition(f, var, kOtherOutcome));
    return total;
  }

  const VariableTable& vars_;
  std::map<DNF, double> memo_;
};

/// Markov-chain expansion. Variables are processed in stream order over the
/// ancestor closure of the lineage; the topmost shared ancestor of every
/// chain enters with its forward marginal.
class MarkovSolver {
 public:
  MarkovSolver(const VariableTable& vars, const CPT& cpt, const std::set<int>& lineage_vars) : vars_(vars), cpt_(cpt) {
    build_closure(lineage_vars);
  }

  double solve(const DNF& f) {
    std::vector<int> state(order_.size(), -1);
    return step(0, f, state);
  }

 private:
  struct Node {
    int var = 0;
    int parent_pos = -1;       // position of the parent inside order_, -1 if none or cut
    std::vector<double> prior;  // outcome distribution when parent_pos == -1
    bool has_children = false;
  };

  double cond_factor(int var) const {
    const Variable& v = vars_[var];
    return cpt_.lookup(vars_[v.parent].type, v.type).value_or(v.mass());
  }

  // Per-alternative forward marginal of `var`.
  std::vector<double> forward(int var) {
    if (auto it = forward_.find(var); it != forward_.end()) return it->second;
    const Variable& v = vars_[var];
    std::vector<double> out = v.probs;
    if (v.parent >= 0 && !v.synthetic) {
      auto pp = forward(v.parent);
      double p_occ = std::accumulate(pp.begin(), pp.end(), 0.0);
      double mass = v.mass();
      double occ = p_occ * cond_factor(var) + (1.0 - p_occ) * mass;
      for (auto& x : out) x = mass > 0.0 ? occ * x / mass : 0.0;
    }
    forward_[var] = out;
    return out;
  }

  void build_closure(const std::set<int>& lineage_vars) {
    // paths to the root for every lineage variable
    std::map<int, std::vector<std::vector<int>>> by_root;
    for (int v : lineage_vars) {
      std::vector<int> path{v};
      while (!vars_[path.back()].synthetic && vars_[path.back()].parent >= 0) path.push_back(vars_[path.back()].parent);
      std::reverse(path.begin(), path.end());
      by_root[path.front()].push_back(std::move(path));
    }
    std::set<int> closure;
    std::set<int> cut_tops;
    for (auto& [root, paths] : by_root) {
      std::size_t common = 0;
      while (true) {
        bool same = std::all_of(paths.begin(), paths.end(), [&](const auto& p) {
          return common < p.size() && p[common] == paths.front()[common];
        });
        if (!same) break;
        ++common;
      }
      std::size_t top = common - 1;  // index of the lowest shared node
      cut_tops.insert(paths.front()[top]);
      for (const auto& p : paths) closure.insert(p.begin() + static_cast<std::ptrdiff_t>(top), p.end());
    }
    std::vector<int> sorted(closure.begin(), closure.end());
    std::sort(sorted.begin(), sorted.end(), [&](int a, int b) {
      if (vars_[a].order != vars_[b].order) return vars_[a].order < vars_[b].order;
      return a < b;
    });
    std::map<int, int> pos;
    for (std::size_t i = 0; i < sorted.size(); ++i) pos[sorted[i]] = static_cast<int>(i);
    for (int v : sorted) {
      Node n;
      n.var = v;
      const Variable& var = vars_[v];
      if (!var.synthetic && var.parent >= 0 && !cut_tops.count(v) && pos.count(var.parent)) {
        n.parent_pos = pos.at(var.parent);
      } else {
        n.prior = cut_tops.count(v) ? forward(v) : var.probs;
      }
      order_.push_back(std::move(n));
    }
    for (auto& n : order_) {
      if (n.parent_pos >= 0) order_[static_cast<std::size_t>(n.parent_pos)].has_children = true;
    }
  }

  std::vector<double> distribution(std::size_t i, const std::vector<int>& state) const {
    const Node& n = order_[i];
    if (n.parent_pos < 0) return n.prior;
    const Variable& v = vars_[n.var];
    if (state[static_cast<std::size_t>(n.parent_pos)] == 0) return v.probs;
    double mass = v.mass();
    double occ = cond_factor(n.var);
    std::vector<double> out = v.probs;
    for (auto& x : out) x = mass > 0.0 ? occ * x / mass : 0.0;
    return out;
  }

  double step(std::size_t i, DNF f, std::vector<int>& state) {
    canonicalize(f);
    if (f.empty()) return 0.0;
    if (has_empty(f)) return 1.0;
    if (i == order_.size()) return 0.0;

    // memo key: position, residual formula, occurrence of processed nodes with pending children
    std::vector<int> live;
    for (std::size_t k = i; k < order_.size(); ++k) {
      int pp = order_[k].parent_pos;
      if (pp >= 0 && static_cast<std::size_t>(pp) < i) live.push_back(pp * 2 + state[static_cast<std::size_t>(pp)]);
    }
    std::sort(live.begin(), live.end());
    live.erase(std::unique(live.begin(), live.end()), live.end());
    auto key = std::make_tuple(i, f, live);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;

    const Node& n = order_[i];
    auto dist = distribution(i, state);
    std::set<int> alts;
    for (const auto& c : f) {
      for (const auto& lit : c) {
        if (lit.var == n.var) alts.insert(lit.alt);
      }
    }
    double total = 0.0;
    double other_occ = 0.0;
    double occ_mass = 0.0;
    for (std::size_t a = 0; a < dist.size(); ++a) {
      occ_mass += dist[a];
      if (!alts.count(static_cast<int>(a))) other_occ += dist[a];
    }
    for (int a : alts) {
      double p = dist[static_cast<std::size_t>(a)];
      if (p <= 0.0) continue;
      state[i] = 1;
      total += p * step(i + 1, condition(f, n.var, a), state);
    }
    DNF rest = condition(f, n.var, kOtherOutcome);
    if (n.has_children) {
      if (other_occ > 0.0) {
        state[i] = 1;
        total += other_occ * step(i + 1, rest, state);
      }
      double none = 1.0 - occ_mass;
      if (none > 0.0) {
        state[i] = 0;
        total += none * step(i + 1, rest, state);
      }
    } else {
      double p = other_occ + (1.0 - occ_mass);
      if (p > 0.0) {
        state[i] = 0;
        total += p * step(i + 1, rest, state);
      }
    }
    state[i] = -1;
    memo_.emplace(std::move(key), total);
    return total;
  }

  const VariableTable& vars_;
  const CPT& cpt_;
  std::vector<Node> order_;
  std::map<int, std::vector<double>> forward_;
  std::map<std::tuple<std::size_t, DNF, std::vector<int>>, double> memo_;
};

}  // namespace

double ce_marginal(const Lineage& lineage, const VariableTable& vars, std::size_t cap, const CPT* cpt) {
  auto vs = variables(lineage);
  std::size_t events = 0;
  for (int v : vs) events += vars[v].synthetic ? 0 : 1;
  if (events > cap) {
    throw Error(Errc::lineage_too_large, "lineage mentions " + std::to_string(events) +
                                             " events, above the cap of " + std::to_string(cap));
  }
  if (lineage.conjuncts.size() == 1 && (!cpt || cpt->empty())) return conjunct_prob(lineage.conjuncts.front(), vars);
  if (cpt && !cpt->empty()) {
    MarkovSolver solver(vars, *cpt, vs);
    DNF f = lineage.conjuncts;
    return solver.solve(f);
  }
  IndependentSolver solver(vars);
  return solver.solve(lineage.conjuncts);
}

std::string to_string(const Lineage& l, const VariableTable& vars) {
  if (l.conjuncts.empty()) return "false";
  std::ostringstream os;
  for (std::size_t i = 0; i < l.conjuncts.size(); ++i) {
    if (i) os << " | ";
    const auto& c = l.conjuncts[i];
    if (c.empty()) os << "true";
    for (std::size_t j = 0; j < c.size(); ++j) {
      if (j) os << " & ";
      os << vars[c[j].var].label << (c[j].positive ? "=" : "!=") << c[j].alt;
    }
  }
  return os.str();
}

}  // namespace probcer
