#include "probcer/semantics.hpp"

#include <algorithm>
#include <functional>
#include <optional>
#include <set>

#include "probcer/error.hpp"

namespace probcer {

namespace {

struct Bound {
  enum class Kind { open, exclusive, inclusive };
  Kind kind = Kind::open;
  Timestamp ts = 0;
};

struct Obligation {
  const Pattern* body = nullptr;  // atom or select(atom)
  Bound left;
  Bound right;
};

using Env = std::map<std::string, AttrValue>;

struct Sol {
  Env hard;
  std::vector<std::pair<std::string, AttrValue>> soft;  // values agreed by every '*' iteration
  std::set<std::string> conflict;                       // '*' variables whose iterations disagree
  std::vector<std::pair<int, std::size_t>> assign;
  std::vector<std::pair<int, int>> or_path;
  Timestamp first = 0;
  Timestamp last = 0;
  std::vector<Predicate> preds;
  std::vector<const Mapping*> maps;
  std::vector<Obligation> negs;
};

const Pattern& neg_atom(const Pattern& body) { return body.kind == Pattern::Kind::atom ? body : body.child(); }

bool compatible(const Sol& s, const std::string& name, const AttrValue& v) {
  if (auto it = s.hard.find(name); it != s.hard.end() && !values_equal(it->second, v)) return false;
  if (s.conflict.count(name)) return false;
  for (const auto& [n, sv] : s.soft) {
    if (n == name && !values_equal(sv, v)) return false;
  }
  return true;
}

/// Evaluates pending predicates whose variables are all hard-bound. False
/// when one of them fails.
bool settle(Sol& s) {
  std::vector<Predicate> keep;
  for (auto& p : s.preds) {
    std::set<std::string> vs;
    collect_vars(p, vs);
    bool ready = std::all_of(vs.begin(), vs.end(), [&](const std::string& v) { return s.hard.count(v) != 0; });
    if (!ready) {
      keep.push_back(std::move(p));
      continue;
    }
    auto lookup = [&](const std::string& n) -> const AttrValue* {
      auto it = s.hard.find(n);
      return it == s.hard.end() ? nullptr : &it->second;
    };
    if (!eval_predicate(p, lookup)) return false;
  }
  s.preds = std::move(keep);
  return true;
}

std::optional<Sol> join(const Sol& a, const Sol& b) {
  Sol out = a;
  for (const auto& [n, v] : b.hard) {
    if (!compatible(a, n, v)) return std::nullopt;
    out.hard.emplace(n, v);
  }
  for (const auto& [n, v] : a.hard) {
    if (!compatible(b, n, v)) return std::nullopt;
  }
  out.soft.insert(out.soft.end(), b.soft.begin(), b.soft.end());
  out.conflict.insert(b.conflict.begin(), b.conflict.end());
  out.assign.insert(out.assign.end(), b.assign.begin(), b.assign.end());
  std::sort(out.assign.begin(), out.assign.end());
  out.or_path.insert(out.or_path.end(), b.or_path.begin(), b.or_path.end());
  if (a.assign.empty()) {
    out.first = b.first;
    out.last = b.last;
  } else if (!b.assign.empty()) {
    out.first = std::min(a.first, b.first);
    out.last = std::max(a.last, b.last);
  }
  out.preds.insert(out.preds.end(), b.preds.begin(), b.preds.end());
  out.maps.insert(out.maps.end(), b.maps.begin(), b.maps.end());
  out.negs.insert(out.negs.end(), b.negs.begin(), b.negs.end());
  if (!settle(out)) return std::nullopt;
  return out;
}

bool unify_term(const Term& t, const AttrValue& v, Env& env) {
  switch (t.kind) {
    case Term::Kind::anon: return true;
    case Term::Kind::constant: return values_equal(t.value, v);
    case Term::Kind::var: {
      auto [it, fresh] = env.emplace(t.name, v);
      return fresh || values_equal(it->second, v);
    }
  }
  return false;
}

/// Binds an atom against one event alternative, extending `env`.
bool unify_atom(const Pattern& atom, const ProbEvent& e, const Alternative& alt, Env& env) {
  if (e.type != atom.event_type || alt.attrs.size() + 1 != atom.args.size()) return false;
  for (std::size_t i = 0; i < alt.attrs.size(); ++i) {
    if (!unify_term(atom.args[i], alt.attrs[i].value, env)) return false;
  }
  return unify_term(atom.args.back(), AttrValue{e.ts}, env);
}

class Evaluator {
 public:
  Evaluator(const std::vector<ProbEvent>& events, const Pattern& body) : events_(events) { number(body); }

  std::vector<Sol> eval(const Pattern& p) {
    switch (p.kind) {
      case Pattern::Kind::atom: return eval_atom(p);
      case Pattern::Kind::seq: return eval_seq(p);
      case Pattern::Kind::conj: return eval_conj(p);
      case Pattern::Kind::disj: {
        std::vector<Sol> out;
        for (std::size_t i = 0; i < p.children.size(); ++i) {
          for (auto& s : eval(p.children[i])) {
            s.or_path.emplace_back(ids_.at(&p), static_cast<int>(i));
            out.push_back(std::move(s));
          }
        }
        return out;
      }
      case Pattern::Kind::star: return eval_star(p);
      case Pattern::Kind::neg: return {};
      case Pattern::Kind::select: {
        std::vector<Sol> out;
        for (auto& s : eval(p.child())) {
          s.preds.insert(s.preds.end(), p.predicates.begin(), p.predicates.end());
          if (settle(s)) out.push_back(std::move(s));
        }
        return out;
      }
      case Pattern::Kind::produce: {
        auto out = eval(p.child());
        for (auto& s : out) {
          for (const auto& m : p.mappings) s.maps.push_back(&m);
        }
        return out;
      }
      case Pattern::Kind::window: return eval_window(p);
    }
    return {};
  }

  /// Final checks at the rule root: emits, remaining predicates, negations.
  bool finish(Sol& s) {
    bool progress = true;
    while (progress && !s.maps.empty()) {
      progress = false;
      for (auto it = s.maps.begin(); it != s.maps.end(); ++it) {
        auto lookup = [&](const std::string& n) -> const AttrValue* {
          auto f = s.hard.find(n);
          return f == s.hard.end() ? nullptr : &f->second;
        };
        if (auto v = eval_expr((*it)->expr, lookup)) {
          s.hard[(*it)->target] = *v;
          s.maps.erase(it);
          progress = true;
          break;
        }
      }
    }
    if (!s.maps.empty()) return false;
    if (!settle(s) || !s.preds.empty()) return false;
    for (const auto& ob : s.negs) {
      if (violated(ob, s)) return false;
    }
    return true;
  }

 private:
  void number(const Pattern& p) {
    ids_[&p] = static_cast<int>(ids_.size());
    for (const auto& c : p.children) number(c);
  }

  std::vector<Sol> eval_atom(const Pattern& p) {
    std::vector<Sol> out;
    for (std::size_t i = 0; i < events_.size(); ++i) {
      const auto& e = events_[i];
      Env env;
      if (!unify_atom(p, e, e.alternatives.front(), env)) continue;
      Sol s;
      s.hard = std::move(env);
      s.assign.emplace_back(ids_.at(&p), i);
      s.first = s.last = e.ts;
      out.push_back(std::move(s));
    }
    return out;
  }

  std::vector<Sol> eval_seq(const Pattern& p) {
    std::vector<Sol> acc{Sol{}};
    std::vector<const Pattern*> pending;
    for (const auto& c : p.children) {
      if (c.kind == Pattern::Kind::neg) {
        pending.push_back(&c.child());
        continue;
      }
      auto cs = eval(c);
      std::vector<Sol> next;
      for (const auto& a : acc) {
        for (const auto& b : cs) {
          if (!a.assign.empty() && !(a.last < b.first)) continue;
          auto j = join(a, b);
          if (!j) continue;
          for (const auto* body : pending) {
            Obligation ob;
            ob.body = body;
            if (!a.assign.empty()) ob.left = {Bound::Kind::exclusive, a.last};
            ob.right = {Bound::Kind::exclusive, b.first};
            j->negs.push_back(ob);
          }
          next.push_back(std::move(*j));
        }
      }
      acc = std::move(next);
      pending.clear();
    }
    for (auto& a : acc) {
      for (const auto* body : pending) {
        Obligation ob;
        ob.body = body;
        ob.left = {Bound::Kind::exclusive, a.last};
        a.negs.push_back(ob);
      }
    }
    return acc;
  }

  std::vector<Sol> eval_conj(const Pattern& p) {
    std::vector<Sol> acc{Sol{}};
    std::vector<const Pattern*> negs;
    for (const auto& c : p.children) {
      if (c.kind == Pattern::Kind::neg) {
        negs.push_back(&c.child());
        continue;
      }
      auto cs = eval(c);
      std::vector<Sol> next;
      for (const auto& a : acc) {
        for (const auto& b : cs) {
          bool shared = std::any_of(b.assign.begin(), b.assign.end(), [&](const auto& x) {
            return std::any_of(a.assign.begin(), a.assign.end(), [&](const auto& y) { return x.second == y.second; });
          });
          if (shared) continue;
          if (auto j = join(a, b)) next.push_back(std::move(*j));
        }
      }
      acc = std::move(next);
    }
    for (auto& a : acc) {
      for (const auto* body : negs) a.negs.push_back({body, {}, {}});
    }
    return acc;
  }

  std::vector<Sol> eval_star(const Pattern& p) {
    auto iters = eval(p.child());
    std::sort(iters.begin(), iters.end(), [](const Sol& a, const Sol& b) { return a.first < b.first; });
    std::vector<Sol> out;
    std::vector<const Sol*> chain;
    std::function<void(std::size_t)> extend = [&](std::size_t from) {
      for (std::size_t i = from; i < iters.size(); ++i) {
        if (!chain.empty() && !(chain.back()->last < iters[i].first)) continue;
        chain.push_back(&iters[i]);
        out.push_back(combine(chain));
        extend(i + 1);
        chain.pop_back();
      }
    };
    extend(0);
    return out;
  }

  Sol combine(const std::vector<const Sol*>& chain) {
    Sol s;
    s.first = chain.front()->first;
    s.last = chain.back()->last;
    std::map<std::string, std::vector<AttrValue>> seen;
    for (const auto* it : chain) {
      for (const auto& [n, v] : it->hard) seen[n].push_back(v);
      s.assign.insert(s.assign.end(), it->assign.begin(), it->assign.end());
      s.or_path.insert(s.or_path.end(), it->or_path.begin(), it->or_path.end());
      for (const auto& pr : it->preds) s.preds.push_back(substitute(pr, it->hard));
    }
    std::sort(s.assign.begin(), s.assign.end());
    for (const auto& [n, vs] : seen) {
      bool agree = std::all_of(vs.begin(), vs.end(), [&](const AttrValue& v) { return values_equal(v, vs.front()); });
      if (agree && vs.size() == chain.size()) {
        s.soft.emplace_back(n, vs.front());
      } else {
        s.conflict.insert(n);
      }
    }
    return s;
  }

  std::vector<Sol> eval_window(const Pattern& p) {
    std::vector<Sol> out;
    for (auto& s : eval(p.child())) {
      if (p.window_is_relative()) {
        if (s.last - s.first > p.win_hi) continue;
      } else if (s.first < p.win_lo || s.last > p.win_hi) {
        continue;
      }
      for (auto& ob : s.negs) {
        if (ob.left.kind == Bound::Kind::open && ob.right.kind != Bound::Kind::open) {
          ob.left = {Bound::Kind::inclusive, p.window_is_relative() ? s.first : p.win_lo};
        }
        if (ob.right.kind == Bound::Kind::open && ob.left.kind != Bound::Kind::open) {
          ob.right = {Bound::Kind::inclusive, p.window_is_relative() ? s.first + p.win_hi : p.win_hi};
        }
      }
      out.push_back(std::move(s));
    }
    return out;
  }

  bool violated(const Obligation& ob, const Sol& s) const {
    const Pattern& atom = neg_atom(*ob.body);
    bool bound_time = true;
    for (const auto& t : atom.args) {
      if (t.kind == Term::Kind::var && !s.hard.count(t.name)) bound_time = false;
    }
    if (atom.args.back().kind == Term::Kind::anon) bound_time = false;
    std::optional<Timestamp> at;
    if (bound_time) {
      const Term& tt = atom.args.back();
      const AttrValue& tv = tt.kind == Term::Kind::var ? s.hard.at(tt.name) : tt.value;
      if (!std::holds_alternative<std::int64_t>(tv)) return false;
      at = std::get<std::int64_t>(tv);
    }
    for (const auto& e : events_) {
      if (at) {
        if (e.ts != *at) continue;
      } else {
        if (!inside(ob.left, e.ts, true) || !inside(ob.right, e.ts, false)) continue;
      }
      Env env = s.hard;
      if (!unify_atom(atom, e, e.alternatives.front(), env)) continue;
      bool all = true;
      if (ob.body->kind == Pattern::Kind::select) {
        auto lookup = [&](const std::string& n) -> const AttrValue* {
          auto it = env.find(n);
          return it == env.end() ? nullptr : &it->second;
        };
        for (const auto& pr : ob.body->predicates) all = all && eval_predicate(pr, lookup);
      }
      if (all) return true;
    }
    return false;
  }

  static bool inside(const Bound& b, Timestamp ts, bool is_left) {
    switch (b.kind) {
      case Bound::Kind::open: return false;
      case Bound::Kind::exclusive: return is_left ? ts > b.ts : ts < b.ts;
      case Bound::Kind::inclusive: return is_left ? ts >= b.ts : ts <= b.ts;
    }
    return false;
  }

  const std::vector<ProbEvent>& events_;
  std::map<const Pattern*, int> ids_;
};

}  // namespace

std::string NaiveMatch::grounding(const std::vector<ProbEvent>& evs) const {
  std::string g = std::to_string(rule) + "|";
  for (const auto& [node, choice] : or_path) g += std::to_string(node) + ":" + std::to_string(choice) + ",";
  g += "|";
  for (const auto& [atom, idx] : assignment) g += std::to_string(atom) + "=" + evs[idx].id + ",";
  return g;
}

std::vector<NaiveMatch> naive_rule_matches(const Rule& rule, std::size_t rule_index,
                                           const std::vector<ProbEvent>& events) {
  Pattern body = desugar_and(rule.body);
  Evaluator ev(events, body);
  std::vector<NaiveMatch> out;
  auto heads = rule.effective_heads();
  for (auto& s : ev.eval(body)) {
    if (!ev.finish(s)) continue;
    std::sort(s.or_path.begin(), s.or_path.end());
    for (std::size_t h = 0; h < heads.size(); ++h) {
      Env env = s.hard;
      bool ok = true;
      for (const auto& m : heads[h].mappings) {
        auto lookup = [&](const std::string& n) -> const AttrValue* {
          auto it = env.find(n);
          return it == env.end() ? nullptr : &it->second;
        };
        auto v = eval_expr(m.expr, lookup);
        if (!v) {
          ok = false;
          break;
        }
        env[m.target] = *v;
      }
      if (!ok) continue;
      NaiveMatch nm;
      nm.rule = rule_index;
      nm.head = static_cast<int>(h);
      nm.or_path = s.or_path;
      nm.assignment = s.assign;
      for (const auto& [a, idx] : s.assign) nm.events.push_back(idx);
      std::sort(nm.events.begin(), nm.events.end());
      for (auto idx : nm.events) nm.event_ids.push_back(events[idx].id);
      nm.key.ce_type = rule.head_type;
      bool complete = true;
      for (std::size_t i = 0; i + 1 < rule.head_vars.size(); ++i) {
        auto it = env.find(rule.head_vars[i]);
        if (it == env.end()) {
          complete = false;
          break;
        }
        nm.key.attrs.push_back({rule.head_vars[i], it->second});
      }
      auto ts = env.find(rule.head_vars.back());
      if (!complete || ts == env.end() || !std::holds_alternative<std::int64_t>(ts->second)) continue;
      nm.key.ts = std::get<std::int64_t>(ts->second);
      nm.bindings = std::move(env);
      out.push_back(std::move(nm));
    }
  }
  return out;
}

ProbEvent instance_event(const InstanceKey& key, double prob) {
  ProbEvent e;
  e.type = key.ce_type;
  e.ts = key.ts;
  e.alternatives.push_back({key.attrs, prob});
  e.id = to_string(key);
  return e;
}

std::vector<NaiveMatch> naive_recognize(const RuleSet& rules, const std::vector<ProbEvent>& events) {
  std::map<std::string, int> level;
  std::function<int(const std::string&)> of = [&](const std::string& t) -> int {
    if (!rules.defines(t)) return -1;
    if (auto it = level.find(t); it != level.end()) return it->second;
    int l = 0;
    for (const auto& d : rules.dependencies.at(t)) l = std::max(l, of(d) + 1);
    return level[t] = l;
  };
  int max_level = -1;
  for (const auto& r : rules.rules) max_level = std::max(max_level, of(r.head_type));

  std::vector<ProbEvent> input = events;
  std::vector<NaiveMatch> all;
  for (int l = 0; l <= max_level; ++l) {
    std::vector<ProbEvent> produced;
    std::set<InstanceKey> seen;
    for (std::size_t r = 0; r < rules.rules.size(); ++r) {
      if (level.at(rules.rules[r].head_type) != l) continue;
      for (auto& m : naive_rule_matches(rules.rules[r], r, input)) {
        if (seen.insert(m.key).second) produced.push_back(instance_event(m.key, 1.0));
        all.push_back(std::move(m));
      }
    }
    input.insert(input.end(), produced.begin(), produced.end());
    std::stable_sort(input.begin(), input.end(), [](const ProbEvent& a, const ProbEvent& b) { return a.ts < b.ts; });
  }
  return all;
}

int intervening_count(const std::vector<Timestamp>& input_ts_sorted, Timestamp first, Timestamp last,
                      int selected_inside) {
  if (last <= first + 1) return 0;
  auto lo = std::upper_bound(input_ts_sorted.begin(), input_ts_sorted.end(), first);
  auto hi = std::lower_bound(input_ts_sorted.begin(), input_ts_sorted.end(), last);
  int n = hi > lo ? static_cast<int>(hi - lo) : 0;
  return std::max(0, n - selected_inside);
}

}  // namespace probcer
