#include "probcer/plan.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace probcer {

namespace {

// --- linearization (name based) ---------------------------------------------

struct LElem {
  const Pattern* atom = nullptr;
  bool strict_prev = true;
  int group = -1;
};

struct LPred {
  const Predicate* pred = nullptr;
  int group = -1;
};

struct LNeg {
  const Pattern* body = nullptr;  // atom or select(atom)
  bool in_and = false;
  bool open_left = false;
  bool open_right = false;
  NegationCheck::Bound left_kind = NegationCheck::Bound::none;
  NegationCheck::Bound right_kind = NegationCheck::Bound::none;
  int left = -1;
  int right = -1;
};

struct LWin {
  int first = 0;
  int last = 0;
  Timestamp lo = 0;
  Timestamp hi = 0;
  bool relative = true;
};

struct LBranch {
  std::vector<LElem> elems;
  std::vector<KleeneGroup> groups;
  std::vector<LWin> wins;
  std::vector<LNeg> negs;
  std::vector<LPred> preds;
  std::vector<const Mapping*> emits;
};

[[noreturn]] void fail(Errc code, const std::string& msg, const Pattern& at) {
  throw Error(code, msg + " (line " + std::to_string(at.pos.line) + ")", at.pos.line, at.pos.col);
}

void append(LBranch& r, const LBranch& b, bool strict) {
  const int elem_off = static_cast<int>(r.elems.size());
  const int win_off = static_cast<int>(r.wins.size());
  const int group_off = static_cast<int>(r.groups.size());
  for (std::size_t i = 0; i < b.elems.size(); ++i) {
    LElem e = b.elems[i];
    if (i == 0 && elem_off > 0) e.strict_prev = strict;
    if (e.group >= 0) e.group += group_off;
    r.elems.push_back(e);
  }
  for (auto g : b.groups) {
    g.first += elem_off;
    g.last += elem_off;
    r.groups.push_back(g);
  }
  for (auto w : b.wins) {
    w.first += elem_off;
    w.last += elem_off;
    r.wins.push_back(w);
  }
  for (auto n : b.negs) {
    if (n.left_kind == NegationCheck::Bound::element) n.left += elem_off;
    if (n.left_kind == NegationCheck::Bound::window) n.left += win_off;
    if (n.right_kind == NegationCheck::Bound::element) n.right += elem_off;
    if (n.right_kind == NegationCheck::Bound::window) n.right += win_off;
    r.negs.push_back(n);
  }
  for (auto p : b.preds) {
    if (p.group >= 0) p.group += group_off;
    r.preds.push_back(p);
  }
  r.emits.insert(r.emits.end(), b.emits.begin(), b.emits.end());
}

std::vector<LBranch> linearize(const Pattern& p);

std::vector<LBranch> lin_seq(const Pattern& p) {
  std::vector<LBranch> acc{LBranch{}};
  std::vector<const Pattern*> pending;
  bool any_positive = false;
  for (const auto& c : p.children) {
    if (c.kind == Pattern::Kind::neg) {
      pending.push_back(&c.child());
      continue;
    }
    auto cb = linearize(c);
    std::vector<LBranch> next;
    for (const auto& a : acc) {
      for (const auto& b : cb) {
        LBranch r = a;
        const int base = static_cast<int>(r.elems.size());
        append(r, b, true);
        for (const auto* body : pending) {
          LNeg n;
          n.body = body;
          if (base == 0) {
            n.open_left = true;
          } else {
            n.left_kind = NegationCheck::Bound::element;
            n.left = base - 1;
          }
          n.right_kind = NegationCheck::Bound::element;
          n.right = base;
          r.negs.push_back(n);
        }
        next.push_back(std::move(r));
      }
    }
    acc = std::move(next);
    pending.clear();
    any_positive = true;
  }
  if (!any_positive) fail(Errc::bad_negation, "a sequence needs at least one positive element", p);
  for (auto& a : acc) {
    for (const auto* body : pending) {
      LNeg n;
      n.body = body;
      n.left_kind = NegationCheck::Bound::element;
      n.left = static_cast<int>(a.elems.size()) - 1;
      n.open_right = true;
      a.negs.push_back(n);
    }
  }
  return acc;
}

std::vector<LBranch> lin_conj(const Pattern& p) {
  std::vector<std::vector<LBranch>> choices;
  std::vector<const Pattern*> negs;
  for (const auto& c : p.children) {
    if (c.kind == Pattern::Kind::neg) {
      negs.push_back(&c.child());
      continue;
    }
    auto cb = linearize(c);
    for (const auto& b : cb) {
      if (b.elems.size() != 1 || !b.groups.empty()) {
        fail(Errc::unsupported_nesting, "'and' operands must be single events (atoms, alternatives of atoms)", c);
      }
      for (const auto& n : b.negs) {
        if (n.open_left || n.open_right) fail(Errc::bad_negation, "dangling negation under 'and'", c);
      }
    }
    choices.push_back(std::move(cb));
  }
  if (choices.empty()) fail(Errc::bad_negation, "a conjunction needs at least one positive operand", p);
  if (choices.size() > 4) fail(Errc::unsupported_nesting, "'and' supports at most 4 positive operands", p);

  std::vector<LBranch> out;
  std::vector<std::size_t> pick(choices.size(), 0);
  while (true) {
    std::vector<int> perm(choices.size());
    std::iota(perm.begin(), perm.end(), 0);
    do {
      LBranch r;
      for (int idx : perm) {
        LBranch b = choices[static_cast<std::size_t>(idx)][pick[static_cast<std::size_t>(idx)]];
        b.elems.front().strict_prev = false;
        append(r, b, false);
      }
      for (const auto* body : negs) {
        LNeg n;
        n.body = body;
        n.in_and = true;
        r.negs.push_back(n);
      }
      out.push_back(std::move(r));
    } while (std::next_permutation(perm.begin(), perm.end()));

    std::size_t i = 0;
    for (; i < pick.size(); ++i) {
      if (++pick[i] < choices[i].size()) break;
      pick[i] = 0;
    }
    if (i == pick.size()) break;
  }
  return out;
}

std::vector<LBranch> linearize(const Pattern& p) {
  switch (p.kind) {
    case Pattern::Kind::atom: {
      LBranch b;
      b.elems.push_back({&p, true, -1});
      return {b};
    }
    case Pattern::Kind::seq: return lin_seq(p);
    case Pattern::Kind::conj: return lin_conj(p);
    case Pattern::Kind::disj: {
      std::vector<LBranch> out;
      for (const auto& c : p.children) {
        if (c.kind == Pattern::Kind::neg) fail(Errc::bad_negation, "negation cannot be an alternative of '|'", c);
        auto cb = linearize(c);
        for (const auto& b : cb) {
          for (const auto& n : b.negs) {
            if (n.open_left || n.open_right) {
              fail(Errc::bad_negation, "a leading or trailing negation needs an enclosing window", c);
            }
          }
        }
        out.insert(out.end(), cb.begin(), cb.end());
      }
      return out;
    }
    case Pattern::Kind::star: {
      auto cb = linearize(p.child());
      if (cb.size() != 1) fail(Errc::unsupported_nesting, "'*' operand must have a single alternative", p);
      LBranch b = std::move(cb.front());
      if (!b.groups.empty()) fail(Errc::unsupported_nesting, "'*' cannot be nested inside '*'", p);
      if (!b.negs.empty()) fail(Errc::unsupported_nesting, "negation under '*' is not supported", p);
      if (!b.wins.empty()) fail(Errc::unsupported_nesting, "windows under '*' are not supported", p);
      b.groups.push_back({0, static_cast<int>(b.elems.size()) - 1, {}});
      for (auto& e : b.elems) e.group = 0;
      for (auto& pr : b.preds) pr.group = 0;
      return {b};
    }
    case Pattern::Kind::neg:
      fail(Errc::bad_negation, "negation must be an operand of ';' or 'and'", p);
    case Pattern::Kind::select: {
      auto cb = linearize(p.child());
      for (auto& b : cb) {
        for (const auto& pr : p.predicates) b.preds.push_back({&pr, -1});
      }
      return cb;
    }
    case Pattern::Kind::produce: {
      auto cb = linearize(p.child());
      for (auto& b : cb) {
        for (const auto& m : p.mappings) b.emits.push_back(&m);
      }
      return cb;
    }
    case Pattern::Kind::window: {
      auto cb = linearize(p.child());
      for (auto& b : cb) {
        const int w = static_cast<int>(b.wins.size());
        b.wins.push_back({0, static_cast<int>(b.elems.size()) - 1, p.win_lo, p.win_hi, p.window_is_relative()});
        for (auto& n : b.negs) {
          if (n.open_left) {
            n.open_left = false;
            n.left_kind = NegationCheck::Bound::window;
            n.left = w;
          }
          if (n.open_right) {
            n.open_right = false;
            n.right_kind = NegationCheck::Bound::window;
            n.right = w;
          }
        }
      }
      return cb;
    }
  }
  return {};
}

// --- slot conversion -----------------------------------------------------------

using SlotTable = std::map<std::string, Slot>;

SlotExpr to_slot_expr(const Expr& e, const SlotTable& slots) {
  SlotExpr out;
  out.kind = e.kind;
  out.value = e.value;
  if (e.kind == Expr::Kind::var) out.slot = slots.at(e.name);
  for (const auto& a : e.args) out.args.push_back(to_slot_expr(a, slots));
  return out;
}

SlotPredicate to_slot_predicate(const Predicate& p, const SlotTable& slots) {
  SlotPredicate out;
  out.op = p.op;
  out.lhs = to_slot_expr(p.lhs, slots);
  out.rhs = to_slot_expr(p.rhs, slots);
  std::set<std::string> used;
  collect_vars(p, used);
  for (const auto& v : used) out.slots.push_back(slots.at(v));
  std::sort(out.slots.begin(), out.slots.end());
  out.text = to_string(p);
  return out;
}

SlotTerm to_slot_term(const Term& t, const SlotTable& slots) {
  SlotTerm out;
  out.kind = t.kind;
  out.value = t.value;
  if (t.kind == Term::Kind::var) out.slot = slots.at(t.name);
  return out;
}

void collect_names(const Pattern& p, std::set<std::string>& out) {
  if (p.kind == Pattern::Kind::atom) {
    auto vs = atom_vars(p);
    out.insert(vs.begin(), vs.end());
  }
  for (const auto& pr : p.predicates) collect_vars(pr, out);
  for (const auto& m : p.mappings) {
    out.insert(m.target);
    collect_vars(m.expr, out);
  }
  for (const auto& c : p.children) collect_names(c, out);
}

std::string atom_text(const Pattern& atom) {
  Pattern copy = atom;
  return to_string(copy);
}

const Pattern& neg_atom(const Pattern& body) {
  return body.kind == Pattern::Kind::atom ? body : body.child();
}

BranchPlan finalize_branch(const LBranch& lb, const Rule& rule, const RuleSet& rules, const SlotTable& slots,
                           const std::vector<std::string>& slot_names, const CompileOptions& opts) {
  BranchPlan bp;
  const int n = static_cast<int>(lb.elems.size());

  std::set<Slot> emit_targets;
  for (const auto* m : lb.emits) emit_targets.insert(slots.at(m->target));

  // group-local names: bound only by atoms inside the group
  std::set<std::string> outside_names;
  for (const auto& e : lb.elems) {
    if (e.group < 0) {
      auto vs = atom_vars(*e.atom);
      outside_names.insert(vs.begin(), vs.end());
    }
  }

  for (int i = 0; i < n; ++i) {
    const LElem& le = lb.elems[static_cast<std::size_t>(i)];
    ElementPlan ep;
    ep.event_type = le.atom->event_type;
    for (std::size_t a = 0; a + 1 < le.atom->args.size(); ++a) ep.attr_args.push_back(to_slot_term(le.atom->args[a], slots));
    ep.time_arg = to_slot_term(le.atom->args.back(), slots);
    ep.time_slot = slots.at("#t" + std::to_string(i));
    ep.strict_after_prev = le.strict_prev;
    ep.kleene_group = le.group;
    bp.elements.push_back(std::move(ep));
  }

  bp.groups = lb.groups;
  for (auto& g : bp.groups) {
    std::set<Slot> local;
    for (int i = g.first; i <= g.last; ++i) {
      local.insert(bp.elements[static_cast<std::size_t>(i)].time_slot);
      for (const auto& v : atom_vars(*lb.elems[static_cast<std::size_t>(i)].atom)) {
        if (!outside_names.count(v)) local.insert(slots.at(v));
      }
    }
    g.local_slots.assign(local.begin(), local.end());
  }
  auto local_group_of = [&](Slot s) {
    for (std::size_t g = 0; g < bp.groups.size(); ++g) {
      const auto& ls = bp.groups[g].local_slots;
      if (std::binary_search(ls.begin(), ls.end(), s)) return static_cast<int>(g);
    }
    return -1;
  };

  // slots bound after taking elements 0..i
  std::vector<std::set<Slot>> bound_after(static_cast<std::size_t>(n));
  std::set<Slot> running;
  for (int i = 0; i < n; ++i) {
    const auto& ep = bp.elements[static_cast<std::size_t>(i)];
    running.insert(ep.time_slot);
    for (const auto& t : ep.attr_args) {
      if (t.kind == Term::Kind::var) running.insert(t.slot);
    }
    if (ep.time_arg.kind == Term::Kind::var) running.insert(ep.time_arg.slot);
    bound_after[static_cast<std::size_t>(i)] = running;
  }
  const std::set<Slot>& all_positive = running;
  std::set<Slot> non_local_positive;
  for (Slot s : all_positive) {
    if (local_group_of(s) < 0) non_local_positive.insert(s);
  }

  // windows
  for (const auto& w : lb.wins) {
    const auto& first = lb.elems[static_cast<std::size_t>(w.first)];
    if (first.group >= 0 && w.first != 0) {
      fail(Errc::unsupported_nesting, "a window starting inside '*' must enclose the whole rule body", rule.body);
    }
    bp.windows.push_back({w.first, w.last, w.lo, w.hi, w.relative});
  }
  for (std::size_t wi = 0; wi < bp.windows.size(); ++wi) {
    const auto& w = bp.windows[wi];
    for (int i = w.first; i <= w.last; ++i) bp.elements[static_cast<std::size_t>(i)].window_checks.push_back(static_cast<int>(wi));
    if (w.first == 0 && w.last == n - 1) bp.root_windows.push_back(static_cast<int>(wi));
  }

  // predicates
  for (const auto& lp : lb.preds) bp.predicates.push_back(to_slot_predicate(*lp.pred, slots));
  std::vector<Slot> late_only(emit_targets.begin(), emit_targets.end());
  auto split = split_predicates(bp.predicates, bp, late_only);
  for (std::size_t pi = 0; pi < bp.predicates.size(); ++pi) {
    const auto& sp = bp.predicates[pi];
    std::set<int> groups_used;
    for (Slot s : sp.slots) {
      int g = local_group_of(s);
      if (g >= 0) groups_used.insert(g);
    }
    if (groups_used.size() > 1) {
      fail(Errc::unsupported_nesting, "predicate '" + sp.text + "' mixes variables of different '*' iterations", rule.body);
    }
    if (!groups_used.empty()) {
      const auto& g = bp.groups[static_cast<std::size_t>(*groups_used.begin())];
      int placed = -2;
      for (int i = 0; i < n; ++i) {
        auto& e = split.early[static_cast<std::size_t>(i)];
        if (std::find(e.begin(), e.end(), static_cast<int>(pi)) != e.end()) placed = i;
      }
      if (placed < g.first || placed > g.last) {
        fail(Errc::unsupported_nesting,
             "predicate '" + sp.text + "' over '*' variables depends on variables bound after the iteration",
             rule.body);
      }
    }
  }
  if (opts.all_late) {
    for (std::size_t pi = 0; pi < bp.predicates.size(); ++pi) {
      bool in_group = false;
      for (Slot s : bp.predicates[pi].slots) in_group = in_group || local_group_of(s) >= 0;
      if (!in_group) {
        for (auto& e : split.early) e.erase(std::remove(e.begin(), e.end(), static_cast<int>(pi)), e.end());
        split.start.erase(std::remove(split.start.begin(), split.start.end(), static_cast<int>(pi)), split.start.end());
        if (std::find(split.late.begin(), split.late.end(), static_cast<int>(pi)) == split.late.end()) {
          split.late.push_back(static_cast<int>(pi));
        }
      }
    }
    std::sort(split.late.begin(), split.late.end());
  }
  for (int i = 0; i < n; ++i) bp.elements[static_cast<std::size_t>(i)].early_predicates = split.early[static_cast<std::size_t>(i)];
  bp.start_predicates = split.start;
  bp.late_predicates = split.late;

  // negations
  for (const auto& ln : lb.negs) {
    const Pattern& atom = neg_atom(*ln.body);
    if (rules.defines(atom.event_type)) {
      fail(Errc::bad_negation, "negation over complex event '" + atom.event_type + "' is not supported", atom);
    }
    NegationCheck nc;
    nc.event_type = atom.event_type;
    for (std::size_t a = 0; a + 1 < atom.args.size(); ++a) nc.attr_args.push_back(to_slot_term(atom.args[a], slots));
    nc.time_arg = to_slot_term(atom.args.back(), slots);
    nc.text = atom_text(*ln.body);

    bool all_bound = true;
    std::set<Slot> locals;
    for (const auto& v : atom_vars(atom)) {
      Slot s = slots.at(v);
      if (!non_local_positive.count(s)) {
        all_bound = false;
        locals.insert(s);
      }
    }
    bool time_fixed = nc.time_arg.kind == Term::Kind::constant ||
                      (nc.time_arg.kind == Term::Kind::var && non_local_positive.count(nc.time_arg.slot));
    if (all_bound && time_fixed) {
      nc.form = NegationCheck::Form::bound_time;
    } else {
      nc.form = NegationCheck::Form::gap;
      if (ln.in_and) fail(Errc::bad_negation, "negation under 'and' must have all variables bound: " + nc.text, atom);
      if (ln.open_left || ln.open_right) {
        fail(Errc::bad_negation, "a leading or trailing negation needs an enclosing window: " + nc.text, atom);
      }
      nc.left_kind = ln.left_kind;
      nc.left = ln.left;
      nc.right_kind = ln.right_kind;
      nc.right = ln.right;
      if (nc.left_kind == NegationCheck::Bound::window && bp.windows[static_cast<std::size_t>(nc.left)].relative) {
        fail(Errc::bad_negation, "a leading negation needs an absolute window: " + nc.text, atom);
      }
      if (nc.right_kind == NegationCheck::Bound::element &&
          bp.elements[static_cast<std::size_t>(nc.right)].kleene_group >= 0) {
        fail(Errc::unsupported_nesting, "a negation cannot precede '*': " + nc.text, atom);
      }
    }
    nc.local_slots.assign(locals.begin(), locals.end());
    if (ln.body->kind == Pattern::Kind::select) {
      for (const auto& pr : ln.body->predicates) {
        nc.predicates.push_back(static_cast<int>(bp.predicates.size()));
        bp.predicates.push_back(to_slot_predicate(pr, slots));
      }
    }
    bp.negations.push_back(std::move(nc));
  }

  for (const auto* m : lb.emits) bp.emits.push_back({slots.at(m->target), to_slot_expr(m->expr, slots)});

  // CE timestamp source
  const std::string& head_time = rule.head_vars.back();
  bool computed = std::any_of(lb.emits.begin(), lb.emits.end(), [&](const Mapping* m) { return m->target == head_time; });
  for (const auto& alt : rule.alt_heads) {
    for (const auto& m : alt.mappings) computed = computed || m.target == head_time;
  }
  if (!computed) {
    for (int i = 0; i < n; ++i) {
      const auto& ep = bp.elements[static_cast<std::size_t>(i)];
      if (ep.kleene_group < 0 && ep.time_arg.kind == Term::Kind::var && ep.time_arg.slot == slots.at(head_time)) {
        bp.head_time_element = i;
        break;
      }
    }
  }
  (void)slot_names;
  return bp;
}

NFAPlan compile_rule(const RuleSet& rules, std::size_t index, const CompileOptions& opts) {
  const Rule& rule = rules.rules[index];
  Pattern body = desugar_and(rule.body);

  auto branches = linearize(body);
  std::size_t max_elems = 0;
  for (const auto& b : branches) max_elems = std::max(max_elems, b.elems.size());

  std::set<std::string> names;
  collect_names(body, names);
  names.insert(rule.head_vars.begin(), rule.head_vars.end());
  for (const auto& alt : rule.alt_heads) {
    for (const auto& m : alt.mappings) {
      names.insert(m.target);
      collect_vars(m.expr, names);
    }
  }
  NFAPlan plan;
  SlotTable slots;
  for (const auto& nme : names) {
    slots[nme] = static_cast<Slot>(plan.slot_names.size());
    plan.slot_names.push_back(nme);
  }
  for (std::size_t i = 0; i < max_elems; ++i) {
    std::string nme = "#t" + std::to_string(i);
    slots[nme] = static_cast<Slot>(plan.slot_names.size());
    plan.slot_names.push_back(nme);
  }

  plan.rule_index = index;
  plan.head_type = rule.head_type;
  for (std::size_t i = 0; i < rule.head_vars.size(); ++i) {
    plan.head_slots.push_back(slots.at(rule.head_vars[i]));
    if (i + 1 < rule.head_vars.size()) plan.head_attr_names.push_back(rule.head_vars[i]);
  }
  for (const auto& b : branches) plan.branches.push_back(finalize_branch(b, rule, rules, slots, plan.slot_names, opts));
  for (const auto& alt : rule.effective_heads()) {
    CompiledHead h;
    h.prob = alt.prob;
    for (const auto& m : alt.mappings) h.mappings.push_back({slots.at(m.target), to_slot_expr(m.expr, slots)});
    plan.heads.push_back(std::move(h));
  }
  plan.rule_prob = rule.rule_prob;
  plan.decay = opts.decay;
  for (const auto& b : plan.branches) {
    for (const auto& nc : b.negations) plan.negated_types.insert(nc.event_type);
    for (const auto& e : b.elements) plan.referenced_types.insert(e.event_type);
  }
  return plan;
}


void dump_expr_list(std::ostringstream& os, const BranchPlan& b, const std::vector<int>& idx) {
  os << "[";
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (i) os << ", ";
    os << b.predicates[static_cast<std::size_t>(idx[i])].text;
  }
  os << "]";
}

std::string slot_term_text(const SlotTerm& t, const std::vector<std::string>& names) {
  switch (t.kind) {
    case Term::Kind::var: return names[static_cast<std::size_t>(t.slot)];
    case Term::Kind::anon: return "_";
    case Term::Kind::constant: return to_string(Expr::constant(t.value));
  }
  return "_";
}

}  // namespace

std::map<std::string, int> type_levels(const RuleSet& rules) {
  std::map<std::string, int> level;
  std::function<int(const std::string&)> of = [&](const std::string& t) -> int {
    if (!rules.defines(t)) return -1;
    auto it = level.find(t);
    if (it != level.end()) return it->second;
    int l = 0;
    for (const auto& d : rules.dependencies.at(t)) {
      int dl = of(d);
      if (dl >= 0) l = std::max(l, dl + 1);
    }
    level[t] = l;
    return l;
  };
  for (const auto& [t, deps] : rules.dependencies) of(t);
  return level;
}

double NFAPlan::max_head_factor() const {
  double m = 0.0;
  for (const auto& h : heads) m = std::max(m, h.prob);
  return m * rule_prob;
}

PredicateSplit split_predicates(const std::vector<SlotPredicate>& preds, const BranchPlan& branch,
                                const std::vector<Slot>& late_only_slots) {
  PredicateSplit out;
  const std::size_t n = branch.elements.size();
  out.early.resize(n);
  std::set<Slot> bound;
  std::vector<std::set<Slot>> bound_after(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& ep = branch.elements[i];
    bound.insert(ep.time_slot);
    for (const auto& t : ep.attr_args) {
      if (t.kind == Term::Kind::var) bound.insert(t.slot);
    }
    if (ep.time_arg.kind == Term::Kind::var) bound.insert(ep.time_arg.slot);
    bound_after[i] = bound;
  }
  for (std::size_t pi = 0; pi < preds.size(); ++pi) {
    const auto& p = preds[pi];
    bool late = std::any_of(p.slots.begin(), p.slots.end(), [&](Slot s) {
      return std::find(late_only_slots.begin(), late_only_slots.end(), s) != late_only_slots.end();
    });
    if (late) {
      out.late.push_back(static_cast<int>(pi));
      continue;
    }
    if (p.slots.empty()) {
      out.start.push_back(static_cast<int>(pi));
      continue;
    }
    bool placed = false;
    for (std::size_t i = 0; i < n && !placed; ++i) {
      if (std::includes(bound_after[i].begin(), bound_after[i].end(), p.slots.begin(), p.slots.end())) {
        out.early[i].push_back(static_cast<int>(pi));
        placed = true;
      }
    }
    if (!placed) out.late.push_back(static_cast<int>(pi));
  }
  return out;
}

std::vector<std::size_t> topo_order(const RuleSet& rules) {
  auto level = type_levels(rules);
  std::vector<std::size_t> order(rules.rules.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return level.at(rules.rules[a].head_type) < level.at(rules.rules[b].head_type);
  });
  return order;
}

HierarchyPlan compile(const RuleSet& rules, const CompileOptions& options) {
  if (options.decay && !(*options.decay > 0.0 && *options.decay <= 1.0)) {
    throw Error(Errc::config_error, "decay must lie in (0, 1]");
  }
  HierarchyPlan hp;
  hp.level = type_levels(rules);
  for (std::size_t idx : topo_order(rules)) {
    NFAPlan plan = compile_rule(rules, idx, options);
    plan.level = hp.level.at(plan.head_type);
    hp.max_level = std::max(hp.max_level, plan.level);
    hp.combining_groups[plan.head_type].push_back(hp.plans.size());
    hp.plans.push_back(std::move(plan));
  }
  return hp;
}

std::string dump_plan(const HierarchyPlan& hp) {
  std::ostringstream os;
  for (std::size_t pi = 0; pi < hp.plans.size(); ++pi) {
    const auto& p = hp.plans[pi];
    os << "plan " << pi << ": " << p.head_type << "(";
    for (std::size_t i = 0; i < p.head_slots.size(); ++i) {
      if (i) os << ", ";
      os << p.slot_names[static_cast<std::size_t>(p.head_slots[i])];
    }
    os << ") rule " << p.rule_index << " level " << p.level << " prob " << format_prob(p.rule_prob);
    if (p.decay) os << " decay " << format_prob(*p.decay);
    os << " heads [";
    for (std::size_t i = 0; i < p.heads.size(); ++i) {
      if (i) os << ", ";
      os << format_prob(p.heads[i].prob);
    }
    os << "]\n";
    for (std::size_t bi = 0; bi < p.branches.size(); ++bi) {
      const auto& b = p.branches[bi];
      os << "  branch " << bi << "\n";
      os << "    state 0: start";
      if (!b.start_predicates.empty()) {
        os << " early=";
        dump_expr_list(os, b, b.start_predicates);
      }
      os << "\n";
      for (std::size_t ei = 0; ei < b.elements.size(); ++ei) {
        const auto& e = b.elements[ei];
        os << "    state " << ei + 1 << ": " << e.event_type << "(";
        for (const auto& t : e.attr_args) os << slot_term_text(t, p.slot_names) << ", ";
        os << slot_term_text(e.time_arg, p.slot_names) << ")";
        if (ei > 0) os << (e.strict_after_prev ? " after>" : " after>=");
        os << " self-loop";
        if (e.kleene_group >= 0) os << " kleene=" << e.kleene_group;
        if (!e.early_predicates.empty()) {
          os << " early=";
          dump_expr_list(os, b, e.early_predicates);
        }
        os << "\n";
      }
      os << "    state " << b.elements.size() + 1 << ": accept\n";
      for (const auto& w : b.windows) {
        os << "    window [" << w.lo << ", " << w.hi << "] " << (w.relative ? "relative" : "absolute") << " states "
           << w.first + 1 << ".." << w.last + 1 << "\n";
      }
      for (const auto& nc : b.negations) {
        os << "    not " << nc.text << " ";
        if (nc.form == NegationCheck::Form::bound_time) {
          os << "bound-time";
        } else {
          auto side = [&](NegationCheck::Bound k, int v) {
            if (k == NegationCheck::Bound::element) return "state " + std::to_string(v + 1);
            return "window " + std::to_string(v);
          };
          os << "gap " << side(nc.left_kind, nc.left) << " .. " << side(nc.right_kind, nc.right);
        }
        os << "\n";
      }
      if (!b.late_predicates.empty()) {
        os << "    late=";
        dump_expr_list(os, b, b.late_predicates);
        os << "\n";
      }
      for (const auto& m : b.emits) {
        os << "    emit " << p.slot_names[static_cast<std::size_t>(m.target)] << "\n";
      }
    }
  }
  return os.str();
}

std::optional<AttrValue> eval_slot_expr(const SlotExpr& e, const Bindings& b) {
  switch (e.kind) {
    case Expr::Kind::var: return b[static_cast<std::size_t>(e.slot)];
    case Expr::Kind::constant: return e.value;
    case Expr::Kind::neg: {
      auto v = eval_slot_expr(e.args[0], b);
      if (!v) return std::nullopt;
      return apply_arith(Expr::Kind::sub, AttrValue{std::int64_t{0}}, *v);
    }
    default: {
      auto x = eval_slot_expr(e.args[0], b);
      if (!x) return std::nullopt;
      auto y = eval_slot_expr(e.args[1], b);
      if (!y) return std::nullopt;
      return apply_arith(e.kind, *x, *y);
    }
  }
}

bool eval_slot_predicate(const SlotPredicate& p, const Bindings& b) {
  auto l = eval_slot_expr(p.lhs, b);
  if (!l) return false;
  auto r = eval_slot_expr(p.rhs, b);
  if (!r) return false;
  return compare_holds(p.op, *l, *r);
}

}  // namespace probcer
