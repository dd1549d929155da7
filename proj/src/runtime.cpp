#include "probcer/runtime.hpp"

#include <algorithm>
#include <numeric>

#include "probcer/error.hpp"
#include "probcer/semantics.hpp"

namespace probcer {

namespace {

constexpr Timestamp kMinTs = std::numeric_limits<Timestamp>::min();
constexpr Timestamp kMaxTs = std::numeric_limits<Timestamp>::max();

bool unify_slot(const SlotTerm& t, const AttrValue& v, Bindings& b) {
  switch (t.kind) {
    case Term::Kind::anon: return true;
    case Term::Kind::constant: return values_equal(t.value, v);
    case Term::Kind::var: {
      auto& cell = b[static_cast<std::size_t>(t.slot)];
      if (cell) return values_equal(*cell, v);
      cell = v;
      return true;
    }
  }
  return false;
}

std::optional<Timestamp> as_ts(const std::optional<AttrValue>& v) {
  if (!v || !std::holds_alternative<std::int64_t>(*v)) return std::nullopt;
  return std::get<std::int64_t>(*v);
}

Timestamp slot_ts(const Bindings& b, Slot s) { return as_ts(b[static_cast<std::size_t>(s)]).value_or(0); }

}  // namespace

Engine::Engine(HierarchyPlan plan, EngineConfig config) : plan_(std::move(plan)), config_(std::move(config)) {
  if (config_.model.decay && !(*config_.model.decay > 0.0 && *config_.model.decay <= 1.0)) {
    throw Error(Errc::config_error, "decay must lie in (0, 1]");
  }
  levels_.resize(static_cast<std::size_t>(plan_.max_level) + 1);
  release_.assign(levels_.size(), kMinTs);

  std::set<std::string> heads;
  for (const auto& p : plan_.plans) heads.insert(p.head_type);
  for (const auto& p : plan_.plans) {
    for (const auto& t : p.referenced_types) {
      if (heads.count(t)) referenced_ce_types_.insert(t);
    }
  }
  group_types_ = config_.instance_marginals ? heads : referenced_ce_types_;

  for (std::size_t i = 0; i < plan_.plans.size(); ++i) {
    const auto& p = plan_.plans[i];
    top_level_.push_back(!referenced_ce_types_.count(p.head_type));
    bool lineage = group_types_.count(p.head_type) != 0;
    for (const auto& t : p.referenced_types) lineage = lineage || heads.count(t) != 0;
    for (const auto& b : p.branches) lineage = lineage || !b.negations.empty();
    need_lineage_.push_back(lineage);
    for (const auto& t : p.negated_types) negation_index_[t];

    bucket_offset_.emplace_back();
    auto& level = levels_[static_cast<std::size_t>(p.level)];
    for (std::size_t b = 0; b < p.branches.size(); ++b) {
      bucket_offset_.back().push_back(static_cast<int>(buckets_.size()));
      for (std::size_t e = 0; e < p.branches[b].elements.size(); ++e) {
        int id = static_cast<int>(buckets_.size());
        buckets_.emplace_back();
        bucket_plan_.push_back(static_cast<int>(i));
        bucket_branch_.push_back(static_cast<int>(b));
        bucket_element_.push_back(static_cast<int>(e));
        const auto& type = p.branches[b].elements[e].event_type;
        level.buckets_by_type[type].push_back(id);
        level.input_types.insert(type);
      }
    }
  }
  if (config_.model.kind == ProbModelConfig::Kind::markov) {
    for (const auto& [k, v] : config_.model.cpt.entries) markov_types_.insert(k.first);
  }
}

int Engine::bucket(std::uint32_t plan, std::uint32_t branch, int element) const {
  return bucket_offset_[plan][branch] + element;
}

double Engine::decay_of(const NFAPlan& p) const {
  if (config_.model.decay) return *config_.model.decay;
  return p.decay.value_or(1.0);
}

void Engine::ingest(const ProbEvent& input) {
  if (flushed_) throw Error(Errc::config_error, "engine already flushed");
  ProbEvent ev = validate_event(input);
  if (started_ && ev.ts < frontier_) {
    throw Error(Errc::out_of_order_event, "event " + ev.id + " at ts " + std::to_string(ev.ts) +
                                              " arrived after ts " + std::to_string(frontier_));
  }
  if (!started_ || ev.ts > frontier_) advance(ev.ts, false);
  started_ = true;
  ++stats_.events;
  if (ev.id.empty()) ev.id = "e" + std::to_string(stats_.events);

  auto ref = std::make_shared<StoredEvent>();
  ref->event = std::move(ev);
  ref->seq = next_seq_++;
  const std::string& type = ref->event.type;

  if (config_.model.kind == ProbModelConfig::Kind::markov) {
    for (const auto& prev : config_.model.cpt.predecessors(type)) {
      auto it = markov_last_.find(prev);
      if (it != markov_last_.end() && (!ref->markov_parent || it->second->seq > ref->markov_parent->seq)) {
        ref->markov_parent = it->second;
      }
    }
    if (markov_types_.count(type)) markov_last_[type] = ref;
  }
  if (decay_used()) input_ts_.push_back(ref->event.ts);
  if (auto it = negation_index_.find(type); it != negation_index_.end()) it->second.push_back(ref);

  process(0, ref);
  for (std::size_t j = 1; j < levels_.size(); ++j) {
    if (levels_[j].input_types.count(type)) levels_[j].buffer.emplace(ref->event.ts, ref);
  }
  resolve_pending(0, false);
}

bool Engine::decay_used() const {
  if (config_.model.decay) return *config_.model.decay < 1.0;
  return std::any_of(plan_.plans.begin(), plan_.plans.end(), [](const NFAPlan& p) { return p.decay && *p.decay < 1.0; });
}

void Engine::flush() {
  if (flushed_) return;
  advance(kMaxTs, true);
  flushed_ = true;
}

void Engine::advance(Timestamp frontier, bool final) {
  frontier_ = frontier;
  release_[0] = frontier;
  for (std::size_t j = 0; j < levels_.size(); ++j) {
    int level = static_cast<int>(j);
    if (j > 0) {
      Timestamp r = frontier;
      if (!final) {
        for (std::size_t i = 0; i < plan_.plans.size(); ++i) {
          if (plan_.plans[i].level < level) r = std::min(r, future_ce_bound(i, false));
        }
      }
      release_[j] = r;
      auto& buf = levels_[j].buffer;
      while (!buf.empty() && (final || buf.begin()->first < r)) {
        EventRef ev = buf.begin()->second;
        buf.erase(buf.begin());
        process(level, ev);
      }
    }
    resolve_pending(level, final);
    seal(level, final);
  }
  if (config_.eviction && !final && (++advances_ % 64) == 0) stats_.evicted += evict(frontier);
}

void Engine::process(int level, const EventRef& ev) {
  auto& ls = levels_[static_cast<std::size_t>(level)];
  auto it = ls.buckets_by_type.find(ev->event.type);
  if (it == ls.buckets_by_type.end()) return;
  const Timestamp ts = ev->event.ts;
  std::vector<Run> staged;
  for (int id : it->second) {
    const auto p = static_cast<std::uint32_t>(bucket_plan_[static_cast<std::size_t>(id)]);
    const auto b = static_cast<std::uint32_t>(bucket_branch_[static_cast<std::size_t>(id)]);
    if (bucket_element_[static_cast<std::size_t>(id)] == 0) {
      Run start;
      start.plan = p;
      start.branch = b;
      start.bindings.assign(plan_.plans[p].slot_count(), std::nullopt);
      try_take(start, ev, staged);
    }
    auto& runs = buckets_[static_cast<std::size_t>(id)];
    std::size_t keep = 0;
    for (std::size_t r = 0; r < runs.size(); ++r) {
      if (config_.eviction && runs[r].deadline < ts) {
        ++stats_.evicted;
        --stats_.live_runs;
        continue;
      }
      try_take(runs[r], ev, staged);
      if (keep != r) runs[keep] = std::move(runs[r]);
      ++keep;
    }
    runs.resize(keep);
  }
  for (auto& r : staged) {
    buckets_[static_cast<std::size_t>(bucket(r.plan, r.branch, r.next))].push_back(std::move(r));
    ++stats_.live_runs;
  }
  stats_.peak_runs = std::max(stats_.peak_runs, stats_.live_runs);
  if (stats_.live_runs > config_.run_cap) {
    throw Error(Errc::run_cap_exceeded, "live runs exceed the cap of " + std::to_string(config_.run_cap));
  }
}

double Engine::run_bound(const Run& r) const {
  double base = std::min(r.bound, r.ce_min);
  return base * plan_.plans[r.plan].max_head_factor();
}

void Engine::try_take(const Run& run, const EventRef& ev, std::vector<Run>& staged) {
  const NFAPlan& plan = plan_.plans[run.plan];
  const BranchPlan& br = plan.branches[run.branch];
  const int e = run.next;
  const ElementPlan& el = br.elements[static_cast<std::size_t>(e)];
  const ProbEvent& pe = ev->event;
  const Timestamp ts = pe.ts;

  if (run.length > 0) {
    bool restart = run.last->element >= e;
    bool strict = restart || el.strict_after_prev;
    if (strict ? ts <= run.last_ts : ts < run.last_ts) return;
    if (ts > run.deadline) return;
  }
  const AttrValue ts_value{ts};
  for (std::size_t a = 0; a < pe.alternatives.size(); ++a) {
    const Alternative& alt = pe.alternatives[a];
    if (alt.attrs.size() != el.attr_args.size()) continue;
    Bindings nb = run.bindings;
    bool ok = true;
    for (std::size_t k = 0; k < alt.attrs.size() && ok; ++k) ok = unify_slot(el.attr_args[k], alt.attrs[k].value, nb);
    if (!ok || !unify_slot(el.time_arg, ts_value, nb)) continue;
    nb[static_cast<std::size_t>(el.time_slot)] = ts_value;

    for (int wi : el.window_checks) {
      const auto& w = br.windows[static_cast<std::size_t>(wi)];
      if (w.relative) {
        Timestamp anchor = w.first == 0 ? (run.length == 0 ? ts : run.first_ts)
                                        : slot_ts(nb, br.elements[static_cast<std::size_t>(w.first)].time_slot);
        ok = ok && ts - anchor <= w.hi && ts - anchor >= w.lo;
      } else {
        ok = ok && ts >= w.lo && ts <= w.hi;
      }
    }
    if (!ok) continue;
    if (run.length == 0) {
      for (int pi : br.start_predicates) ok = ok && eval_slot_predicate(br.predicates[static_cast<std::size_t>(pi)], nb);
    }
    for (int pi : el.early_predicates) ok = ok && eval_slot_predicate(br.predicates[static_cast<std::size_t>(pi)], nb);
    if (!ok) continue;

    Run nr;
    nr.plan = run.plan;
    nr.branch = run.branch;
    nr.length = run.length + 1;
    nr.bindings = std::move(nb);
    nr.last = std::make_shared<Step>(Step{run.last, ev, static_cast<int>(a), e});
    nr.last_ts = ts;
    nr.bound = run.bound;
    nr.ce_min = run.ce_min;
    if (run.length == 0) {
      nr.first_ts = ts;
      nr.first_seq = ev->seq;
      for (int wi : br.root_windows) {
        const auto& w = br.windows[static_cast<std::size_t>(wi)];
        nr.deadline = std::min(nr.deadline, w.relative ? ts + w.hi : w.hi);
      }
    } else {
      nr.first_ts = run.first_ts;
      nr.first_seq = run.first_seq;
      nr.deadline = run.deadline;
    }
    double p = ev->complex ? ev->marginal : alt.prob;
    if (config_.model.kind == ProbModelConfig::Kind::markov && run.length > 0) {
      if (auto c = config_.model.cpt.lookup(run.last->event->event.type, pe.type)) {
        double mass = ev->complex ? ev->marginal : pe.occurrence_mass();
        p = p == mass ? *c : *c * (p / mass);
      }
    }
    if (ev->complex && ev->var < 0) {
      nr.ce_min = std::min(nr.ce_min, p);
    } else {
      nr.bound *= p;
    }
    ++stats_.runs_created;
    if (config_.prune_threshold > 0.0 && top_level_[nr.plan] && run_bound(nr) < config_.prune_threshold) {
      ++stats_.pruned;
      continue;
    }

    const int g = el.kleene_group;
    if (g >= 0 && e == br.groups[static_cast<std::size_t>(g)].last) {
      Run again = nr;
      again.next = br.groups[static_cast<std::size_t>(g)].first;
      for (Slot s : br.groups[static_cast<std::size_t>(g)].local_slots) again.bindings[static_cast<std::size_t>(s)].reset();
      staged.push_back(std::move(again));
    }
    if (static_cast<std::size_t>(e + 1) == br.elements.size()) {
      complete(std::move(nr));
    } else {
      nr.next = e + 1;
      staged.push_back(std::move(nr));
    }
  }
}

void Engine::complete(Run run) {
  const NFAPlan& plan = plan_.plans[run.plan];
  const BranchPlan& br = plan.branches[run.branch];
  Bindings& b = run.bindings;
  for (const auto& m : br.emits) {
    auto v = eval_slot_expr(m.expr, b);
    if (!v) return;
    b[static_cast<std::size_t>(m.target)] = std::move(v);
  }
  for (int pi : br.late_predicates) {
    if (!eval_slot_predicate(br.predicates[static_cast<std::size_t>(pi)], b)) return;
  }
  Pending p;
  p.min_ce_ts = kMaxTs;
  for (std::size_t h = 0; h < plan.heads.size(); ++h) {
    Bindings hb = b;
    bool ok = true;
    for (const auto& m : plan.heads[h].mappings) {
      auto v = eval_slot_expr(m.expr, hb);
      if (!v) {
        ok = false;
        break;
      }
      hb[static_cast<std::size_t>(m.target)] = std::move(v);
    }
    for (Slot s : plan.head_slots) ok = ok && hb[static_cast<std::size_t>(s)].has_value();
    auto ts = ok ? as_ts(hb[static_cast<std::size_t>(plan.head_slots.back())]) : std::nullopt;
    if (!ts) continue;
    p.min_ce_ts = std::min(p.min_ce_ts, *ts);
    p.heads.emplace_back(static_cast<int>(h), std::move(hb));
  }
  if (p.heads.empty()) return;

  p.horizon = kMinTs;
  for (const auto& nc : br.negations) {
    Timestamp h = kMinTs;
    if (nc.form == NegationCheck::Form::bound_time) {
      h = nc.time_arg.kind == Term::Kind::constant ? as_ts(nc.time_arg.value).value_or(kMinTs)
                                                   : slot_ts(b, nc.time_arg.slot);
    } else if (nc.right_kind == NegationCheck::Bound::element) {
      h = slot_ts(b, br.elements[static_cast<std::size_t>(nc.right)].time_slot) - 1;
    } else {
      const auto& w = br.windows[static_cast<std::size_t>(nc.right)];
      Timestamp anchor = w.first == 0 ? run.first_ts : slot_ts(b, br.elements[static_cast<std::size_t>(w.first)].time_slot);
      h = w.relative ? anchor + w.hi : w.hi;
    }
    p.horizon = std::max(p.horizon, h);
  }
  p.run = std::move(run);
  levels_[static_cast<std::size_t>(plan.level)].pending.push_back(std::move(p));
}

void Engine::resolve_pending(int level, bool final) {
  auto& pend = levels_[static_cast<std::size_t>(level)].pending;
  if (pend.empty()) return;
  std::vector<Match> batch;
  std::vector<Pending> keep;
  for (auto& p : pend) {
    if (final || p.horizon < frontier_) {
      finish(p, batch);
    } else {
      keep.push_back(std::move(p));
    }
  }
  pend = std::move(keep);
  emit_batch(batch);
}

int Engine::var_of(const EventRef& e) {
  if (e->var >= 0) return e->var;
  std::vector<StoredEvent*> chain;
  for (StoredEvent* cur = e.get(); cur && cur->var < 0; cur = cur->markov_parent.get()) chain.push_back(cur);
  for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
    StoredEvent* cur = *it;
    Variable v;
    v.label = cur->event.id;
    v.type = cur->event.type;
    v.ts = cur->event.ts;
    v.order = cur->seq;
    for (const auto& a : cur->event.alternatives) v.probs.push_back(a.prob);
    v.parent = cur->markov_parent ? cur->markov_parent->var : -1;
    cur->var = vars_.add(std::move(v));
  }
  return e->var;
}

void Engine::finish(const Pending& p, std::vector<Match>& out) {
  const Run& run = p.run;
  const NFAPlan& plan = plan_.plans[run.plan];
  const BranchPlan& br = plan.branches[run.branch];
  const bool lineage = need_lineage_[run.plan];

  std::vector<const Step*> steps;
  for (const Step* s = run.last.get(); s; s = s->prev.get()) steps.push_back(s);
  std::reverse(steps.begin(), steps.end());

  Conjunct literals;
  double neg_factor = 1.0;
  for (const auto& nc : br.negations) {
    Timestamp lo;
    Timestamp hi;
    if (nc.form == NegationCheck::Form::bound_time) {
      lo = hi = nc.time_arg.kind == Term::Kind::constant ? as_ts(nc.time_arg.value).value_or(kMinTs)
                                                         : slot_ts(run.bindings, nc.time_arg.slot);
    } else {
      if (nc.left_kind == NegationCheck::Bound::element) {
        lo = slot_ts(run.bindings, br.elements[static_cast<std::size_t>(nc.left)].time_slot) + 1;
      } else {
        lo = br.windows[static_cast<std::size_t>(nc.left)].lo;
      }
      if (nc.right_kind == NegationCheck::Bound::element) {
        hi = slot_ts(run.bindings, br.elements[static_cast<std::size_t>(nc.right)].time_slot) - 1;
      } else {
        const auto& w = br.windows[static_cast<std::size_t>(nc.right)];
        Timestamp anchor =
            w.first == 0 ? run.first_ts : slot_ts(run.bindings, br.elements[static_cast<std::size_t>(w.first)].time_slot);
        hi = w.relative ? anchor + w.hi : w.hi;
      }
    }
    const auto& cands = negation_index_.at(nc.event_type);
    auto first = std::lower_bound(cands.begin(), cands.end(), lo,
                                  [](const EventRef& e, Timestamp t) { return e->event.ts < t; });
    for (auto it = first; it != cands.end() && (*it)->event.ts <= hi; ++it) {
      const ProbEvent& ce = (*it)->event;
      double violating = 0.0;
      for (std::size_t a = 0; a < ce.alternatives.size(); ++a) {
        const auto& alt = ce.alternatives[a];
        if (alt.attrs.size() != nc.attr_args.size()) continue;
        Bindings cb = run.bindings;
        for (Slot s : nc.local_slots) cb[static_cast<std::size_t>(s)].reset();
        bool ok = true;
        for (std::size_t k = 0; k < alt.attrs.size() && ok; ++k) ok = unify_slot(nc.attr_args[k], alt.attrs[k].value, cb);
        ok = ok && unify_slot(nc.time_arg, AttrValue{ce.ts}, cb);
        for (int pi : nc.predicates) ok = ok && eval_slot_predicate(br.predicates[static_cast<std::size_t>(pi)], cb);
        if (!ok) continue;
        violating += alt.prob;
        if (config_.model.hard_negation) return;
        if (lineage) literals.push_back({var_of(*it), static_cast<int>(a), false});
      }
      neg_factor *= std::max(0.0, 1.0 - violating);
    }
  }
  if (neg_factor <= 0.0) return;

  std::vector<SelectedEvent> selected;
  std::vector<const Lineage*> complex_lineages;
  int inside = 0;
  for (const Step* s : steps) {
    const StoredEvent& se = *s->event;
    SelectedEvent x;
    x.id = se.event.id;
    x.type = se.event.type;
    x.ts = se.event.ts;
    x.alt = s->alt;
    x.complex = se.complex;
    x.prob = se.complex ? se.marginal : se.event.alternatives[static_cast<std::size_t>(s->alt)].prob;
    x.mass = se.complex ? se.marginal : se.event.occurrence_mass();
    x.seq = se.seq;
    if (!se.complex && x.ts > run.first_ts && x.ts < run.last_ts) ++inside;
    if (lineage) {
      if (se.complex && se.var < 0) {
        complex_lineages.push_back(&se.lineage);
      } else {
        literals.push_back({se.complex ? se.var : var_of(s->event), se.complex ? 0 : s->alt, true});
      }
    }
    selected.push_back(std::move(x));
  }

  const double decay = decay_of(plan);
  int k = decay < 1.0 ? intervening_count(input_ts_, run.first_ts, run.last_ts, inside) : 0;
  std::vector<double> coins;
  bool need_coin = plan.heads.size() > 1;
  for (const auto& h : plan.heads) {
    coins.push_back(apply_decay(apply_rule_prob(plan.rule_prob, h.prob), k, decay));
    need_coin = need_coin || coins.back() < 1.0;
  }

  Lineage base;
  int coin_var = -1;
  if (lineage) {
    base = Lineage::of(literals);
    for (const auto* cl : complex_lineages) base = conjoin(base, *cl);
    if (need_coin) {
      Variable v;
      v.label = "coin" + std::to_string(next_coin_++);
      v.type = plan.head_type;
      v.ts = run.last_ts;
      v.order = std::numeric_limits<std::uint64_t>::max();
      v.probs = coins;
      v.synthetic = true;
      coin_var = vars_.add(std::move(v));
    }
  }

  for (const auto& [h, hb] : p.heads) {
    Match m;
    m.plan = run.plan;
    m.rule = plan.rule_index;
    m.branch = static_cast<int>(run.branch);
    m.head = h;
    m.events = selected;
    m.negation_factor = neg_factor;
    m.rule_prob = plan.rule_prob;
    m.head_prob = plan.heads[static_cast<std::size_t>(h)].prob;
    m.intervening = k;
    const double coin = coins[static_cast<std::size_t>(h)];
    if (lineage) {
      m.lineage = coin_var >= 0 ? conjoin(base, Lineage::of({{coin_var, h, true}})) : base;
    }
    if (config_.model.kind == ProbModelConfig::Kind::markov) {
      m.prob = match_prob_markov(m, config_.model.cpt) * coin;
    } else if (lineage) {
      m.prob = ce_marginal(m.lineage, vars_, config_.lineage_cap);
    } else {
      m.prob = match_prob_independent(m) * coin;
    }
    m.ce.ce_type = plan.head_type;
    for (std::size_t i = 0; i + 1 < plan.head_slots.size(); ++i) {
      m.ce.attrs.push_back({plan.head_attr_names[i], *hb[static_cast<std::size_t>(plan.head_slots[i])]});
    }
    m.ce.ts = *as_ts(hb[static_cast<std::size_t>(plan.head_slots.back())]);
    m.ce.prob = m.prob;
    for (const auto& e : m.events) m.ce.contributing_ids.push_back(e.id);

    if (group_types_.count(plan.head_type)) {
      InstanceKey key{m.ce.ce_type, m.ce.attrs, m.ce.ts};
      auto& g = groups_[key];
      g.key = key;
      g.lineage.add(m.lineage);
      for (const auto& e : m.events) {
        if (std::find(g.ids.begin(), g.ids.end(), e.id) == g.ids.end()) {
          g.ids.push_back(e.id);
          g.order.emplace_back(e.ts, e.seq);
        }
      }
    }
    out.push_back(std::move(m));
  }
}

void Engine::emit_batch(std::vector<Match>& batch) {
  if (batch.empty()) return;
  auto key = [](const Match& m) {
    std::vector<std::uint64_t> seqs;
    for (const auto& e : m.events) seqs.push_back(e.seq);
    return std::make_tuple(m.rule, m.branch, seqs, m.head);
  };
  std::stable_sort(batch.begin(), batch.end(), [&](const Match& a, const Match& b) { return key(a) < key(b); });
  for (const auto& m : batch) {
    ++stats_.matches;
    if (match_sink_) match_sink_(m);
  }
}

Timestamp Engine::future_ce_bound(std::size_t plan_index, bool final) const {
  if (final) return kMaxTs;
  const NFAPlan& plan = plan_.plans[plan_index];
  Timestamp b = release_[static_cast<std::size_t>(plan.level)];
  for (std::size_t bi = 0; bi < plan.branches.size(); ++bi) {
    const auto& br = plan.branches[bi];
    if (br.head_time_element < 0) return kMinTs;
    const Slot s = br.elements[static_cast<std::size_t>(br.head_time_element)].time_slot;
    for (std::size_t e = static_cast<std::size_t>(br.head_time_element) + 1; e < br.elements.size(); ++e) {
      for (const auto& r : buckets_[static_cast<std::size_t>(bucket(static_cast<std::uint32_t>(plan_index),
                                                                    static_cast<std::uint32_t>(bi), static_cast<int>(e)))]) {
        if (r.deadline < frontier_) continue;
        b = std::min(b, slot_ts(r.bindings, s));
      }
    }
  }
  for (const auto& p : levels_[static_cast<std::size_t>(plan.level)].pending) {
    if (p.run.plan == plan_index) b = std::min(b, p.min_ce_ts);
  }
  return b;
}

void Engine::seal(int level, bool final) {
  if (groups_.empty()) return;
  std::map<std::string, Timestamp> limit;
  for (std::size_t i = 0; i < plan_.plans.size(); ++i) {
    const auto& p = plan_.plans[i];
    if (p.level != level || !group_types_.count(p.head_type)) continue;
    Timestamp b = future_ce_bound(i, final);
    auto [it, fresh] = limit.emplace(p.head_type, b);
    if (!fresh) it->second = std::min(it->second, b);
  }
  const CPT* cpt = config_.model.kind == ProbModelConfig::Kind::markov ? &config_.model.cpt : nullptr;
  for (auto it = groups_.begin(); it != groups_.end();) {
    auto lim = limit.find(it->first.ce_type);
    if (lim == limit.end() || !(final || it->first.ts < lim->second)) {
      ++it;
      continue;
    }
    Group& g = it->second;
    CEInstance inst;
    inst.ce_type = g.key.ce_type;
    inst.attrs = g.key.attrs;
    inst.ts = g.key.ts;
    inst.prob = ce_marginal(g.lineage, vars_, config_.lineage_cap, cpt);
    std::vector<std::size_t> idx(g.ids.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return g.order[a] < g.order[b]; });
    for (auto i : idx) inst.contributing_ids.push_back(g.ids[i]);
    ++stats_.instances;
    if (instance_sink_) instance_sink_(inst);
    if (referenced_ce_types_.count(inst.ce_type)) promote(inst, std::move(g.lineage));
    it = groups_.erase(it);
  }
}

void Engine::promote(const CEInstance& ce, std::optional<Lineage> lineage) {
  auto lv = plan_.level.find(ce.ce_type);
  if (lv == plan_.level.end()) {
    for (const auto& p : plan_.plans) {
      if (p.referenced_types.count(ce.ce_type)) {
        throw Error(Errc::hierarchy_order_violation,
                    "rule for " + p.head_type + " reads " + ce.ce_type + " as an input event");
      }
    }
    throw Error(Errc::no_such_ce, "no rule defines " + ce.ce_type);
  }
  for (const auto& p : plan_.plans) {
    if (p.level <= lv->second && p.referenced_types.count(ce.ce_type)) {
      throw Error(Errc::hierarchy_order_violation,
                  "rule for " + p.head_type + " at level " + std::to_string(p.level) + " reads " + ce.ce_type);
    }
  }
  auto ref = std::make_shared<StoredEvent>();
  ref->event = instance_event({ce.ce_type, ce.attrs, ce.ts}, ce.prob);
  ref->seq = next_seq_++;
  ref->complex = true;
  ref->marginal = ce.prob;
  if (config_.approx_hierarchy || !lineage) {
    Variable v;
    v.label = ref->event.id;
    v.type = ce.ce_type;
    v.ts = ce.ts;
    v.order = ref->seq;
    v.probs = {ce.prob};
    ref->var = vars_.add(std::move(v));
  } else {
    ref->lineage = std::move(*lineage);
  }
  for (std::size_t j = static_cast<std::size_t>(lv->second) + 1; j < levels_.size(); ++j) {
    if (levels_[j].input_types.count(ce.ce_type)) levels_[j].buffer.emplace(ce.ts, ref);
  }
}

std::size_t Engine::evict(Timestamp now) {
  std::size_t n = 0;
  for (auto& runs : buckets_) {
    auto end = std::remove_if(runs.begin(), runs.end(), [&](const Run& r) { return r.deadline < now; });
    n += static_cast<std::size_t>(runs.end() - end);
    runs.erase(end, runs.end());
  }
  stats_.live_runs -= n;
  return n;
}

std::size_t Engine::prune_below(double epsilon) {
  if (!config_.model.monotone) {
    throw Error(Errc::model_not_monotone, "pruning needs a model whose match probabilities never increase");
  }
  std::size_t n = 0;
  for (std::size_t id = 0; id < buckets_.size(); ++id) {
    if (!top_level_[static_cast<std::size_t>(bucket_plan_[id])]) continue;
    auto& runs = buckets_[id];
    auto end = std::remove_if(runs.begin(), runs.end(), [&](const Run& r) { return run_bound(r) < epsilon; });
    n += static_cast<std::size_t>(runs.end() - end);
    runs.erase(end, runs.end());
  }
  stats_.live_runs -= n;
  stats_.pruned += n;
  return n;
}

RecognitionResult recognize(const RuleSet& rules, const std::vector<ProbEvent>& events, const EngineConfig& config,
                            const CompileOptions& options) {
  RecognitionResult res;
  Engine engine(compile(rules, options), config);
  engine.on_match([&](const Match& m) { res.matches.push_back(m); });
  engine.on_instance([&](const CEInstance& c) { res.instances.push_back(c); });
  for (const auto& e : events) engine.ingest(e);
  engine.flush();
  res.stats = engine.stats();
  return res;
}

}  // namespace probcer
