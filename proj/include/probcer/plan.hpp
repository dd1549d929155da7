#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "probcer/parser.hpp"
#include "probcer/pattern.hpp"

namespace probcer {

/// Variable slot inside a run's binding vector.
using Slot = int;
inline constexpr Slot kNoSlot = -1;

/// Expression with variables resolved to slots.
struct SlotExpr {
  Expr::Kind kind = Expr::Kind::constant;
  Slot slot = kNoSlot;
  AttrValue value = std::int64_t{0};
  std::vector<SlotExpr> args;
};

struct SlotPredicate {
  CmpOp op = CmpOp::eq;
  SlotExpr lhs;
  SlotExpr rhs;
  std::vector<Slot> slots;  // every slot read, sorted
  std::string text;
};

struct SlotMapping {
  Slot target = kNoSlot;
  SlotExpr expr;
};

/// Compiled atom argument.
struct SlotTerm {
  Term::Kind kind = Term::Kind::anon;
  Slot slot = kNoSlot;
  AttrValue value = std::int64_t{0};
};

/// Positive sequence position; one NFA state waits for it.
struct ElementPlan {
  std::string event_type;
  std::vector<SlotTerm> attr_args;
  SlotTerm time_arg;
  Slot time_slot = kNoSlot;  // hidden slot holding the selected event's ts
  bool strict_after_prev = true;
  int kleene_group = -1;
  std::vector<int> early_predicates;  // indices into BranchPlan::predicates
  std::vector<int> window_checks;     // indices into BranchPlan::windows
};

struct KleeneGroup {
  int first = 0;
  int last = 0;
  std::vector<Slot> local_slots;  // reset when a new iteration begins
};

struct WindowConstraint {
  int first = 0;
  int last = 0;
  Timestamp lo = 0;
  Timestamp hi = 0;
  bool relative = true;
};

struct NegationCheck {
  enum class Form { bound_time, gap };
  enum class Bound { none, element, window };

  Form form = Form::gap;
  std::string event_type;
  std::vector<SlotTerm> attr_args;
  SlotTerm time_arg;
  std::vector<int> predicates;  // indices into BranchPlan::predicates evaluated per candidate
  std::vector<Slot> local_slots;
  // gap region: (left, right) exclusive at element bounds, inclusive at window bounds
  Bound left_kind = Bound::none;
  Bound right_kind = Bound::none;
  int left = -1;
  int right = -1;
  std::string text;
};

/// One linear alternative of a rule body (Or and And expand into several).
struct BranchPlan {
  std::vector<ElementPlan> elements;
  std::vector<KleeneGroup> groups;
  std::vector<WindowConstraint> windows;
  std::vector<NegationCheck> negations;
  std::vector<SlotPredicate> predicates;
  std::vector<int> start_predicates;  // variable-free predicates, checked with the first element
  std::vector<int> late_predicates;
  std::vector<SlotMapping> emits;
  std::vector<int> root_windows;  // windows spanning every element
  /// Element whose timestamp becomes the CE timestamp, or -1 when the head
  /// timestamp is computed.
  int head_time_element = -1;
};

struct CompiledHead {
  double prob = 1.0;
  std::vector<SlotMapping> mappings;
};

struct NFAPlan {
  std::size_t rule_index = 0;
  std::string head_type;
  std::vector<std::string> head_attr_names;
  std::vector<Slot> head_slots;  // one per head variable; the last is the timestamp
  std::vector<BranchPlan> branches;
  std::vector<std::string> slot_names;
  std::vector<CompiledHead> heads;
  double rule_prob = 1.0;
  std::optional<double> decay;
  int level = 0;
  std::set<std::string> negated_types;
  std::set<std::string> referenced_types;

  std::size_t slot_count() const { return slot_names.size(); }
  /// Largest head probability times the rule probability.
  double max_head_factor() const;
};

struct HierarchyPlan {
  std::vector<NFAPlan> plans;  // dependency order
  std::map<std::string, int> level;
  /// head type -> plans sharing it (an implicit combining group).
  std::map<std::string, std::vector<std::size_t>> combining_groups;
  int max_level = 0;
};

struct CompileOptions {
  /// Place every predicate late (testing aid; match sets must not change).
  bool all_late = false;
  std::optional<double> decay;
};

/// Compiles every rule into an NFA plan in hierarchy order. Throws
/// UNSUPPORTED_NESTING / BAD_NEGATION for bodies outside the executable subset.
/// Level of every defined CE type: 0 when it reads only SDEs, else one above
/// the highest CE type it reads.
std::map<std::string, int> type_levels(const RuleSet& rules);

HierarchyPlan compile(const RuleSet& rules, const CompileOptions& options = {});

/// Stable topological order of rule indices; rules over SDEs only come first.
std::vector<std::size_t> topo_order(const RuleSet& rules);

/// Early placement: for each predicate, the first element after which all of
/// its slots are bound (-1 = start state), or nullopt when it must stay late.
struct PredicateSplit {
  std::vector<std::vector<int>> early;  // per element
  std::vector<int> start;
  std::vector<int> late;
};
PredicateSplit split_predicates(const std::vector<SlotPredicate>& preds, const BranchPlan& branch,
                                const std::vector<Slot>& late_only_slots);

/// Deterministic text rendering for golden tests and `validate --dump-plan`.
std::string dump_plan(const HierarchyPlan& plan);

// --- slot expression evaluation ----------------------------------------------

using Bindings = std::vector<std::optional<AttrValue>>;

std::optional<AttrValue> eval_slot_expr(const SlotExpr& e, const Bindings& b);
bool eval_slot_predicate(const SlotPredicate& p, const Bindings& b);

}  // namespace probcer
