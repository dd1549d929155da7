#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "probcer/error.hpp"
#include "probcer/event.hpp"

namespace probcer {

struct SourcePos {
  int line = 0;
  int col = 0;
};

/// Arithmetic expression over variables and constants.
struct Expr {
  enum class Kind { var, constant, add, sub, mul, div, neg };

  Kind kind = Kind::constant;
  std::string name;
  AttrValue value = std::int64_t{0};
  std::vector<Expr> args;

  static Expr variable(std::string name);
  static Expr constant(AttrValue value);
  static Expr binary(Kind kind, Expr lhs, Expr rhs);
  static Expr negate(Expr operand);

  friend bool operator==(const Expr&, const Expr&) = default;
};

enum class CmpOp { eq, ne, lt, le, gt, ge };

struct Predicate {
  CmpOp op = CmpOp::eq;
  Expr lhs;
  Expr rhs;
  SourcePos pos;
};
bool operator==(const Predicate& a, const Predicate& b);

/// `target = expr` inside an emit block or an alternative head.
struct Mapping {
  std::string target;
  Expr expr;
  SourcePos pos;
};
bool operator==(const Mapping& a, const Mapping& b);

/// Atom argument: a variable (upper-case initial), `_`, or a constant.
struct Term {
  enum class Kind { var, anon, constant };

  Kind kind = Kind::anon;
  std::string name;
  AttrValue value = std::int64_t{0};

  static Term variable(std::string name) { return {Kind::var, std::move(name), std::int64_t{0}}; }
  static Term anonymous() { return {Kind::anon, "_", std::int64_t{0}}; }
  static Term constant(AttrValue v) { return {Kind::constant, {}, std::move(v)}; }

  friend bool operator==(const Term&, const Term&) = default;
};

/// Event algebra expression tree.
struct Pattern {
  enum class Kind { atom, seq, disj, conj, star, neg, select, produce, window };

  Kind kind = Kind::atom;
  std::string event_type;      // atom
  std::vector<Term> args;      // atom; the last argument is the time point
  std::vector<Pattern> children;
  std::vector<Predicate> predicates;  // select
  std::vector<Mapping> mappings;      // produce
  Timestamp win_lo = 0;               // window
  Timestamp win_hi = 0;
  SourcePos pos;

  static Pattern atom(std::string type, std::vector<Term> args);
  static Pattern nary(Kind kind, std::vector<Pattern> children);
  static Pattern unary(Kind kind, Pattern child);
  static Pattern select(std::vector<Predicate> preds, Pattern child);
  static Pattern produce(std::vector<Mapping> maps, Pattern child);
  static Pattern window(Timestamp lo, Timestamp hi, Pattern child);

  const Pattern& child() const { return children.front(); }
  /// Relative windows are written with a zero lower bound.
  bool window_is_relative() const { return win_lo == 0; }
};
/// Structural equality; source positions are ignored.
bool operator==(const Pattern& a, const Pattern& b);

/// One alternative of an annotated-disjunction head.
struct AltHead {
  double prob = 1.0;
  std::vector<Mapping> mappings;
  SourcePos pos;
};
bool operator==(const AltHead& a, const AltHead& b);

struct Rule {
  std::string head_type;
  std::vector<std::string> head_vars;  // the last one is the CE timestamp
  Pattern body;
  double rule_prob = 1.0;
  bool has_prob_prefix = false;
  std::vector<AltHead> alt_heads;
  SourcePos pos;

  /// Head alternatives with their probabilities; a plain head is a single
  /// alternative of probability 1.
  std::vector<AltHead> effective_heads() const;
};
bool operator==(const Rule& a, const Rule& b);

struct Diagnostic {
  enum class Severity { error, warning };

  Severity severity = Severity::error;
  Errc code = Errc::unbound_variable;
  std::string variable;
  std::string message;
  SourcePos pos;
};

struct RuleSet {
  std::vector<Rule> rules;
  /// CE type -> event types referenced by any of its rule bodies.
  std::map<std::string, std::set<std::string>> dependencies;
  std::vector<Diagnostic> warnings;

  bool defines(const std::string& type) const { return dependencies.count(type) != 0; }
};

// --- expressions ---------------------------------------------------------

/// Evaluates `e`; `lookup` returns nullptr for unbound variables. Yields
/// nullopt when a variable is unbound or the arithmetic is undefined.
template <class Lookup>
std::optional<AttrValue> eval_expr(const Expr& e, const Lookup& lookup);

std::optional<AttrValue> apply_arith(Expr::Kind kind, const AttrValue& a, const AttrValue& b);
bool compare_holds(CmpOp op, const AttrValue& a, const AttrValue& b);

template <class Lookup>
bool eval_predicate(const Predicate& p, const Lookup& lookup) {
  auto l = eval_expr(p.lhs, lookup);
  if (!l) return false;
  auto r = eval_expr(p.rhs, lookup);
  if (!r) return false;
  return compare_holds(p.op, *l, *r);
}

void collect_vars(const Expr& e, std::set<std::string>& out);
void collect_vars(const Predicate& p, std::set<std::string>& out);
std::set<std::string> atom_vars(const Pattern& atom);

/// Replaces variables found in `values` by constants.
Expr substitute(const Expr& e, const std::map<std::string, AttrValue>& values);
Predicate substitute(const Predicate& p, const std::map<std::string, AttrValue>& values);

// --- printing --------------------------------------------------------------

std::string to_string(const Expr& e);
std::string to_string(CmpOp op);
std::string to_string(const Predicate& p);
std::string to_string(const Pattern& p);
std::string to_string(const Rule& r);
std::string to_string(const RuleSet& rs);
std::string format_prob(double p);

// --- structural helpers ---------------------------------------------------

/// Flattens nested Seq/And/Or of the same kind into n-ary nodes. And stays a
/// native operator; duplicates are kept.
Pattern desugar_and(const Pattern& ast);

/// Variables definitely bound by positive atoms of `p` (Or intersects its
/// branches; Star and Not bind nothing outside themselves).
std::set<std::string> definitely_bound(const Pattern& p);

/// Every event type an expression references, negated atoms included.
void referenced_types(const Pattern& p, std::set<std::string>& out);

// --- template definitions --------------------------------------------------

template <class Lookup>
std::optional<AttrValue> eval_expr(const Expr& e, const Lookup& lookup) {
  switch (e.kind) {
    case Expr::Kind::var: {
      const AttrValue* v = lookup(e.name);
      if (!v) return std::nullopt;
      return *v;
    }
    case Expr::Kind::constant:
      return e.value;
    case Expr::Kind::neg: {
      auto v = eval_expr(e.args[0], lookup);
      if (!v) return std::nullopt;
      return apply_arith(Expr::Kind::sub, AttrValue{std::int64_t{0}}, *v);
    }
    default: {
      auto a = eval_expr(e.args[0], lookup);
      if (!a) return std::nullopt;
      auto b = eval_expr(e.args[1], lookup);
      if (!b) return std::nullopt;
      return apply_arith(e.kind, *a, *b);
    }
  }
}

}  // namespace probcer
