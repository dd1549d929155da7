#include "probcer/pattern.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

namespace probcer {

Expr Expr::variable(std::string name) {
  Expr e;
  e.kind = Kind::var;
  e.name = std::move(name);
  return e;
}

Expr Expr::constant(AttrValue value) {
  Expr e;
  e.kind = Kind::constant;
  e.value = std::move(value);
  return e;
}

Expr Expr::binary(Kind kind, Expr lhs, Expr rhs) {
  Expr e;
  e.kind = kind;
  e.args.push_back(std::move(lhs));
  e.args.push_back(std::move(rhs));
  return e;
}

Expr Expr::negate(Expr operand) {
  Expr e;
  e.kind = Kind::neg;
  e.args.push_back(std::move(operand));
  return e;
}

bool operator==(const Predicate& a, const Predicate& b) {
  return a.op == b.op && a.lhs == b.lhs && a.rhs == b.rhs;
}

bool operator==(const Mapping& a, const Mapping& b) { return a.target == b.target && a.expr == b.expr; }

bool operator==(const AltHead& a, const AltHead& b) { return a.prob == b.prob && a.mappings == b.mappings; }

bool operator==(const Pattern& a, const Pattern& b) {
  return a.kind == b.kind && a.event_type == b.event_type && a.args == b.args && a.children == b.children &&
         a.predicates == b.predicates && a.mappings == b.mappings && a.win_lo == b.win_lo && a.win_hi == b.win_hi;
}

bool operator==(const Rule& a, const Rule& b) {
  return a.head_type == b.head_type && a.head_vars == b.head_vars && a.body == b.body &&
         a.rule_prob == b.rule_prob && a.has_prob_prefix == b.has_prob_prefix && a.alt_heads == b.alt_heads;
}

std::vector<AltHead> Rule::effective_heads() const {
  if (alt_heads.empty()) return {AltHead{1.0, {}, pos}};
  return alt_heads;
}

Pattern Pattern::atom(std::string type, std::vector<Term> args) {
  Pattern p;
  p.kind = Kind::atom;
  p.event_type = std::move(type);
  p.args = std::move(args);
  return p;
}

Pattern Pattern::nary(Kind kind, std::vector<Pattern> children) {
  Pattern p;
  p.kind = kind;
  p.children = std::move(children);
  return p;
}

Pattern Pattern::unary(Kind kind, Pattern child) {
  Pattern p;
  p.kind = kind;
  p.children.push_back(std::move(child));
  return p;
}

Pattern Pattern::select(std::vector<Predicate> preds, Pattern child) {
  Pattern p = unary(Kind::select, std::move(child));
  p.predicates = std::move(preds);
  return p;
}

Pattern Pattern::produce(std::vector<Mapping> maps, Pattern child) {
  Pattern p = unary(Kind::produce, std::move(child));
  p.mappings = std::move(maps);
  return p;
}

Pattern Pattern::window(Timestamp lo, Timestamp hi, Pattern child) {
  Pattern p = unary(Kind::window, std::move(child));
  p.win_lo = lo;
  p.win_hi = hi;
  return p;
}

// --- expressions -----------------------------------------------------------

std::optional<AttrValue> apply_arith(Expr::Kind kind, const AttrValue& a, const AttrValue& b) {
  if (!is_numeric(a) || !is_numeric(b)) return std::nullopt;
  const auto* ia = std::get_if<std::int64_t>(&a);
  const auto* ib = std::get_if<std::int64_t>(&b);
  if (ia && ib) {
    switch (kind) {
      case Expr::Kind::add: return AttrValue{*ia + *ib};
      case Expr::Kind::sub: return AttrValue{*ia - *ib};
      case Expr::Kind::mul: return AttrValue{*ia * *ib};
      case Expr::Kind::div:
        if (*ib == 0) return std::nullopt;
        return AttrValue{*ia / *ib};
      default: return std::nullopt;
    }
  }
  double x = ia ? static_cast<double>(*ia) : std::get<double>(a);
  double y = ib ? static_cast<double>(*ib) : std::get<double>(b);
  switch (kind) {
    case Expr::Kind::add: return AttrValue{x + y};
    case Expr::Kind::sub: return AttrValue{x - y};
    case Expr::Kind::mul: return AttrValue{x * y};
    case Expr::Kind::div:
      if (y == 0.0) return std::nullopt;
      return AttrValue{x / y};
    default: return std::nullopt;
  }
}

bool compare_holds(CmpOp op, const AttrValue& a, const AttrValue& b) {
  auto c = compare_values(a, b);
  if (!c) return false;
  switch (op) {
    case CmpOp::eq: return *c == 0;
    case CmpOp::ne: return *c != 0;
    case CmpOp::lt: return *c < 0;
    case CmpOp::le: return *c <= 0;
    case CmpOp::gt: return *c > 0;
    case CmpOp::ge: return *c >= 0;
  }
  return false;
}

void collect_vars(const Expr& e, std::set<std::string>& out) {
  if (e.kind == Expr::Kind::var) out.insert(e.name);
  for (const auto& a : e.args) collect_vars(a, out);
}

void collect_vars(const Predicate& p, std::set<std::string>& out) {
  collect_vars(p.lhs, out);
  collect_vars(p.rhs, out);
}

std::set<std::string> atom_vars(const Pattern& atom) {
  std::set<std::string> vars;
  for (const auto& t : atom.args) {
    if (t.kind == Term::Kind::var) vars.insert(t.name);
  }
  return vars;
}

Expr substitute(const Expr& e, const std::map<std::string, AttrValue>& values) {
  if (e.kind == Expr::Kind::var) {
    auto it = values.find(e.name);
    return it == values.end() ? e : Expr::constant(it->second);
  }
  Expr out = e;
  for (auto& a : out.args) a = substitute(a, values);
  return out;
}

Predicate substitute(const Predicate& p, const std::map<std::string, AttrValue>& values) {
  return {p.op, substitute(p.lhs, values), substitute(p.rhs, values), p.pos};
}

// --- printing --------------------------------------------------------------

namespace {

bool is_keyword(const std::string& s) {
  return s == "not" || s == "and" || s == "where" || s == "emit" || s == "within" || s == "true" ||
         s == "false" || s == "next";
}

bool is_bare_symbol(const std::string& s) {
  if (s.empty() || !(s[0] >= 'a' && s[0] <= 'z')) return false;
  for (char c : s) {
    bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
    if (!ok) return false;
  }
  return !is_keyword(s);
}

std::string format_double(double d) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), d);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string format_constant(const AttrValue& v) {
  if (const auto* s = std::get_if<std::string>(&v)) {
    if (is_bare_symbol(*s)) return *s;
    std::string out = "\"";
    for (char c : *s) {
      if (c == '"' || c == '\\') out += '\\';
      out += c;
    }
    return out + "\"";
  }
  if (const auto* d = std::get_if<double>(&v)) return format_double(*d);
  if (const auto* b = std::get_if<bool>(&v)) return *b ? "true" : "false";
  return std::to_string(std::get<std::int64_t>(v));
}

int expr_level(const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::add:
    case Expr::Kind::sub: return 1;
    case Expr::Kind::mul:
    case Expr::Kind::div: return 2;
    case Expr::Kind::neg: return 3;
    default: return 4;
  }
}

std::string expr_str(const Expr& e, int min_level) {
  std::string s;
  switch (e.kind) {
    case Expr::Kind::var: s = e.name; break;
    case Expr::Kind::constant: {
      s = format_constant(e.value);
      // negative numeric literals would re-lex as unary minus
      if (!s.empty() && s[0] == '-' && min_level > 0) s = "(" + s + ")";
      break;
    }
    case Expr::Kind::neg: s = "-" + expr_str(e.args[0], 3); break;
    default: {
      int lvl = expr_level(e);
      const char* op = e.kind == Expr::Kind::add   ? " + "
                       : e.kind == Expr::Kind::sub ? " - "
                       : e.kind == Expr::Kind::mul ? " * "
                                                   : " / ";
      s = expr_str(e.args[0], lvl) + op + expr_str(e.args[1], lvl + 1);
      break;
    }
  }
  if (expr_level(e) < min_level) return "(" + s + ")";
  return s;
}

std::string term_str(const Term& t) {
  switch (t.kind) {
    case Term::Kind::var: return t.name;
    case Term::Kind::anon: return "_";
    case Term::Kind::constant: {
      std::string s = format_constant(t.value);
      return s;
    }
  }
  return "_";
}

// Printing precedence: 1 or, 2 seq, 3 and, 4 unary (not/star), 5 postfix, 6 primary.
int pattern_level(const Pattern& p) {
  switch (p.kind) {
    case Pattern::Kind::disj: return 1;
    case Pattern::Kind::seq: return 2;
    case Pattern::Kind::conj: return 3;
    case Pattern::Kind::neg:
    case Pattern::Kind::star: return 4;
    case Pattern::Kind::select:
    case Pattern::Kind::produce:
    case Pattern::Kind::window: return 5;
    case Pattern::Kind::atom: return 6;
  }
  return 6;
}

std::string pattern_str(const Pattern& p, int min_level);

std::string join_children(const Pattern& p, const char* sep, int child_level) {
  std::string s;
  for (std::size_t i = 0; i < p.children.size(); ++i) {
    if (i) s += sep;
    s += pattern_str(p.children[i], child_level);
  }
  return s;
}

std::string pattern_str(const Pattern& p, int min_level) {
  std::string s;
  switch (p.kind) {
    case Pattern::Kind::atom: {
      s = p.event_type + "(";
      for (std::size_t i = 0; i < p.args.size(); ++i) {
        if (i) s += ", ";
        s += term_str(p.args[i]);
      }
      s += ")";
      break;
    }
    // Same-kind n-ary children are parenthesized so nesting survives a reparse.
    case Pattern::Kind::disj: s = join_children(p, " | ", 2); break;
    case Pattern::Kind::seq: s = join_children(p, " ; ", 3); break;
    case Pattern::Kind::conj: s = join_children(p, " and ", 4); break;
    case Pattern::Kind::neg: s = "not " + pattern_str(p.child(), 5); break;
    case Pattern::Kind::star: s = pattern_str(p.child(), 5) + "*"; break;
    case Pattern::Kind::select: {
      s = pattern_str(p.child(), 5) + " where {";
      for (std::size_t i = 0; i < p.predicates.size(); ++i) {
        if (i) s += ", ";
        s += to_string(p.predicates[i]);
      }
      s += "}";
      break;
    }
    case Pattern::Kind::produce: {
      s = pattern_str(p.child(), 5) + " emit {";
      for (std::size_t i = 0; i < p.mappings.size(); ++i) {
        if (i) s += ", ";
        s += p.mappings[i].target + " = " + to_string(p.mappings[i].expr);
      }
      s += "}";
      break;
    }
    case Pattern::Kind::window:
      s = pattern_str(p.child(), 5) + " within [" + std::to_string(p.win_lo) + ", " + std::to_string(p.win_hi) +
          "]";
      break;
  }
  if (pattern_level(p) < min_level) return "(" + s + ")";
  return s;
}

}  // namespace

std::string format_prob(double p) { return format_double(p); }

std::string to_string(const Expr& e) { return expr_str(e, 0); }

std::string to_string(CmpOp op) {
  switch (op) {
    case CmpOp::eq: return "=";
    case CmpOp::ne: return "!=";
    case CmpOp::lt: return "<";
    case CmpOp::le: return "<=";
    case CmpOp::gt: return ">";
    case CmpOp::ge: return ">=";
  }
  return "?";
}

std::string to_string(const Predicate& p) { return to_string(p.lhs) + " " + to_string(p.op) + " " + to_string(p.rhs); }

std::string to_string(const Pattern& p) { return pattern_str(p, 0); }

std::string to_string(const Rule& r) {
  std::string s;
  if (r.has_prob_prefix) s += format_double(r.rule_prob) + "::";
  s += r.head_type + "(";
  for (std::size_t i = 0; i < r.head_vars.size(); ++i) {
    if (i) s += ", ";
    s += r.head_vars[i];
  }
  s += ") ::= " + to_string(r.body);
  for (const auto& alt : r.alt_heads) {
    s += " ;; " + format_double(alt.prob) + "::{";
    for (std::size_t i = 0; i < alt.mappings.size(); ++i) {
      if (i) s += ", ";
      s += alt.mappings[i].target + " = " + to_string(alt.mappings[i].expr);
    }
    s += "}";
  }
  return s;
}

std::string to_string(const RuleSet& rs) {
  std::string s;
  for (const auto& r : rs.rules) s += to_string(r) + "\n";
  return s;
}

// --- structural helpers ---------------------------------------------------

Pattern desugar_and(const Pattern& ast) {
  Pattern out = ast;
  out.children.clear();
  for (const auto& c : ast.children) {
    Pattern norm = desugar_and(c);
    bool flatten = (ast.kind == Pattern::Kind::seq || ast.kind == Pattern::Kind::conj ||
                    ast.kind == Pattern::Kind::disj) &&
                   norm.kind == ast.kind;
    if (flatten) {
      for (auto& g : norm.children) out.children.push_back(std::move(g));
    } else {
      out.children.push_back(std::move(norm));
    }
  }
  return out;
}

std::set<std::string> definitely_bound(const Pattern& p) {
  switch (p.kind) {
    case Pattern::Kind::atom: return atom_vars(p);
    case Pattern::Kind::seq:
    case Pattern::Kind::conj: {
      std::set<std::string> out;
      for (const auto& c : p.children) {
        auto b = definitely_bound(c);
        out.insert(b.begin(), b.end());
      }
      return out;
    }
    case Pattern::Kind::disj: {
      std::set<std::string> out = definitely_bound(p.children.front());
      for (std::size_t i = 1; i < p.children.size(); ++i) {
        auto b = definitely_bound(p.children[i]);
        std::set<std::string> both;
        std::set_intersection(out.begin(), out.end(), b.begin(), b.end(), std::inserter(both, both.begin()));
        out = std::move(both);
      }
      return out;
    }
    case Pattern::Kind::star:
    case Pattern::Kind::neg: return {};
    case Pattern::Kind::select:
    case Pattern::Kind::window: return definitely_bound(p.child());
    case Pattern::Kind::produce: {
      auto out = definitely_bound(p.child());
      for (const auto& m : p.mappings) out.insert(m.target);
      return out;
    }
  }
  return {};
}

void referenced_types(const Pattern& p, std::set<std::string>& out) {
  if (p.kind == Pattern::Kind::atom) out.insert(p.event_type);
  for (const auto& c : p.children) referenced_types(c, out);
}

}  // namespace probcer
