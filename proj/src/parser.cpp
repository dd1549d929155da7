#include "probcer/parser.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <functional>
#include <map>

namespace probcer {

namespace {

enum class Tok {
  ident,
  integer,
  real,
  string,
  define,      // ::=
  prob_sep,    // ::
  alt_sep,     // ;;
  semicolon,
  bar,
  star,
  lparen,
  rparen,
  lbrace,
  rbrace,
  lbracket,
  rbracket,
  comma,
  dot,
  eq,
  ne,
  lt,
  le,
  gt,
  ge,
  plus,
  minus,
  slash,
  end,
};

struct Token {
  Tok kind;
  std::string text;
  SourcePos pos;
};

bool is_var_name(const std::string& s) { return !s.empty() && (std::isupper(static_cast<unsigned char>(s[0])) || s[0] == '_'); }

[[noreturn]] void syntax_error(const SourcePos& pos, const std::string& msg) {
  throw Error(Errc::syntax_error,
              "syntax error at " + std::to_string(pos.line) + ":" + std::to_string(pos.col) + ": " + msg, pos.line,
              pos.col);
}

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      skip_space();
      SourcePos pos{line_, col_};
      if (at_end()) {
        out.push_back({Tok::end, "", pos});
        return out;
      }
      char c = peek();
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        std::string s;
        while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_')) s += get();
        out.push_back({Tok::ident, s, pos});
      } else if (std::isdigit(static_cast<unsigned char>(c))) {
        out.push_back(number(pos));
      } else if (c == '"') {
        get();
        std::string s;
        while (true) {
          if (at_end() || peek() == '\n') syntax_error(pos, "unterminated string");
          char d = get();
          if (d == '"') break;
          if (d == '\\') {
            if (at_end()) syntax_error(pos, "unterminated string");
            d = get();
          }
          s += d;
        }
        out.push_back({Tok::string, s, pos});
      } else {
        out.push_back(punct(pos));
      }
    }
  }

 private:
  bool at_end() const { return i_ >= src_.size(); }
  char peek(std::size_t k = 0) const { return i_ + k < src_.size() ? src_[i_ + k] : '\0'; }
  char get() {
    char c = src_[i_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return c;
  }

  void skip_space() {
    while (!at_end()) {
      char c = peek();
      if (std::isspace(static_cast<unsigned char>(c))) {
        get();
      } else if (c == '#' || (c == '/' && peek(1) == '/')) {
        while (!at_end() && peek() != '\n') get();
      } else {
        return;
      }
    }
  }

  Token number(SourcePos pos) {
    std::string s;
    bool real = false;
    while (std::isdigit(static_cast<unsigned char>(peek()))) s += get();
    if (peek() == '.' && std::isdigit(static_cast<unsigned char>(peek(1)))) {
      real = true;
      s += get();
      while (std::isdigit(static_cast<unsigned char>(peek()))) s += get();
    }
    if ((peek() == 'e' || peek() == 'E') &&
        (std::isdigit(static_cast<unsigned char>(peek(1))) ||
         ((peek(1) == '+' || peek(1) == '-') && std::isdigit(static_cast<unsigned char>(peek(2)))))) {
      real = true;
      s += get();
      if (peek() == '+' || peek() == '-') s += get();
      while (std::isdigit(static_cast<unsigned char>(peek()))) s += get();
    }
    return {real ? Tok::real : Tok::integer, s, pos};
  }

  Token punct(SourcePos pos) {
    auto two = [&](char a, char b) { return peek() == a && peek(1) == b; };
    if (peek() == ':' && peek(1) == ':' && peek(2) == '=') {
      get(), get(), get();
      return {Tok::define, "::=", pos};
    }
    if (two(':', ':')) return take(2, Tok::prob_sep, pos);
    if (two(';', ';')) return take(2, Tok::alt_sep, pos);
    if (two('!', '=')) return take(2, Tok::ne, pos);
    if (two('<', '=')) return take(2, Tok::le, pos);
    if (two('>', '=')) return take(2, Tok::ge, pos);
    if (two('=', '=')) return take(2, Tok::eq, pos);
    switch (peek()) {
      case ';': return take(1, Tok::semicolon, pos);
      case '|': return take(1, Tok::bar, pos);
      case '*': return take(1, Tok::star, pos);
      case '(': return take(1, Tok::lparen, pos);
      case ')': return take(1, Tok::rparen, pos);
      case '{': return take(1, Tok::lbrace, pos);
      case '}': return take(1, Tok::rbrace, pos);
      case '[': return take(1, Tok::lbracket, pos);
      case ']': return take(1, Tok::rbracket, pos);
      case ',': return take(1, Tok::comma, pos);
      case '.': return take(1, Tok::dot, pos);
      case '=': return take(1, Tok::eq, pos);
      case '<': return take(1, Tok::lt, pos);
      case '>': return take(1, Tok::gt, pos);
      case '+': return take(1, Tok::plus, pos);
      case '-': return take(1, Tok::minus, pos);
      case '/': return take(1, Tok::slash, pos);
      default: break;
    }
    syntax_error(pos, std::string("unexpected character '") + peek() + "'");
  }

  Token take(int n, Tok kind, SourcePos pos) {
    std::string s;
    for (int k = 0; k < n; ++k) s += get();
    return {kind, s, pos};
  }

  std::string_view src_;
  std::size_t i_ = 0;
  int line_ = 1;
  int col_ = 1;
};

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  std::vector<Rule> rules() {
    std::vector<Rule> out;
    while (cur().kind != Tok::end) out.push_back(rule());
    return out;
  }

 private:
  const Token& cur() const { return toks_[i_]; }
  const Token& ahead(std::size_t k) const { return toks_[std::min(i_ + k, toks_.size() - 1)]; }
  Token next() { return toks_[i_ == toks_.size() - 1 ? i_ : i_++]; }
  bool accept(Tok k) {
    if (cur().kind != k) return false;
    next();
    return true;
  }
  bool accept_kw(const char* kw) {
    if (cur().kind == Tok::ident && cur().text == kw) {
      next();
      return true;
    }
    return false;
  }
  Token expect(Tok k, const char* what) {
    if (cur().kind != k) syntax_error(cur().pos, std::string("expected ") + what + describe());
    return next();
  }
  std::string describe() const {
    if (cur().kind == Tok::end) return ", found end of input";
    return ", found '" + cur().text + "'";
  }

  double number_value(const Token& t) {
    double v = 0;
    auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (res.ec != std::errc()) syntax_error(t.pos, "bad number '" + t.text + "'");
    return v;
  }

  std::int64_t int_value(const Token& t, bool negative) {
    std::int64_t v = 0;
    auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (res.ec != std::errc()) syntax_error(t.pos, "integer out of range '" + t.text + "'");
    return negative ? -v : v;
  }

  double probability() {
    const Token& t = cur();
    if (t.kind != Tok::integer && t.kind != Tok::real) syntax_error(t.pos, "expected probability" + describe());
    next();
    return number_value(t);
  }

  Rule rule() {
    Rule r;
    r.pos = cur().pos;
    if (cur().kind == Tok::integer || cur().kind == Tok::real) {
      r.rule_prob = probability();
      r.has_prob_prefix = true;
      expect(Tok::prob_sep, "'::'");
    }
    Token head = expect(Tok::ident, "rule head");
    if (is_var_name(head.text) || keyword(head.text)) syntax_error(head.pos, "rule head must be a lower-case name");
    r.head_type = head.text;
    expect(Tok::lparen, "'('");
    do {
      Token v = expect(Tok::ident, "head variable");
      if (!is_var_name(v.text) || v.text == "_") syntax_error(v.pos, "head arguments must be named variables");
      r.head_vars.push_back(v.text);
    } while (accept(Tok::comma));
    expect(Tok::rparen, "')'");
    expect(Tok::define, "'::='");
    r.body = expr();
    while (cur().kind == Tok::alt_sep) {
      next();
      AltHead alt;
      alt.pos = cur().pos;
      alt.prob = probability();
      expect(Tok::prob_sep, "'::'");
      expect(Tok::lbrace, "'{'");
      if (cur().kind != Tok::rbrace) alt.mappings = mappings();
      expect(Tok::rbrace, "'}'");
      r.alt_heads.push_back(std::move(alt));
    }
    accept(Tok::dot);
    return r;
  }

  static bool keyword(const std::string& s) {
    return s == "not" || s == "and" || s == "where" || s == "emit" || s == "within";
  }

  Pattern expr() {
    SourcePos pos = cur().pos;
    std::vector<Pattern> parts{seq_expr()};
    while (accept(Tok::bar)) parts.push_back(seq_expr());
    if (parts.size() == 1) return std::move(parts.front());
    Pattern p = Pattern::nary(Pattern::Kind::disj, std::move(parts));
    p.pos = pos;
    return p;
  }

  Pattern seq_expr() {
    SourcePos pos = cur().pos;
    std::vector<Pattern> parts{and_expr()};
    while (cur().kind == Tok::semicolon) {
      next();
      parts.push_back(and_expr());
    }
    if (parts.size() == 1) return std::move(parts.front());
    Pattern p = Pattern::nary(Pattern::Kind::seq, std::move(parts));
    p.pos = pos;
    return p;
  }

  Pattern and_expr() {
    SourcePos pos = cur().pos;
    std::vector<Pattern> parts{unary()};
    while (accept_kw("and")) parts.push_back(unary());
    if (parts.size() == 1) return std::move(parts.front());
    Pattern p = Pattern::nary(Pattern::Kind::conj, std::move(parts));
    p.pos = pos;
    return p;
  }

  Pattern unary() {
    SourcePos pos = cur().pos;
    if (accept_kw("not")) {
      Pattern p = Pattern::unary(Pattern::Kind::neg, postfix());
      p.pos = pos;
      return p;
    }
    Pattern p = postfix();
    if (accept(Tok::star)) {
      p = Pattern::unary(Pattern::Kind::star, std::move(p));
      p.pos = pos;
    }
    return p;
  }

  Pattern postfix() {
    SourcePos pos = cur().pos;
    Pattern p = primary();
    while (true) {
      if (accept_kw("where")) {
        expect(Tok::lbrace, "'{'");
        std::vector<Predicate> preds;
        if (cur().kind != Tok::rbrace) {
          do preds.push_back(predicate());
          while (accept(Tok::comma));
        }
        expect(Tok::rbrace, "'}'");
        p = Pattern::select(std::move(preds), std::move(p));
      } else if (accept_kw("emit")) {
        expect(Tok::lbrace, "'{'");
        std::vector<Mapping> maps;
        if (cur().kind != Tok::rbrace) maps = mappings();
        expect(Tok::rbrace, "'}'");
        p = Pattern::produce(std::move(maps), std::move(p));
      } else if (accept_kw("within")) {
        expect(Tok::lbracket, "'['");
        Timestamp lo = signed_int();
        expect(Tok::comma, "','");
        Timestamp hi = signed_int();
        Token close = expect(Tok::rbracket, "']'");
        if (lo < 0 || hi < lo) syntax_error(close.pos, "window bounds must satisfy 0 <= lo <= hi");
        p = Pattern::window(lo, hi, std::move(p));
      } else {
        break;
      }
      p.pos = pos;
    }
    return p;
  }

  Timestamp signed_int() {
    bool neg = accept(Tok::minus);
    Token t = expect(Tok::integer, "integer");
    return int_value(t, neg);
  }

  Pattern primary() {
    SourcePos pos = cur().pos;
    if (accept(Tok::lparen)) {
      Pattern p = expr();
      expect(Tok::rparen, "')'");
      return p;
    }
    Token name = expect(Tok::ident, "event atom");
    if (is_var_name(name.text) || keyword(name.text)) syntax_error(name.pos, "event type must be a lower-case name");
    expect(Tok::lparen, "'('");
    std::vector<Term> args;
    do args.push_back(term());
    while (accept(Tok::comma));
    expect(Tok::rparen, "')'");
    Pattern p = Pattern::atom(name.text, std::move(args));
    p.pos = pos;
    return p;
  }

  Term term() {
    const Token& t = cur();
    switch (t.kind) {
      case Tok::ident: {
        next();
        if (t.text == "_") return Term::anonymous();
        if (is_var_name(t.text)) return Term::variable(t.text);
        if (t.text == "true") return Term::constant(true);
        if (t.text == "false") return Term::constant(false);
        return Term::constant(t.text);
      }
      case Tok::string: next(); return Term::constant(t.text);
      case Tok::minus:
      case Tok::integer:
      case Tok::real: return Term::constant(number_literal());
      default: syntax_error(t.pos, "expected atom argument" + describe());
    }
  }

  AttrValue number_literal() {
    bool neg = accept(Tok::minus);
    const Token& t = cur();
    if (t.kind == Tok::integer) {
      next();
      return int_value(t, neg);
    }
    if (t.kind == Tok::real) {
      next();
      double v = number_value(t);
      return neg ? -v : v;
    }
    syntax_error(t.pos, "expected number" + describe());
  }

  std::vector<Mapping> mappings() {
    std::vector<Mapping> out;
    do {
      Mapping m;
      m.pos = cur().pos;
      Token v = expect(Tok::ident, "mapping target");
      if (!is_var_name(v.text) || v.text == "_") syntax_error(v.pos, "mapping target must be a variable");
      m.target = v.text;
      expect(Tok::eq, "'='");
      m.expr = arith();
      out.push_back(std::move(m));
    } while (accept(Tok::comma));
    return out;
  }

  Predicate predicate() {
    Predicate p;
    p.pos = cur().pos;
    // next(A, B): A is the time point immediately after B
    if (cur().kind == Tok::ident && cur().text == "next" && ahead(1).kind == Tok::lparen) {
      next();
      next();
      Expr a = arith();
      expect(Tok::comma, "','");
      Expr b = arith();
      expect(Tok::rparen, "')'");
      p.op = CmpOp::eq;
      p.lhs = std::move(a);
      p.rhs = Expr::binary(Expr::Kind::add, std::move(b), Expr::constant(std::int64_t{1}));
      return p;
    }
    p.lhs = arith();
    switch (cur().kind) {
      case Tok::eq: p.op = CmpOp::eq; break;
      case Tok::ne: p.op = CmpOp::ne; break;
      case Tok::lt: p.op = CmpOp::lt; break;
      case Tok::le: p.op = CmpOp::le; break;
      case Tok::gt: p.op = CmpOp::gt; break;
      case Tok::ge: p.op = CmpOp::ge; break;
      default: syntax_error(cur().pos, "expected comparison operator" + describe());
    }
    next();
    p.rhs = arith();
    return p;
  }

  Expr arith() {
    Expr e = term_expr();
    while (cur().kind == Tok::plus || cur().kind == Tok::minus) {
      auto kind = next().kind == Tok::plus ? Expr::Kind::add : Expr::Kind::sub;
      e = Expr::binary(kind, std::move(e), term_expr());
    }
    return e;
  }

  Expr term_expr() {
    Expr e = factor();
    while (cur().kind == Tok::star || cur().kind == Tok::slash) {
      auto kind = next().kind == Tok::star ? Expr::Kind::mul : Expr::Kind::div;
      e = Expr::binary(kind, std::move(e), factor());
    }
    return e;
  }

  Expr factor() {
    const Token& t = cur();
    switch (t.kind) {
      case Tok::minus: {
        if (ahead(1).kind == Tok::integer || ahead(1).kind == Tok::real) return Expr::constant(number_literal());
        next();
        return Expr::negate(factor());
      }
      case Tok::integer:
      case Tok::real: return Expr::constant(number_literal());
      case Tok::string: next(); return Expr::constant(t.text);
      case Tok::lparen: {
        next();
        Expr e = arith();
        expect(Tok::rparen, "')'");
        return e;
      }
      case Tok::ident: {
        next();
        if (t.text == "_") syntax_error(t.pos, "'_' cannot be used in an expression");
        if (is_var_name(t.text)) return Expr::variable(t.text);
        if (t.text == "true") return Expr::constant(true);
        if (t.text == "false") return Expr::constant(false);
        return Expr::constant(t.text);
      }
      default: syntax_error(t.pos, "expected expression" + describe());
    }
  }

  std::vector<Token> toks_;
  std::size_t i_ = 0;
};

// --- validation ------------------------------------------------------------

void check_var_scopes(const Pattern& p, const std::set<std::string>& available, std::vector<Diagnostic>& out) {
  auto report = [&](const std::set<std::string>& used, const SourcePos& pos, const char* where) {
    for (const auto& v : used) {
      if (!available.count(v)) {
        out.push_back({Diagnostic::Severity::error, Errc::unbound_variable, v,
                       "variable " + v + " used in " + where + " is not bound", pos});
      }
    }
  };
  switch (p.kind) {
    case Pattern::Kind::select:
      for (const auto& pred : p.predicates) {
        std::set<std::string> used;
        collect_vars(pred, used);
        report(used, pred.pos.line ? pred.pos : p.pos, "a selection");
      }
      break;
    case Pattern::Kind::produce:
      for (const auto& m : p.mappings) {
        std::set<std::string> used;
        collect_vars(m.expr, used);
        report(used, m.pos.line ? m.pos : p.pos, "a production");
      }
      break;
    default: break;
  }
  for (const auto& c : p.children) {
    std::set<std::string> inner = available;
    if (p.kind == Pattern::Kind::neg) {
      // a negated atom may introduce existential variables for its own selection
      std::function<void(const Pattern&)> add_atoms = [&](const Pattern& q) {
        if (q.kind == Pattern::Kind::atom) {
          auto vs = atom_vars(q);
          inner.insert(vs.begin(), vs.end());
        }
        for (const auto& g : q.children) add_atoms(g);
      };
      add_atoms(c);
    } else {
      auto b = definitely_bound(c);
      inner.insert(b.begin(), b.end());
      if (c.kind == Pattern::Kind::star) {
        auto local = definitely_bound(c.child());
        inner.insert(local.begin(), local.end());
      }
    }
    check_var_scopes(c, inner, out);
  }
}

void collect_emit_targets(const Pattern& p, std::vector<const Mapping*>& out) {
  if (p.kind == Pattern::Kind::produce) {
    for (const auto& m : p.mappings) out.push_back(&m);
  }
  for (const auto& c : p.children) collect_emit_targets(c, out);
}

void collect_atom_vars(const Pattern& p, std::set<std::string>& out) {
  if (p.kind == Pattern::Kind::atom) {
    auto vs = atom_vars(p);
    out.insert(vs.begin(), vs.end());
  }
  for (const auto& c : p.children) collect_atom_vars(c, out);
}

[[noreturn]] void rule_error(Errc code, const std::string& msg, const SourcePos& pos) {
  throw Error(code, msg + " (line " + std::to_string(pos.line) + ")", pos.line, pos.col);
}

void check_structure(const Pattern& p, bool inside_star) {
  switch (p.kind) {
    case Pattern::Kind::atom:
      if (p.args.empty()) rule_error(Errc::syntax_error, "atom " + p.event_type + " needs a time argument", p.pos);
      break;
    case Pattern::Kind::neg: {
      const Pattern& c = p.child();
      bool ok = c.kind == Pattern::Kind::atom ||
                (c.kind == Pattern::Kind::select && c.child().kind == Pattern::Kind::atom);
      if (!ok) rule_error(Errc::bad_negation, "'not' applies to a single atom, optionally with 'where'", p.pos);
      break;
    }
    case Pattern::Kind::produce:
      if (inside_star) rule_error(Errc::unsupported_nesting, "'emit' is not allowed under '*'", p.pos);
      break;
    default: break;
  }
  for (const auto& c : p.children) check_structure(c, inside_star || p.kind == Pattern::Kind::star);
}

void validate_rule(const Rule& r, std::vector<Diagnostic>& warnings) {
  check_structure(r.body, false);
  if (!(r.rule_prob > 0.0 && r.rule_prob <= 1.0 + kProbTolerance)) {
    rule_error(Errc::syntax_error, "rule probability must lie in (0, 1]", r.pos);
  }
  double alt_sum = 0.0;
  for (const auto& alt : r.alt_heads) {
    if (!(alt.prob >= 0.0 && alt.prob <= 1.0)) rule_error(Errc::syntax_error, "head probability must lie in [0, 1]", alt.pos);
    alt_sum += alt.prob;
  }
  if (alt_sum > 1.0 + kProbTolerance) {
    rule_error(Errc::prob_sum_exceeded, "alternative head probabilities of " + r.head_type + " exceed 1", r.pos);
  }
  {
    std::set<std::string> seen;
    for (const auto& v : r.head_vars) {
      if (!seen.insert(v).second) rule_error(Errc::syntax_error, "head variable " + v + " repeated", r.pos);
    }
  }

  // emit targets introduce fresh names only
  std::vector<const Mapping*> targets;
  collect_emit_targets(r.body, targets);
  std::set<std::string> atom_bound;
  collect_atom_vars(r.body, atom_bound);
  std::set<std::string> emitted;
  for (const auto* m : targets) {
    if (atom_bound.count(m->target) || !emitted.insert(m->target).second) {
      rule_error(Errc::unbound_variable, "emit target " + m->target + " is already bound", m->pos);
    }
  }

  auto diags = validate_bindings(r);
  if (!diags.empty()) throw Error(Errc::unbound_variable, diags.front().message, diags.front().pos.line, diags.front().pos.col);

  if (r.has_prob_prefix && !r.alt_heads.empty()) {
    warnings.push_back({Diagnostic::Severity::warning, Errc::syntax_error, "",
                        "rule " + r.head_type +
                            " has both a probability prefix and alternative heads; probabilities are multiplied",
                        r.pos});
  }
}

}  // namespace

std::vector<Diagnostic> validate_bindings(const Rule& rule) {
  std::vector<Diagnostic> out;
  std::set<std::string> bound = definitely_bound(rule.body);
  check_var_scopes(rule.body, bound, out);

  auto heads = rule.effective_heads();
  for (const auto& alt : heads) {
    std::set<std::string> avail = bound;
    for (const auto& m : alt.mappings) {
      std::set<std::string> used;
      collect_vars(m.expr, used);
      for (const auto& v : used) {
        if (!avail.count(v)) {
          out.push_back({Diagnostic::Severity::error, Errc::unbound_variable, v,
                         "variable " + v + " used in a head alternative is not bound", m.pos});
        }
      }
      avail.insert(m.target);
    }
    for (const auto& v : rule.head_vars) {
      if (!avail.count(v)) {
        bool dup = std::any_of(out.begin(), out.end(), [&](const Diagnostic& d) { return d.variable == v; });
        if (!dup) {
          out.push_back({Diagnostic::Severity::error, Errc::unbound_variable, v,
                         "head variable " + v + " of " + rule.head_type + " is not bound", rule.pos});
        }
      }
    }
  }
  return out;
}

RuleSet parse_rules(std::string_view text) {
  Parser parser(Lexer(text).run());
  RuleSet rs;
  rs.rules = parser.rules();

  std::map<std::string, std::size_t> arity;
  for (const auto& r : rs.rules) {
    auto [it, fresh] = arity.emplace(r.head_type, r.head_vars.size());
    if (!fresh && it->second != r.head_vars.size()) {
      rule_error(Errc::duplicate_head_without_disjunction_marker,
                 "rules for " + r.head_type + " disagree on head arity", r.pos);
    }
    std::set<std::string> refs;
    referenced_types(r.body, refs);
    rs.dependencies[r.head_type].insert(refs.begin(), refs.end());
  }

  // Recursive definitions are rejected; colour-marking DFS over defined types.
  std::map<std::string, int> colour;
  std::function<void(const std::string&)> visit = [&](const std::string& t) {
    colour[t] = 1;
    for (const auto& d : rs.dependencies.at(t)) {
      if (!rs.defines(d)) continue;
      if (colour[d] == 1) {
        const Rule& r = *std::find_if(rs.rules.begin(), rs.rules.end(),
                                      [&](const Rule& x) { return x.head_type == t; });
        rule_error(Errc::cyclic_hierarchy, "recursive definition: " + t + " depends on " + d, r.pos);
      }
      if (colour[d] == 0) visit(d);
    }
    colour[t] = 2;
  };
  for (const auto& [t, deps] : rs.dependencies) {
    if (colour[t] == 0) visit(t);
  }
  for (const auto& r : rs.rules) validate_rule(r, rs.warnings);
  return rs;
}

}  // namespace probcer
