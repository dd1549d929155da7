#include <doctest.h>

#include <random>

#include "probcer/error.hpp"
#include "probcer/parser.hpp"
#include "probcer/pattern.hpp"
#include "random_cases.hpp"

using namespace probcer;

namespace {

const char* kAssist =
    "assist(X,Y,T3) ::= hasBall(X,T1); hasBall(Y,T2); shooting(Y,T3); ballInNet(T4) where {X != Y}";

const char* kTraveling =
    "traveling(P,T) ::= ((hasBall(P1,T1) and takesStep(P1,T1) and not dribbling(P1,T1)); "
    "(hasBall(P2,T2) and takesStep(P2,T2) and not dribbling(P2,T2)); "
    "(hasBall(P3,T3) and takesStep(P3,T3) and not dribbling(P3,T3))) "
    "where {P1 = P2, P2 = P3} emit {P = P3, T = T3}";

Errc parse_error(const std::string& text) {
  try {
    parse_rules(text);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected a parse error for: " << text);
  return Errc::config_error;
}

Pattern atom(const char* type) { return Pattern::atom(type, {Term::variable("T")}); }

}  // namespace

TEST_CASE("the assist rule parses into a filtered four-element sequence") {
  RuleSet rs = parse_rules(kAssist);
  REQUIRE(rs.rules.size() == 1);
  const Rule& r = rs.rules[0];
  CHECK(r.head_type == "assist");
  CHECK(r.head_vars == std::vector<std::string>{"X", "Y", "T3"});
  const Pattern& seq = r.body;
  REQUIRE(seq.kind == Pattern::Kind::seq);
  REQUIRE(seq.children.size() == 4);
  CHECK(seq.children[0].event_type == "hasBall");
  REQUIRE(seq.children[3].kind == Pattern::Kind::select);
  CHECK(seq.children[3].predicates.size() == 1);
  CHECK(seq.children[3].child().event_type == "ballInNet");
  CHECK(rs.dependencies.at("assist") == std::set<std::string>{"hasBall", "shooting", "ballInNet"});
}

TEST_CASE("self-referencing rules are cyclic") {
  CHECK(parse_error("0.6::close_m(X,Y,T) ::= close_m(X,Y,Tp) where {next(T,Tp)}") == Errc::cyclic_hierarchy);
  CHECK(parse_error("a(T) ::= b(T)\nb(T) ::= a(T)") == Errc::cyclic_hierarchy);
}

TEST_CASE("empty input is an empty rule set") {
  CHECK(parse_rules("").rules.empty());
  CHECK(parse_rules("  \n\n").rules.empty());
}

TEST_CASE("syntax errors carry a position") {
  try {
    parse_rules("a(T) ::= b(T) ;");
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::syntax_error);
    CHECK(e.line() == 1);
    CHECK(e.col() > 0);
  }
  CHECK(parse_error("a(T) := b(T)") == Errc::syntax_error);
  CHECK(parse_error("a(T) ::= b(T) within [5,2]") == Errc::syntax_error);
}

TEST_CASE("unbound head or predicate variables are rejected") {
  CHECK(parse_error("a(Z,T) ::= b(X,T)") == Errc::unbound_variable);
  CHECK(parse_error("a(T) ::= b(X,T) where {Y > 1}") == Errc::unbound_variable);
  CHECK(parse_error("a(T) ::= (b(X,T) | c(T)) where {X > 1}") == Errc::unbound_variable);
}

TEST_CASE("validate_bindings diagnostics") {
  CHECK(validate_bindings(parse_rules(kAssist).rules[0]).empty());
  CHECK(validate_bindings(parse_rules(kTraveling).rules[0]).empty());

  Rule r = parse_rules("a(X,T) ::= b(X,T)").rules[0];
  r.head_vars = {"Z", "T"};
  auto d = validate_bindings(r);
  REQUIRE(d.size() == 1);
  CHECK(d[0].code == Errc::unbound_variable);
  CHECK(d[0].variable == "Z");
}

TEST_CASE("rules sharing a head form one group unless their arity differs") {
  RuleSet rs = parse_rules(
      "0.9::avoid(X,Y,T2) ::= waiting(X,Y,T1); crossover_dribble(Y,T2)\n"
      "0.7::avoid(X,Y,T2) ::= waiting(X,Y,T1); running(Y,T2)\n");
  CHECK(rs.rules.size() == 2);
  CHECK(rs.rules[0].rule_prob == 0.9);
  CHECK(rs.rules[1].rule_prob == 0.7);
  CHECK(parse_error("a(X,T) ::= b(X,T)\na(T) ::= c(T)") == Errc::duplicate_head_without_disjunction_marker);
}

TEST_CASE("a probability prefix together with alternative heads is flagged") {
  RuleSet rs = parse_rules("0.5::a(X,T) ::= b(T) ;; 0.6::{X = 1} ;; 0.4::{X = 2}");
  CHECK(rs.warnings.size() == 1);
  CHECK(rs.rules[0].effective_heads().size() == 2);
  CHECK(parse_rules("a(X,T) ::= b(T) ;; 0.6::{X = 1} ;; 0.4::{X = 2}").warnings.empty());
  CHECK(parse_error("a(X,T) ::= b(T) ;; 0.6::{X = 1} ;; 0.7::{X = 2}") == Errc::prob_sum_exceeded);
}

TEST_CASE("operator precedence") {
  Pattern p = parse_rules("h(T) ::= a(T); b(T) | c(T) and d(T)").rules[0].body;
  REQUIRE(p.kind == Pattern::Kind::disj);
  CHECK(p.children[0].kind == Pattern::Kind::seq);
  CHECK(p.children[1].kind == Pattern::Kind::conj);
  Pattern s = parse_rules("h(T2) ::= a(T1); b(T)*; c(T2)").rules[0].body;
  REQUIRE(s.kind == Pattern::Kind::seq);
  CHECK(s.children[1].kind == Pattern::Kind::star);
}

TEST_CASE("next() desugars to a successor constraint") {
  Pattern p = parse_rules("h(T) ::= a(T); b(T2) where {next(T2,T)}").rules[0].body;
  REQUIRE(p.kind == Pattern::Kind::seq);
  REQUIRE(p.children[1].kind == Pattern::Kind::select);
  CHECK(to_string(p.children[1].predicates[0]) == "T2 = T + 1");
}

TEST_CASE("desugar_and flattens nested operators of one kind") {
  Pattern nested = Pattern::nary(Pattern::Kind::conj,
                                 {atom("a"), Pattern::nary(Pattern::Kind::conj, {atom("b"), atom("c")})});
  Pattern flat = desugar_and(nested);
  CHECK(flat.kind == Pattern::Kind::conj);
  CHECK(flat.children.size() == 3);

  Pattern seq = Pattern::nary(Pattern::Kind::seq,
                              {Pattern::nary(Pattern::Kind::seq, {atom("a"), atom("b")}), atom("c")});
  CHECK(desugar_and(seq).children.size() == 3);

  Pattern dup = Pattern::nary(Pattern::Kind::disj, {atom("a"), atom("a")});
  CHECK(desugar_and(dup).children.size() == 2);
}

TEST_CASE("printing and re-parsing is a fixed point") {
  std::vector<std::string> texts = {
      kAssist,
      kTraveling,
      "0.9::avoid(X,Y,T2) ::= waiting(X,Y,T1); crossover_dribble(Y,T2)",
      "h(K,T) ::= (a(K,T1); b(_,T2)*; c(K,T)) within [0,5]",
      "h(K,T) ::= a(K,T1); not n(K,_); b(K,T)",
      "h(X,T) ::= a(\"s\",T) ;; 0.25::{X = 1.5} ;; 0.5::{X = true}",
      "h(T) ::= (a(T1) where {T1 * 2 - 3 >= -1, T1 / 2 < 4}) ; b(T) within [3,9]",
  };
  for (const auto& t : texts) {
    RuleSet a = parse_rules(t);
    RuleSet b = parse_rules(to_string(a));
    INFO(t);
    CHECK(a.rules == b.rules);
    CHECK(to_string(a) == to_string(b));
  }
  testing::CaseGenerator gen(5);
  testing::CaseOptions opt;
  opt.kleene = true;
  for (int i = 0; i < 200; ++i) {
    auto c = gen.single_level(opt);
    RuleSet again = parse_rules(to_string(c.rules));
    INFO(c.rules_text);
    CHECK(again.rules == c.rules.rules);
  }
}

TEST_CASE("random input either parses or fails with a diagnostic") {
  std::mt19937_64 rng(9);
  const std::string alphabet = "ab(),;|*_TXY01.:=<>!{}[] \nwherndmitoc\"";
  std::string seed = std::string(kAssist) + "\n" + kTraveling;
  for (int i = 0; i < 3000; ++i) {
    std::string s = seed;
    int edits = 1 + static_cast<int>(rng() % 6);
    for (int k = 0; k < edits; ++k) {
      std::size_t pos = rng() % (s.size() + 1);
      switch (rng() % 3) {
        case 0: s.insert(pos, 1, alphabet[rng() % alphabet.size()]); break;
        case 1:
          if (pos < s.size()) s.erase(pos, 1);
          break;
        default:
          if (pos < s.size()) s[pos] = alphabet[rng() % alphabet.size()];
      }
    }
    try {
      parse_rules(s);
    } catch (const Error&) {
    }
  }
  CHECK(true);
}
