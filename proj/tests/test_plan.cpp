#include <doctest.h>

#include "probcer/error.hpp"
#include "probcer/parser.hpp"
#include "probcer/plan.hpp"

using namespace probcer;

namespace {

HierarchyPlan compile_text(const std::string& text, const CompileOptions& options = {}) {
  return compile(parse_rules(text), options);
}

Errc compile_error(const std::string& text) {
  try {
    compile_text(text);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected a compile error for: " << text);
  return Errc::config_error;
}

std::vector<std::string> early_at(const BranchPlan& b, std::size_t element) {
  std::vector<std::string> out;
  for (int i : b.elements[element].early_predicates) out.push_back(b.predicates[static_cast<std::size_t>(i)].text);
  return out;
}

const char* kAssist =
    "assist(X,Y,T3) ::= hasBall(X,T1); hasBall(Y,T2); shooting(Y,T3); ballInNet(T4) where {X != Y}";

}  // namespace

TEST_CASE("the assist rule compiles to four positive states with X != Y at the second") {
  HierarchyPlan hp = compile_text(kAssist);
  REQUIRE(hp.plans.size() == 1);
  REQUIRE(hp.plans[0].branches.size() == 1);
  const BranchPlan& b = hp.plans[0].branches[0];
  REQUIRE(b.elements.size() == 4);
  CHECK(b.elements[0].event_type == "hasBall");
  CHECK(b.elements[1].event_type == "hasBall");
  CHECK(b.elements[2].event_type == "shooting");
  CHECK(b.elements[3].event_type == "ballInNet");
  CHECK(early_at(b, 1) == std::vector<std::string>{"X != Y"});
  CHECK(b.late_predicates.empty());
  CHECK(b.head_time_element == 2);
}

TEST_CASE("a time-difference bound is early at the last state") {
  HierarchyPlan hp = compile_text(
      "assist(X,Y,T3) ::= hasBall(X,T1); hasBall(Y,T2); shooting(Y,T3); ballInNet(T4) where {X != Y, T4 - T1 <= 24}");
  const BranchPlan& b = hp.plans[0].branches[0];
  CHECK(early_at(b, 3) == std::vector<std::string>{"T4 - T1 <= 24"});
}

TEST_CASE("constant predicates are checked at the start state") {
  HierarchyPlan b_plan = compile_text("h(T) ::= a(T) where {1 < 2}");
  const BranchPlan& b = b_plan.plans[0].branches[0];
  CHECK(b.start_predicates.size() == 1);
  CHECK(b.elements[0].early_predicates.empty());
}

TEST_CASE("all-late placement moves every predicate to completion") {
  CompileOptions late;
  late.all_late = true;
  HierarchyPlan b_plan = compile_text(kAssist, late);
  const BranchPlan& b = b_plan.plans[0].branches[0];
  for (const auto& e : b.elements) CHECK(e.early_predicates.empty());
  CHECK(b.late_predicates.size() == 1);
}

TEST_CASE("a single-atom window") {
  HierarchyPlan b_plan = compile_text("h(T1) ::= a(T1) within [0,10]");
  const BranchPlan& b = b_plan.plans[0].branches[0];
  CHECK(b.elements.size() == 1);
  REQUIRE(b.windows.size() == 1);
  CHECK(b.windows[0].lo == 0);
  CHECK(b.windows[0].hi == 10);
  CHECK(b.windows[0].relative);
  CHECK(b.root_windows == std::vector<int>{0});
  CHECK_FALSE(compile_text("h(T1) ::= a(T1) within [2,10]").plans[0].branches[0].windows[0].relative);
}

TEST_CASE("rules sharing a head form one combining group") {
  HierarchyPlan hp = compile_text(
      "waiting(X,Y,T) ::= near(X,Y,T)\n"
      "crossover_dribble(Y,T) ::= dribble(Y,T)\n"
      "0.9::avoid(X,Y,T2) ::= waiting(X,Y,T1); crossover_dribble(Y,T2)\n"
      "0.7::avoid(X,Y,T2) ::= waiting(X,Y,T1); running(Y,T2)\n");
  REQUIRE(hp.plans.size() == 4);
  CHECK(hp.combining_groups.at("avoid") == std::vector<std::size_t>{2, 3});
  CHECK(hp.level.at("avoid") == 1);
  CHECK(hp.level.at("waiting") == 0);
}

TEST_CASE("plans follow the dependency order and keep input order otherwise") {
  HierarchyPlan hp = compile_text(
      "0.9::avoid(X,Y,T2) ::= waiting(X,Y,T1); crossover_dribble(Y,T2)\n"
      "waiting(X,Y,T) ::= near(X,Y,T)\n"
      "crossover_dribble(Y,T) ::= dribble(Y,T)\n");
  REQUIRE(hp.plans.size() == 3);
  CHECK(hp.plans[0].head_type == "waiting");
  CHECK(hp.plans[1].head_type == "crossover_dribble");
  CHECK(hp.plans[2].head_type == "avoid");

  HierarchyPlan flat = compile_text("b(T) ::= x(T)\na(T) ::= y(T)\n");
  CHECK(flat.plans[0].head_type == "b");
  CHECK(flat.plans[1].head_type == "a");
  CHECK(compile_text("a(T) ::= y(T)").plans.size() == 1);
}

TEST_CASE("alternatives expand into branches") {
  CHECK(compile_text("h(T) ::= (a(T) | b(T)); c(T2)").plans[0].branches.size() == 2);
  HierarchyPlan conj = compile_text("h(T) ::= a(T) and b(T2) and c(T3)");
  CHECK(conj.plans[0].branches.size() == 6);
  for (const auto& b : conj.plans[0].branches) {
    CHECK_FALSE(b.elements[1].strict_after_prev);
    CHECK_FALSE(b.elements[2].strict_after_prev);
  }
  CHECK(compile_error("h(T) ::= a(T) and b(T2) and c(T3) and d(T4) and e(T5)") == Errc::unsupported_nesting);
}

TEST_CASE("iteration marks a group and resets its own variables") {
  HierarchyPlan b_plan = compile_text("h(K,T) ::= a(K,T1); b(X,T2)*; c(K,T)");
  const BranchPlan& b = b_plan.plans[0].branches[0];
  REQUIRE(b.groups.size() == 1);
  CHECK(b.groups[0].first == 1);
  CHECK(b.groups[0].last == 1);
  CHECK(b.elements[1].kleene_group == 0);
  CHECK(b.groups[0].local_slots.size() == 3);  // X, T2 and the element time
}

TEST_CASE("unsupported shapes are rejected") {
  CHECK(compile_error("h(T) ::= a(T1); (b(T2)*)*; c(T)") == Errc::unsupported_nesting);
  CHECK(compile_error("h(T) ::= a(T1); (b(T2); not c(_))*; d(T)") == Errc::unsupported_nesting);
  CHECK(compile_error("h(T) ::= a(T1); not c(_); b(T2)*; d(T)") == Errc::unsupported_nesting);
  CHECK(compile_error("h(T) ::= a(T); not b(_)") == Errc::bad_negation);
  CHECK(compile_error("h(T) ::= (not b(_); a(T)) within [0,4]") == Errc::bad_negation);
  CHECK(compile_error("h(T) ::= c(T); (a(T2) | not b(T2))") == Errc::bad_negation);
  CHECK(compile_error("h(T) ::= a(T) and not b(_,_)") == Errc::bad_negation);
  CHECK(compile_error("g(T) ::= x(T)\nh(T) ::= a(T1); not g(_); b(T)") == Errc::bad_negation);
}

TEST_CASE("negation forms") {
  HierarchyPlan gap_plan = compile_text("h(K,T) ::= a(K,T1); not n(K,_); b(K,T)");
  const BranchPlan& gap = gap_plan.plans[0].branches[0];
  REQUIRE(gap.negations.size() == 1);
  CHECK(gap.negations[0].form == NegationCheck::Form::gap);
  CHECK(gap.negations[0].left == 0);
  CHECK(gap.negations[0].right == 1);

  HierarchyPlan bound_plan = compile_text("h(K,T) ::= a(K,T) and not n(K,T)");
  const BranchPlan& bound = bound_plan.plans[0].branches[0];
  REQUIRE(bound.negations.size() == 1);
  CHECK(bound.negations[0].form == NegationCheck::Form::bound_time);

  HierarchyPlan trailing_plan = compile_text("h(T) ::= (a(T); not n(_)) within [0,5]");
  const BranchPlan& trailing = trailing_plan.plans[0].branches[0];
  REQUIRE(trailing.negations.size() == 1);
  CHECK(trailing.negations[0].right_kind == NegationCheck::Bound::window);

  HierarchyPlan leading_plan = compile_text("h(T) ::= (not n(_); a(T)) within [2,5]");
  const BranchPlan& leading = leading_plan.plans[0].branches[0];
  CHECK(leading.negations[0].left_kind == NegationCheck::Bound::window);
}

TEST_CASE("decay outside (0,1] is a configuration error") {
  CompileOptions bad;
  bad.decay = 1.5;
  CHECK_THROWS_AS(compile_text(kAssist, bad), Error);
}

TEST_CASE("plan text is deterministic") {
  const std::string text =
      "h(K,T) ::= (a(K,T1); not n(K,_); (b(K,T) | c(K,T)) where {T - T1 <= 3}) within [0,8]\n"
      "g(T) ::= h(1,T) and d(_,T)\n";
  std::string first = dump_plan(compile_text(text));
  CHECK(first == dump_plan(compile_text(text)));
  CHECK(dump_plan(compile_text(kAssist)) ==
        "plan 0: assist(X, Y, T3) rule 0 level 0 prob 1.0 heads [1.0]\n"
        "  branch 0\n"
        "    state 0: start\n"
        "    state 1: hasBall(X, T1) self-loop\n"
        "    state 2: hasBall(Y, T2) after> self-loop early=[X != Y]\n"
        "    state 3: shooting(Y, T3) after> self-loop\n"
        "    state 4: ballInNet(T4) after> self-loop\n"
        "    state 5: accept\n");
}
