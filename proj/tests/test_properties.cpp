#include <doctest.h>

#include "checks.hpp"

using namespace probcer::testing;

namespace {

void require_clean(const CheckSummary& s, int min_nonempty) {
  INFO(s.first_failure);
  CHECK(s.failures == 0);
  CHECK(s.nonempty >= min_nonempty);
}

}  // namespace

TEST_CASE("automaton matches equal the direct evaluator on crisp streams") {
  require_clean(crisp_equivalence(11, 300), 100);
}

TEST_CASE("automaton matches equal the direct evaluator across hierarchy levels") {
  require_clean(crisp_hierarchy_equivalence(12, 100), 30);
}

TEST_CASE("instance marginals equal possible-worlds enumeration") { require_clean(marginal_equivalence(13, 200), 60); }

TEST_CASE("per-match probabilities with iteration equal possible-worlds enumeration") {
  require_clean(kleene_equivalence(14, 150), 40);
}

TEST_CASE("hierarchy marginals with carried lineage equal enumeration") {
  require_clean(hierarchy_equivalence(15, 60, false), 20);
}

TEST_CASE("decayed and markov marginals equal enumeration") { require_clean(model_equivalence(16, 80), 20); }

TEST_CASE("pruned output equals the unpruned output above the threshold") {
  require_clean(pruning_soundness(17, 100, {0.1, 0.3, 0.5}), 30);
}

TEST_CASE("independent promotion deviates from enumeration on shared events") {
  CheckSummary s = hierarchy_equivalence(15, 60, true);
  MESSAGE("largest deviation " << s.max_error);
  CHECK(s.max_error > 1e-6);
}
