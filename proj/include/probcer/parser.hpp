#pragma once

#include <string_view>
#include <vector>

#include "probcer/pattern.hpp"

namespace probcer {

/// Parses rule DSL source into a validated RuleSet. Throws probcer::Error
/// (SYNTAX_ERROR with line/column, UNBOUND_VARIABLE, CYCLIC_HIERARCHY, ...);
/// never returns a partially built set.
///
///   0.9::avoid(X, Y, T2) ::= waiting(X, Y, T1) ; crossover_dribble(Y, T2)
///   speed(P, S, T) ::= run(P, T) ;; 0.7::{S = high} ;; 0.3::{S = low}
RuleSet parse_rules(std::string_view text);

/// Reports every Select/Produce/head variable that is not bound where it is
/// used. Empty iff the rule is binding-correct.
std::vector<Diagnostic> validate_bindings(const Rule& rule);

}  // namespace probcer
