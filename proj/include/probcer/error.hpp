#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace probcer {

enum class Errc {
  // event-core
  prob_sum_exceeded,
  negative_prob,
  missing_field,
  mixed_attr_keys,
  incomplete_history,
  // pattern-lang
  syntax_error,
  unbound_variable,
  cyclic_hierarchy,
  duplicate_head_without_disjunction_marker,
  // plan-compiler
  unsupported_nesting,
  bad_negation,
  // recognition-runtime
  out_of_order_event,
  run_cap_exceeded,
  model_not_monotone,
  hierarchy_order_violation,
  // prob-engine
  lineage_too_large,
  space_too_large,
  no_such_ce,
  empty_match_set,
  // cli-harness
  config_error,
  io_error,
};

std::string_view errc_name(Errc code);

/// Exit code the CLI maps an error onto: 2 config/parse, 3 stream, 4 capacity.
int errc_exit_code(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message, int line = 0, int col = 0);

  Errc code() const noexcept { return code_; }
  /// 1-based source position for parse errors, 0 when not applicable.
  int line() const noexcept { return line_; }
  int col() const noexcept { return col_; }

 private:
  Errc code_;
  int line_;
  int col_;
};

}  // namespace probcer
