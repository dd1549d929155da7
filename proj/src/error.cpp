#include "probcer/error.hpp"

namespace probcer {

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::prob_sum_exceeded: return "PROB_SUM_EXCEEDED";
    case Errc::negative_prob: return "NEGATIVE_PROB";
    case Errc::missing_field: return "MISSING_FIELD";
    case Errc::mixed_attr_keys: return "MIXED_ATTR_KEYS";
    case Errc::incomplete_history: return "INCOMPLETE_HISTORY";
    case Errc::syntax_error: return "SYNTAX_ERROR";
    case Errc::unbound_variable: return "UNBOUND_VARIABLE";
    case Errc::cyclic_hierarchy: return "CYCLIC_HIERARCHY";
    case Errc::duplicate_head_without_disjunction_marker:
      return "DUPLICATE_HEAD_WITHOUT_DISJUNCTION_MARKER";
    case Errc::unsupported_nesting: return "UNSUPPORTED_NESTING";
    case Errc::bad_negation: return "BAD_NEGATION";
    case Errc::out_of_order_event: return "OUT_OF_ORDER_EVENT";
    case Errc::run_cap_exceeded: return "RUN_CAP_EXCEEDED";
    case Errc::model_not_monotone: return "MODEL_NOT_MONOTONE";
    case Errc::hierarchy_order_violation: return "HIERARCHY_ORDER_VIOLATION";
    case Errc::lineage_too_large: return "LINEAGE_TOO_LARGE";
    case Errc::space_too_large: return "SPACE_TOO_LARGE";
    case Errc::no_such_ce: return "NO_SUCH_CE";
    case Errc::empty_match_set: return "EMPTY_MATCH_SET";
    case Errc::config_error: return "CONFIG_ERROR";
    case Errc::io_error: return "IO_ERROR";
  }
  return "UNKNOWN";
}

int errc_exit_code(Errc code) {
  switch (code) {
    case Errc::out_of_order_event:
    case Errc::prob_sum_exceeded:
    case Errc::negative_prob:
    case Errc::missing_field:
    case Errc::mixed_attr_keys:
    case Errc::incomplete_history:
    case Errc::hierarchy_order_violation:
      return 3;
    case Errc::run_cap_exceeded:
    case Errc::lineage_too_large:
    case Errc::space_too_large:
      return 4;
    default:
      return 2;
  }
}

Error::Error(Errc code, const std::string& message, int line, int col)
    : std::runtime_error(message), code_(code), line_(line), col_(col) {}

}  // namespace probcer
