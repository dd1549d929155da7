#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

namespace probcer {

/// Integer time point in the configured unit (seconds by default).
using Timestamp = std::int64_t;

/// Scalar attribute value. Comparisons are defined within one tag, plus
/// numeric promotion between integer and float.
using AttrValue = std::variant<std::string, std::int64_t, double, bool>;

/// Tolerance used by every probability-mass check.
inline constexpr double kProbTolerance = 1e-9;

/// Three-way comparison; nullopt when the two values are not comparable.
std::optional<int> compare_values(const AttrValue& a, const AttrValue& b);
bool values_equal(const AttrValue& a, const AttrValue& b);
bool is_numeric(const AttrValue& v);
std::string value_to_string(const AttrValue& v);

struct Attribute {
  std::string name;
  AttrValue value;

  friend bool operator==(const Attribute&, const Attribute&) = default;
};

/// Attributes keep their declaration order: pattern atoms bind them positionally.
using AttrList = std::vector<Attribute>;

struct Alternative {
  AttrList attrs;
  double prob = 1.0;

  friend bool operator==(const Alternative&, const Alternative&) = default;
};

struct ProbEvent {
  std::string type;
  Timestamp ts = 0;
  std::vector<Alternative> alternatives;
  std::string id;

  double occurrence_mass() const;
  double non_occurrence_mass() const { return 1.0 - occurrence_mass(); }

  friend bool operator==(const ProbEvent&, const ProbEvent&) = default;
};

/// Undecoded event record as it arrives from a source; fields may be missing.
struct RawEvent {
  std::optional<std::string> type;
  std::optional<std::int64_t> ts;
  std::vector<Alternative> alternatives;
  std::optional<std::string> id;
};

/// Validates the record and returns a ProbEvent. `fallback_id` is used when
/// the record carries no id.
ProbEvent validate_event(const RawEvent& raw, const std::string& fallback_id = {});

/// Re-validation of an already constructed event; returns an equal value.
ProbEvent validate_event(const ProbEvent& event);

inline constexpr int kNonOccurrence = -1;

/// One choice (alternative index or kNonOccurrence) per event id.
struct EventHistory {
  std::unordered_map<std::string, int> choices;
};

/// Product over events of (alternatives + 1), saturating at UINT64_MAX.
std::uint64_t history_space_size(const std::vector<ProbEvent>& events);

double history_prob(const EventHistory& history, const std::vector<ProbEvent>& events);

/// Calls `visit(choice_vector)` for every history in lexicographic order of
/// the per-event choice; choice i refers to events[i]. Choice vectors use
/// kNonOccurrence for absent events.
void for_each_history(const std::vector<ProbEvent>& events,
                      const std::function<void(const std::vector<int>&)>& visit);

/// Occurring events of one history with their chosen alternative collapsed
/// to probability 1. The returned indices map back into `events`.
struct CrispView {
  std::vector<ProbEvent> events;
  std::vector<std::size_t> source_index;
};
CrispView crisp_history(const std::vector<ProbEvent>& events, const std::vector<int>& choices);

/// Complex-event instance produced by recognition.
struct CEInstance {
  std::string ce_type;
  AttrList attrs;
  Timestamp ts = 0;
  double prob = 0.0;
  std::vector<std::string> contributing_ids;
};

/// Identity of a CE instance: type, attributes and timestamp.
struct InstanceKey {
  std::string ce_type;
  AttrList attrs;
  Timestamp ts = 0;
};
bool operator<(const InstanceKey& a, const InstanceKey& b);
inline bool operator==(const InstanceKey& a, const InstanceKey& b) { return !(a < b) && !(b < a); }
std::string to_string(const InstanceKey& key);

}  // namespace probcer
