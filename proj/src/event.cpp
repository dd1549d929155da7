#include "probcer/event.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "probcer/error.hpp"

namespace probcer {

namespace {

double as_double(const AttrValue& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  return std::get<double>(v);
}

int tag_rank(const AttrValue& v) {
  // string < number < bool; only used for deterministic ordering of keys
  if (std::holds_alternative<std::string>(v)) return 0;
  if (std::holds_alternative<bool>(v)) return 2;
  return 1;
}

int total_order(const AttrValue& a, const AttrValue& b) {
  if (auto c = compare_values(a, b)) return *c;
  return tag_rank(a) < tag_rank(b) ? -1 : 1;
}

}  // namespace

bool is_numeric(const AttrValue& v) {
  return std::holds_alternative<std::int64_t>(v) || std::holds_alternative<double>(v);
}

std::optional<int> compare_values(const AttrValue& a, const AttrValue& b) {
  if (std::holds_alternative<std::int64_t>(a) && std::holds_alternative<std::int64_t>(b)) {
    auto x = std::get<std::int64_t>(a), y = std::get<std::int64_t>(b);
    return x < y ? -1 : (x > y ? 1 : 0);
  }
  if (is_numeric(a) && is_numeric(b)) {
    double x = as_double(a), y = as_double(b);
    if (std::isnan(x) || std::isnan(y)) return std::nullopt;
    return x < y ? -1 : (x > y ? 1 : 0);
  }
  if (a.index() != b.index()) return std::nullopt;
  if (const auto* s = std::get_if<std::string>(&a)) {
    int c = s->compare(std::get<std::string>(b));
    return c < 0 ? -1 : (c > 0 ? 1 : 0);
  }
  bool x = std::get<bool>(a), y = std::get<bool>(b);
  return x == y ? 0 : (x ? 1 : -1);
}

bool values_equal(const AttrValue& a, const AttrValue& b) {
  auto c = compare_values(a, b);
  return c && *c == 0;
}

std::string value_to_string(const AttrValue& v) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, std::string>) {
          return x;
        } else if constexpr (std::is_same_v<T, bool>) {
          return x ? "true" : "false";
        } else if constexpr (std::is_same_v<T, double>) {
          std::ostringstream os;
          os.precision(9);
          os << x;
          return os.str();
        } else {
          return std::to_string(x);
        }
      },
      v);
}

double ProbEvent::occurrence_mass() const {
  double sum = 0.0;
  for (const auto& alt : alternatives) sum += alt.prob;
  return sum;
}

ProbEvent validate_event(const RawEvent& raw, const std::string& fallback_id) {
  if (!raw.type || raw.type->empty()) throw Error(Errc::missing_field, "event has no type");
  if (!raw.ts) throw Error(Errc::missing_field, "event '" + *raw.type + "' has no timestamp");
  if (*raw.ts < 0) throw Error(Errc::missing_field, "event '" + *raw.type + "' has a negative timestamp");
  if (raw.alternatives.empty()) {
    throw Error(Errc::missing_field, "event '" + *raw.type + "' has no alternatives");
  }

  ProbEvent event;
  event.type = *raw.type;
  event.ts = *raw.ts;
  event.id = raw.id.value_or(fallback_id);

  double sum = 0.0;
  for (const auto& alt : raw.alternatives) {
    if (!(alt.prob >= 0.0)) {
      throw Error(Errc::negative_prob, "event '" + event.type + "' has a negative or NaN probability");
    }
    sum += alt.prob;
  }
  if (sum > 1.0 + kProbTolerance) {
    std::ostringstream os;
    os << "event '" << event.type << "' alternatives sum to " << sum << " > 1";
    throw Error(Errc::prob_sum_exceeded, os.str());
  }

  // Every alternative must carry the key set of the first one; keys are
  // reordered to the first alternative's order.
  const AttrList& reference = raw.alternatives.front().attrs;
  std::set<std::string> keys;
  for (const auto& a : reference) {
    if (!keys.insert(a.name).second) {
      throw Error(Errc::mixed_attr_keys, "event '" + event.type + "' repeats attribute '" + a.name + "'");
    }
  }
  for (const auto& alt : raw.alternatives) {
    if (alt.attrs.size() != reference.size()) {
      throw Error(Errc::mixed_attr_keys, "event '" + event.type + "' alternatives differ in attributes");
    }
    Alternative normalized{{}, alt.prob};
    for (const auto& ref : reference) {
      auto it = std::find_if(alt.attrs.begin(), alt.attrs.end(),
                             [&](const Attribute& a) { return a.name == ref.name; });
      if (it == alt.attrs.end()) {
        throw Error(Errc::mixed_attr_keys, "event '" + event.type + "' alternatives differ in attributes");
      }
      normalized.attrs.push_back(*it);
    }
    event.alternatives.push_back(std::move(normalized));
  }
  return event;
}

ProbEvent validate_event(const ProbEvent& event) {
  RawEvent raw{event.type, event.ts, event.alternatives, event.id};
  return validate_event(raw, event.id);
}

std::uint64_t history_space_size(const std::vector<ProbEvent>& events) {
  std::uint64_t size = 1;
  constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
  for (const auto& e : events) {
    std::uint64_t factor = e.alternatives.size() + 1;
    if (size > kMax / factor) return kMax;
    size *= factor;
  }
  return size;
}

double history_prob(const EventHistory& history, const std::vector<ProbEvent>& events) {
  double p = 1.0;
  for (const auto& e : events) {
    auto it = history.choices.find(e.id);
    if (it == history.choices.end()) {
      throw Error(Errc::incomplete_history, "history has no choice for event '" + e.id + "'");
    }
    if (it->second == kNonOccurrence) {
      p *= e.non_occurrence_mass();
    } else {
      p *= e.alternatives.at(static_cast<std::size_t>(it->second)).prob;
    }
  }
  return p;
}

void for_each_history(const std::vector<ProbEvent>& events,
                      const std::function<void(const std::vector<int>&)>& visit) {
  std::vector<int> choice(events.size(), kNonOccurrence);
  // odometer over {-1, 0, ..., k-1} per event
  while (true) {
    visit(choice);
    std::size_t i = 0;
    for (; i < events.size(); ++i) {
      int last = static_cast<int>(events[i].alternatives.size()) - 1;
      if (choice[i] < last) {
        ++choice[i];
        break;
      }
      choice[i] = kNonOccurrence;
    }
    if (i == events.size()) return;
  }
}

CrispView crisp_history(const std::vector<ProbEvent>& events, const std::vector<int>& choices) {
  CrispView view;
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (choices[i] == kNonOccurrence) continue;
    ProbEvent e;
    e.type = events[i].type;
    e.ts = events[i].ts;
    e.id = events[i].id;
    e.alternatives.push_back({events[i].alternatives[static_cast<std::size_t>(choices[i])].attrs, 1.0});
    view.events.push_back(std::move(e));
    view.source_index.push_back(i);
  }
  return view;
}

bool operator<(const InstanceKey& a, const InstanceKey& b) {
  if (a.ce_type != b.ce_type) return a.ce_type < b.ce_type;
  if (a.ts != b.ts) return a.ts < b.ts;
  std::size_t n = std::min(a.attrs.size(), b.attrs.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (a.attrs[i].name != b.attrs[i].name) return a.attrs[i].name < b.attrs[i].name;
    int c = total_order(a.attrs[i].value, b.attrs[i].value);
    if (c != 0) return c < 0;
  }
  return a.attrs.size() < b.attrs.size();
}

std::string to_string(const InstanceKey& key) {
  std::string s = key.ce_type + "(";
  for (const auto& a : key.attrs) s += value_to_string(a.value) + ",";
  s += std::to_string(key.ts) + ")";
  return s;
}

}  // namespace probcer
