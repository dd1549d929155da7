#include <doctest.h>

#include <random>

#include "probcer/error.hpp"
#include "probcer/event.hpp"

using namespace probcer;

namespace {

RawEvent raw(std::string type, Timestamp ts, std::vector<Alternative> alts) {
  RawEvent r;
  r.type = std::move(type);
  r.ts = ts;
  r.alternatives = std::move(alts);
  return r;
}

ProbEvent single(std::string type, Timestamp ts, double p, std::string id) {
  return validate_event(raw(std::move(type), ts, {{{}, p}}), std::move(id));
}

Errc code_of(const RawEvent& r) {
  try {
    validate_event(r, "x");
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::config_error;
}

}  // namespace

TEST_CASE("validate_event accepts an annotated SDE and keeps its residual mass") {
  ProbEvent e = validate_event(raw("hasBall", 4, {{{{"player", std::string("p2")}}, 0.7}}), "e5");
  CHECK(e.id == "e5");
  CHECK(e.occurrence_mass() == doctest::Approx(0.7));
  CHECK(e.non_occurrence_mass() == doctest::Approx(0.3));
}

TEST_CASE("crisp events have no non-occurrence mass") {
  ProbEvent e = validate_event(raw("e", 0, {{{{"x", std::int64_t{1}}}, 1.0}}), "e1");
  CHECK(e.non_occurrence_mass() == doctest::Approx(0.0));
}

TEST_CASE("validate_event rejects malformed records") {
  CHECK(code_of(raw("e", 0, {{{{"x", std::int64_t{1}}}, 0.7}, {{{"x", std::int64_t{2}}}, 0.5}})) ==
        Errc::prob_sum_exceeded);
  CHECK(code_of(raw("e", 0, {{{}, -0.1}})) == Errc::negative_prob);
  CHECK(code_of(raw("e", 0, {})) == Errc::missing_field);
  RawEvent no_ts;
  no_ts.type = "e";
  no_ts.alternatives = {{{}, 1.0}};
  CHECK(code_of(no_ts) == Errc::missing_field);
  CHECK(code_of(raw("e", 0, {{{{"x", std::int64_t{1}}}, 0.5}, {{{"y", std::int64_t{2}}}, 0.5}})) ==
        Errc::mixed_attr_keys);
}

TEST_CASE("mass within tolerance above one is accepted") {
  CHECK_NOTHROW(validate_event(raw("e", 0, {{{}, 0.6}, {{}, 0.4 + 5e-10}}), "e1"));
}

TEST_CASE("validate_event is idempotent") {
  ProbEvent e = validate_event(raw("e", 3, {{{{"x", std::int64_t{1}}}, 0.3}, {{{"x", std::int64_t{2}}}, 0.6}}), "e1");
  CHECK(validate_event(e) == e);
}

TEST_CASE("history space size") {
  std::vector<ProbEvent> three = {single("Running", 1, 0.8, "e1"), single("Jumping", 2, 0.6, "e2"),
                                  single("Dunking", 3, 0.7, "e3")};
  CHECK(history_space_size(three) == 8);
  std::vector<ProbEvent> ten;
  for (int i = 0; i < 10; ++i) ten.push_back(single("x", i, 0.5, "e" + std::to_string(i)));
  CHECK(history_space_size(ten) == 1024);
  CHECK(history_space_size({}) == 1);
}

TEST_CASE("history probability") {
  std::vector<ProbEvent> ev = {single("Running", 1, 0.8, "e1"), single("Jumping", 2, 0.6, "e2"),
                               single("Dunking", 3, 0.7, "e3")};
  EventHistory all;
  all.choices = {{"e1", 0}, {"e2", 0}, {"e3", 0}};
  CHECK(history_prob(all, ev) == doctest::Approx(0.336).epsilon(1e-12));
  EventHistory none;
  none.choices = {{"e1", kNonOccurrence}, {"e2", kNonOccurrence}, {"e3", kNonOccurrence}};
  CHECK(history_prob(none, ev) == doctest::Approx(0.024).epsilon(1e-12));
  CHECK(history_prob(EventHistory{}, {}) == 1.0);
  EventHistory partial;
  partial.choices = {{"e1", 0}};
  CHECK_THROWS_AS(history_prob(partial, ev), Error);
}

TEST_CASE("histories sum to one and the enumerator visits every one") {
  std::mt19937_64 rng(3);
  for (int round = 0; round < 30; ++round) {
    std::vector<ProbEvent> ev;
    int n = static_cast<int>(rng() % 9);
    for (int i = 0; i < n; ++i) {
      std::vector<Alternative> alts;
      int k = 1 + static_cast<int>(rng() % 3);
      double left = 1.0;
      for (int a = 0; a < k; ++a) {
        double p = left * static_cast<double>(rng() % 100) / 100.0;
        left -= p;
        alts.push_back({{{"v", std::int64_t{a}}}, p});
      }
      ev.push_back(validate_event(raw("t", i, alts), "e" + std::to_string(i)));
    }
    double total = 0.0;
    std::uint64_t count = 0;
    for_each_history(ev, [&](const std::vector<int>& choices) {
      EventHistory h;
      for (std::size_t i = 0; i < ev.size(); ++i) h.choices[ev[i].id] = choices[i];
      total += history_prob(h, ev);
      ++count;
    });
    CHECK(count == history_space_size(ev));
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("crisp view keeps occurring events with their chosen alternative") {
  std::vector<ProbEvent> ev = {
      validate_event(raw("a", 1, {{{{"x", std::int64_t{1}}}, 0.3}, {{{"x", std::int64_t{2}}}, 0.6}}), "e1"),
      single("b", 2, 0.5, "e2")};
  CrispView v = crisp_history(ev, {1, kNonOccurrence});
  REQUIRE(v.events.size() == 1);
  CHECK(v.events[0].alternatives.size() == 1);
  CHECK(v.events[0].alternatives[0].prob == 1.0);
  CHECK(std::get<std::int64_t>(v.events[0].alternatives[0].attrs[0].value) == 2);
  CHECK(v.source_index[0] == 0);
}

TEST_CASE("attribute comparisons promote numbers and keep tags apart") {
  CHECK(values_equal(AttrValue{std::int64_t{2}}, AttrValue{2.0}));
  CHECK_FALSE(values_equal(AttrValue{std::string("2")}, AttrValue{std::int64_t{2}}));
  CHECK(compare_values(AttrValue{std::int64_t{1}}, AttrValue{1.5}) == -1);
  CHECK_FALSE(compare_values(AttrValue{true}, AttrValue{std::int64_t{1}}).has_value());
}
