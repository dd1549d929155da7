#include "probcer/bench.hpp"

#include <algorithm>
#include <chrono>
#include <random>

#include "probcer/plan.hpp"

namespace probcer {

std::vector<ProbEvent> generate_stream(const GeneratorSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<ProbEvent> out;
  out.reserve(spec.events);
  const auto rate = static_cast<std::size_t>(std::max(1, spec.rate));
  for (std::size_t i = 0; i < spec.events; ++i) {
    ProbEvent e;
    e.ts = static_cast<Timestamp>(i / rate);
    e.id = "e" + std::to_string(i + 1);
    if (!spec.pattern_types.empty() && unit(rng) < spec.selectivity) {
      e.type = spec.pattern_types[rng() % spec.pattern_types.size()];
    } else {
      e.type = "n" + std::to_string(rng() % std::max<std::size_t>(1, spec.noise_types));
    }
    double p = spec.prob_lo + (spec.prob_hi - spec.prob_lo) * unit(rng);
    auto key = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(std::max(1, spec.keys)));
    e.alternatives.push_back({{{"key", key}}, std::min(1.0, p)});
    out.push_back(std::move(e));
  }
  return out;
}

std::string sequence_rule(const GeneratorSpec& spec, std::int64_t window) {
  const auto& t = spec.pattern_types;
  return "seq3(K,T3) ::= (" + t.at(0) + "(K,T1); " + t.at(1) + "(K,T2); " + t.at(2) + "(K,T3)) within [0," +
         std::to_string(window) + "]\n";
}

std::string kleene_rule(const GeneratorSpec& spec, std::int64_t window) {
  const auto& t = spec.pattern_types;
  return "burst(K,T3) ::= (" + t.at(0) + "(K,T1); " + t.at(1) + "(K,T2)*; " + t.at(2) + "(K,T3)) within [0," +
         std::to_string(window) + "]\n";
}

BenchReport run_bench(const RuleSet& rules, const std::vector<ProbEvent>& events, const EngineConfig& config) {
  using clock = std::chrono::steady_clock;
  Engine engine(compile(rules), config);
  BenchReport r;
  engine.on_match([&](const Match&) { ++r.matches; });
  std::vector<double> lat;
  lat.reserve(events.size());
  auto start = clock::now();
  for (const auto& e : events) {
    auto t0 = clock::now();
    engine.ingest(e);
    lat.push_back(std::chrono::duration<double, std::micro>(clock::now() - t0).count());
  }
  engine.flush();
  r.seconds = std::chrono::duration<double>(clock::now() - start).count();
  r.events = events.size();
  r.events_per_sec = r.seconds > 0 ? static_cast<double>(r.events) / r.seconds : 0.0;
  if (!lat.empty()) {
    double sum = 0;
    for (double x : lat) sum += x;
    r.mean_latency_us = sum / static_cast<double>(lat.size());
    auto k = static_cast<std::size_t>(0.99 * static_cast<double>(lat.size() - 1));
    std::nth_element(lat.begin(), lat.begin() + static_cast<std::ptrdiff_t>(k), lat.end());
    r.p99_latency_us = lat[k];
  }
  r.peak_runs = engine.stats().peak_runs;
  r.runs_created = engine.stats().runs_created;
  return r;
}

}  // namespace probcer
