#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "probcer/event.hpp"
#include "probcer/pattern.hpp"
#include "probcer/runtime.hpp"

namespace probcer {

struct GeneratorSpec {
  std::uint64_t seed = 1;
  std::size_t events = 100000;
  /// Pattern types, in pattern order; every other event draws from `noise_types`.
  std::vector<std::string> pattern_types = {"a", "b", "c"};
  std::size_t noise_types = 5;
  /// Fraction of events whose type is one of the pattern types.
  double selectivity = 0.1;
  /// Distinct values of the shared `key` attribute.
  int keys = 16;
  double prob_lo = 0.5;
  double prob_hi = 1.0;
  /// Events per time unit.
  int rate = 4;
};

/// Seeded synthetic stream; equal specs give equal streams.
std::vector<ProbEvent> generate_stream(const GeneratorSpec& spec);

/// `a(K,T1); b(K,T2); c(K,T3) within [0,w]` over the spec's pattern types.
std::string sequence_rule(const GeneratorSpec& spec, std::int64_t window);
/// `a(K,T1); b(K,T2)*; c(K,T3) within [0,w]`.
std::string kleene_rule(const GeneratorSpec& spec, std::int64_t window);

struct BenchReport {
  std::size_t events = 0;
  std::size_t matches = 0;
  double seconds = 0.0;
  double events_per_sec = 0.0;
  double mean_latency_us = 0.0;
  double p99_latency_us = 0.0;
  std::size_t peak_runs = 0;
  std::size_t runs_created = 0;
};

/// Drives one engine over in-memory events, timing every ingest call.
BenchReport run_bench(const RuleSet& rules, const std::vector<ProbEvent>& events, const EngineConfig& config);

}  // namespace probcer
