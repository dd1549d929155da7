#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "probcer/lineage.hpp"
#include "probcer/match.hpp"
#include "probcer/plan.hpp"
#include "probcer/prob.hpp"

namespace probcer {

struct EngineConfig {
  ProbModelConfig model;
  /// Matches of top-level rules whose probability bound drops below this are
  /// discarded while running (per-match reporting only).
  double prune_threshold = 0.0;
  bool approx_hierarchy = false;
  std::size_t run_cap = 100000;
  std::size_t lineage_cap = kDefaultLineageCap;
  /// Keep per-instance lineage for every CE type (marginal reporting).
  bool instance_marginals = false;
  bool eviction = true;
};

struct EngineStats {
  std::uint64_t events = 0;
  std::uint64_t runs_created = 0;
  std::uint64_t live_runs = 0;
  std::uint64_t peak_runs = 0;
  std::uint64_t evicted = 0;
  std::uint64_t pruned = 0;
  std::uint64_t matches = 0;
  std::uint64_t instances = 0;
};

/// Event as stored by the engine: input events and promoted CE instances.
struct StoredEvent {
  ProbEvent event;
  std::uint64_t seq = 0;
  bool complex = false;
  int var = -1;
  Lineage lineage;  // promoted CE, exact mode
  double marginal = 1.0;
  std::shared_ptr<StoredEvent> markov_parent;
};
using EventRef = std::shared_ptr<StoredEvent>;

/// Active Instance Stack entry: the event that triggered a transition and
/// the entry it extends.
struct Step {
  std::shared_ptr<const Step> prev;
  EventRef event;
  int alt = 0;
  int element = 0;
};

struct Run {
  std::uint32_t plan = 0;
  std::uint32_t branch = 0;
  int next = 0;
  std::uint32_t length = 0;
  Bindings bindings;
  std::shared_ptr<const Step> last;
  Timestamp first_ts = 0;
  Timestamp last_ts = 0;
  Timestamp deadline = std::numeric_limits<Timestamp>::max();
  std::uint64_t first_seq = 0;
  double bound = 1.0;   // product over selected input events (chain product under Markov)
  double ce_min = 1.0;  // smallest promoted-CE probability selected
  int inside = 0;       // selected input events strictly after the first one
};

/// Streaming recognizer over a compiled hierarchy. Single-threaded.
class Engine {
 public:
  using MatchSink = std::function<void(const Match&)>;
  using InstanceSink = std::function<void(const CEInstance&)>;

  Engine(HierarchyPlan plan, EngineConfig config = {});

  /// Events must arrive with nondecreasing timestamps (OUT_OF_ORDER_EVENT).
  void ingest(const ProbEvent& event);
  /// End of stream: resolves every pending match and instance.
  void flush();

  /// Removes runs whose window closed before `now`.
  std::size_t evict(Timestamp now);
  /// Removes top-level runs whose probability bound is below `epsilon`.
  std::size_t prune_below(double epsilon);
  /// Injects a CE instance as input of every level above its own. Without a
  /// lineage the instance enters as a fresh independent event.
  void promote(const CEInstance& ce, std::optional<Lineage> lineage = std::nullopt);

  void on_match(MatchSink sink) { match_sink_ = std::move(sink); }
  void on_instance(InstanceSink sink) { instance_sink_ = std::move(sink); }

  const EngineStats& stats() const { return stats_; }
  const VariableTable& variables() const { return vars_; }
  const HierarchyPlan& plan() const { return plan_; }

 private:
  struct Pending {
    Run run;
    Timestamp horizon = 0;
    std::vector<std::pair<int, Bindings>> heads;
    Timestamp min_ce_ts = 0;
  };
  struct Group {
    InstanceKey key;
    Lineage lineage;
    std::vector<std::pair<Timestamp, std::uint64_t>> order;
    std::vector<std::string> ids;
  };
  struct LevelState {
    std::unordered_map<std::string, std::vector<int>> buckets_by_type;
    std::multimap<Timestamp, EventRef> buffer;
    std::vector<Pending> pending;
    std::set<std::string> input_types;
  };

  void advance(Timestamp frontier, bool final);
  void process(int level, const EventRef& ev);
  void try_take(const Run& run, const EventRef& ev, std::vector<Run>& staged);
  void complete(Run run);
  void resolve_pending(int level, bool final);
  void finish(const Pending& p, std::vector<Match>& out);
  void seal(int level, bool final);
  Timestamp future_ce_bound(std::size_t plan_index, bool final) const;
  double run_bound(const Run& r) const;
  int var_of(const EventRef& e);
  int bucket(std::uint32_t plan, std::uint32_t branch, int element) const;
  double decay_of(const NFAPlan& p) const;
  bool decay_used() const;
  void emit_batch(std::vector<Match>& batch);

  HierarchyPlan plan_;
  EngineConfig config_;
  VariableTable vars_;
  EngineStats stats_;
  MatchSink match_sink_;
  InstanceSink instance_sink_;

  std::vector<std::vector<int>> bucket_offset_;  // [plan][branch] -> first bucket id
  std::vector<std::vector<Run>> buckets_;
  std::vector<int> bucket_plan_;
  std::vector<int> bucket_branch_;
  std::vector<int> bucket_element_;
  std::vector<LevelState> levels_;
  std::vector<bool> top_level_;     // per plan: head type feeds no other rule
  std::vector<bool> need_lineage_;  // per plan
  std::set<std::string> referenced_ce_types_;
  std::set<std::string> group_types_;
  std::map<InstanceKey, Group> groups_;

  std::unordered_map<std::string, std::vector<EventRef>> negation_index_;
  std::unordered_map<std::string, EventRef> markov_last_;
  std::set<std::string> markov_types_;
  std::vector<Timestamp> release_;  // per level: every input below this ts has been processed
  std::uint64_t advances_ = 0;
  std::vector<Timestamp> input_ts_;  // for the decay exponent
  Timestamp frontier_ = std::numeric_limits<Timestamp>::min();
  std::uint64_t next_seq_ = 0;
  std::uint64_t next_coin_ = 0;
  bool started_ = false;
  bool flushed_ = false;
};

/// Batch convenience: compile, run over `events`, flush.
struct RecognitionResult {
  std::vector<Match> matches;
  std::vector<CEInstance> instances;
  EngineStats stats;
};
RecognitionResult recognize(const RuleSet& rules, const std::vector<ProbEvent>& events, const EngineConfig& config = {},
                            const CompileOptions& options = {});

}  // namespace probcer
