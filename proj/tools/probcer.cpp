#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "probcer/bench.hpp"
#include "probcer/error.hpp"
#include "probcer/io.hpp"
#include "probcer/oracle.hpp"
#include "probcer/parser.hpp"
#include "probcer/plan.hpp"
#include "probcer/prob.hpp"
#include "probcer/runtime.hpp"

using namespace probcer;
using json = nlohmann::ordered_json;

namespace {

struct ModelOptions {
  std::string model = "independent";
  std::string cpt_path;
  std::optional<double> decay;
  bool hard_negation = false;

  void add(CLI::App* app) {
    app->add_option("--model", model, "independent or markov")->check(CLI::IsMember({"independent", "markov"}));
    app->add_option("--cpt", cpt_path, "CPT JSON file, e.g. {\"shooting->ballInNet\": 0.95}");
    app->add_option("--decay", decay, "penalty decay per intervening event, in (0,1]");
    app->add_flag("--hard-negation", hard_negation, "negation rejects a match whenever a violator may occur");
  }

  ProbModelConfig build() const {
    ProbModelConfig m;
    m.kind = model == "markov" ? ProbModelConfig::Kind::markov : ProbModelConfig::Kind::independent;
    if (!cpt_path.empty()) {
      if (m.kind != ProbModelConfig::Kind::markov) throw Error(Errc::config_error, "--cpt needs --model markov");
      m.cpt = parse_cpt(read_file(cpt_path));
    }
    if (decay && !(*decay > 0.0 && *decay <= 1.0)) throw Error(Errc::config_error, "--decay must lie in (0,1]");
    m.decay = decay;
    m.hard_negation = hard_negation;
    return m;
  }
};

class Output {
 public:
  explicit Output(const std::string& path) {
    if (path.empty() || path == "-") return;
    file_ = std::make_unique<std::ofstream>(path);
    if (!*file_) throw Error(Errc::io_error, "cannot write " + path);
  }
  std::ostream& out() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

RuleSet load_rules(const std::string& path) {
  RuleSet rules = parse_rules(read_file(path));
  for (const auto& w : rules.warnings) {
    json j{{"warning", w.message}, {"line", w.pos.line}, {"col", w.pos.col}};
    std::cerr << j.dump() << "\n";
  }
  return rules;
}

void for_each_event(const std::string& path, const std::function<void(ProbEvent)>& visit) {
  std::ifstream file;
  std::istream* in = &std::cin;
  if (!path.empty() && path != "-") {
    file.open(path);
    if (!file) throw Error(Errc::io_error, "cannot open " + path);
    in = &file;
  }
  std::string line;
  int line_no = 0;
  std::size_t count = 0;
  while (std::getline(*in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ProbEvent e;
    try {
      e = parse_event_line(line, "e" + std::to_string(++count));
    } catch (const Error& err) {
      throw Error(err.code(), err.what(), line_no, 0);
    }
    visit(std::move(e));
  }
}

int fail(const Error& e) {
  json j{{"error", std::string(errc_name(e.code()))}, {"message", e.what()}};
  if (e.line() > 0) {
    j["line"] = e.line();
    j["col"] = e.col();
  }
  std::cerr << j.dump() << "\n";
  return errc_exit_code(e.code());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"probcer: probabilistic complex event recognition"};
  app.require_subcommand(1);

  std::string rules_path;
  std::string input_path;
  std::string output_path;
  double threshold = 0.0;
  std::string report = "per-match";
  bool approx = false;
  std::size_t run_cap = 100000;
  std::size_t lineage_cap = kDefaultLineageCap;
  bool show_stats = false;

  auto* rec = app.add_subcommand("recognize", "run rules over a JSONL event stream");
  ModelOptions rec_model;
  rec_model.add(rec);
  rec->add_option("--rules", rules_path, "rule file")->required();
  rec->add_option("--input", input_path, "JSONL events (default stdin)");
  rec->add_option("--output", output_path, "JSONL output (default stdout)");
  rec->add_option("--threshold", threshold, "report only probabilities >= threshold")->check(CLI::Range(0.0, 1.0));
  rec->add_option("--report", report, "per-match, marginal or map")
      ->check(CLI::IsMember({"per-match", "marginal", "map"}));
  rec->add_flag("--approx-hierarchy", approx, "promote CEs as fresh independent events");
  rec->add_option("--run-cap", run_cap, "maximum live runs");
  rec->add_option("--lineage-cap", lineage_cap, "maximum distinct events in one lineage");
  rec->add_flag("--stats", show_stats, "print engine counters on stderr");

  auto* orc = app.add_subcommand("oracle", "exact marginals by enumerating every history");
  ModelOptions orc_model;
  orc_model.add(orc);
  std::string query_type;
  std::uint64_t space_cap = kOracleSpaceCap;
  orc->add_option("--rules", rules_path, "rule file")->required();
  orc->add_option("--input", input_path, "JSONL events (default stdin)");
  orc->add_option("--output", output_path, "JSONL output (default stdout)");
  orc->add_option("--type", query_type, "only report instances of this CE type");
  orc->add_option("--space-cap", space_cap, "maximum number of histories");

  auto* sc = app.add_subcommand("score", "precision, recall and F-measure against gold labels");
  std::string predicted_path;
  std::string gold_path;
  sc->add_option("--predicted", predicted_path, "recognized CEs (JSONL)")->required();
  sc->add_option("--gold", gold_path, "gold CEs (JSONL)")->required();
  sc->add_option("--threshold", threshold, "minimum probability of a counted prediction")->check(CLI::Range(0.0, 1.0));

  auto* bn = app.add_subcommand("bench", "throughput and latency on a seeded synthetic stream");
  GeneratorSpec spec;
  std::int64_t window = 10;
  bool kleene = false;
  std::string write_stream;
  bn->add_option("--events", spec.events, "number of events");
  bn->add_option("--seed", spec.seed, "generator seed");
  bn->add_option("--selectivity", spec.selectivity, "fraction of events of pattern types")->check(CLI::Range(0.0, 1.0));
  bn->add_option("--keys", spec.keys, "distinct key values");
  bn->add_option("--rate", spec.rate, "events per time unit");
  bn->add_option("--window", window, "pattern window length");
  bn->add_flag("--kleene", kleene, "use a b* in the middle of the sequence");
  bn->add_option("--threshold", threshold, "pruning threshold")->check(CLI::Range(0.0, 1.0));
  bn->add_option("--run-cap", run_cap, "maximum live runs");
  bn->add_option("--write-stream", write_stream, "also write the generated stream as JSONL");

  auto* val = app.add_subcommand("validate", "parse and compile a rule file");
  bool dump = false;
  val->add_option("--rules", rules_path, "rule file")->required();
  val->add_flag("--dump-plan", dump, "print the compiled plans");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail(Error(Errc::config_error, e.what()));
  }

  try {
    if (*rec) {
      EngineConfig cfg;
      cfg.model = rec_model.build();
      cfg.approx_hierarchy = approx;
      cfg.run_cap = run_cap;
      cfg.lineage_cap = lineage_cap;
      cfg.instance_marginals = report == "marginal";
      if (report == "per-match") cfg.prune_threshold = threshold;
      RuleSet rules = load_rules(rules_path);
      Engine engine(compile(rules), cfg);
      Output out(output_path);
      std::vector<Match> matches;
      if (report == "per-match") {
        engine.on_match([&](const Match& m) {
          if (m.prob >= threshold) out.out() << instance_to_line(m.ce) << "\n";
        });
      } else if (report == "marginal") {
        engine.on_instance([&](const CEInstance& c) {
          if (c.prob >= threshold) out.out() << instance_to_line(c) << "\n";
        });
      } else {
        engine.on_match([&](const Match& m) { matches.push_back(m); });
      }
      for_each_event(input_path, [&](ProbEvent e) { engine.ingest(e); });
      engine.flush();
      if (report == "map" && !matches.empty()) {
        const Match& best = map_query(matches);
        if (best.prob >= threshold) out.out() << instance_to_line(best.ce) << "\n";
      }
      if (show_stats) {
        const auto& s = engine.stats();
        json j{{"events", s.events},       {"runs_created", s.runs_created}, {"peak_runs", s.peak_runs},
               {"evicted", s.evicted},     {"pruned", s.pruned},             {"matches", s.matches},
               {"instances", s.instances}};
        std::cerr << j.dump() << "\n";
      }
      return 0;
    }
    if (*orc) {
      OracleConfig cfg;
      cfg.model = orc_model.build();
      cfg.space_cap = space_cap;
      RuleSet rules = load_rules(rules_path);
      if (!query_type.empty() && !rules.defines(query_type)) {
        throw Error(Errc::no_such_ce, "no rule defines " + query_type);
      }
      std::vector<ProbEvent> events;
      for_each_event(input_path, [&](ProbEvent e) { events.push_back(std::move(e)); });
      auto res = run_oracle(rules, events, cfg);
      std::cerr << json{{"histories", res.histories}}.dump() << "\n";
      Output out(output_path);
      for (const auto& [key, p] : res.marginals) {
        if (!query_type.empty() && key.ce_type != query_type) continue;
        CEInstance ce{key.ce_type, key.attrs, key.ts, p, {}};
        out.out() << instance_to_line(ce) << "\n";
      }
      return 0;
    }
    if (*sc) {
      auto m = score(read_instances_file(predicted_path), read_instances_file(gold_path), threshold);
      json j{{"tp", m.tp},
             {"fp", m.fp},
             {"fn", m.fn},
             {"precision", round9(m.precision)},
             {"recall", round9(m.recall)},
             {"f_measure", round9(m.f_measure)},
             {"precision_defined", m.precision_defined},
             {"recall_defined", m.recall_defined}};
      std::cout << j.dump() << "\n";
      return 0;
    }
    if (*bn) {
      auto events = generate_stream(spec);
      if (!write_stream.empty()) {
        Output out(write_stream);
        for (const auto& e : events) out.out() << event_to_line(e) << "\n";
      }
      RuleSet rules = parse_rules(kleene ? kleene_rule(spec, window) : sequence_rule(spec, window));
      EngineConfig cfg;
      cfg.prune_threshold = threshold;
      cfg.run_cap = run_cap;
      auto r = run_bench(rules, events, cfg);
      json j{{"events", r.events},
             {"matches", r.matches},
             {"seconds", round9(r.seconds)},
             {"events_per_sec", round9(r.events_per_sec)},
             {"mean_latency_us", round9(r.mean_latency_us)},
             {"p99_latency_us", round9(r.p99_latency_us)},
             {"peak_runs", r.peak_runs},
             {"runs_created", r.runs_created}};
      std::cout << j.dump() << "\n";
      return 0;
    }
    if (*val) {
      RuleSet rules = load_rules(rules_path);
      for (const auto& r : rules.rules) {
        for (const auto& d : validate_bindings(r)) {
          json j{{"error", std::string(errc_name(d.code))}, {"variable", d.variable}, {"message", d.message}};
          std::cerr << j.dump() << "\n";
        }
      }
      HierarchyPlan plan = compile(rules);
      if (dump) {
        std::cout << dump_plan(plan);
      } else {
        std::cout << json{{"rules", rules.rules.size()}, {"plans", plan.plans.size()}}.dump() << "\n";
      }
      return 0;
    }
  } catch (const Error& e) {
    return fail(e);
  } catch (const std::exception& e) {
    return fail(Error(Errc::io_error, e.what()));
  }
  return 0;
}
