#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "probcer/event.hpp"

namespace probcer {

/// Parses one JSONL record, either the full form
/// `{"type":..,"ts":..,"alts":[{"args":{..},"prob":p}],"id":..}` or the
/// single-alternative shorthand `{"type":..,"ts":..,"args":{..},"prob":p}`.
/// `args` keeps key order, which is the positional order atoms bind against.
ProbEvent parse_event_line(const std::string& line, const std::string& fallback_id);

/// Blank lines are skipped. Ids default to e1, e2, ... by record position.
std::vector<ProbEvent> read_events(std::istream& in);
std::vector<ProbEvent> read_events_file(const std::string& path);

std::string event_to_line(const ProbEvent& e);

/// `{"type":..,"attrs":{..},"ts":..,"prob":..,"ids":[..]}` with nine
/// significant digits. Gold lines omit prob and ids.
std::string instance_to_line(const CEInstance& ce, bool gold = false);

struct InstanceRecord {
  CEInstance ce;
  bool has_prob = false;
};
InstanceRecord parse_instance_line(const std::string& line, int line_no);
std::vector<InstanceRecord> read_instances(std::istream& in);
std::vector<InstanceRecord> read_instances_file(const std::string& path);

/// Rounds to nine significant digits, the precision used for every output.
double round9(double v);

std::string read_file(const std::string& path);

struct MetricsReport {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f_measure = 0.0;
  bool precision_defined = false;
  bool recall_defined = false;
};

/// A prediction with prob >= threshold whose (type, attrs, ts) matches an
/// unused gold line is a true positive. Predictions without a prob count as
/// certain.
MetricsReport score(const std::vector<InstanceRecord>& predicted, const std::vector<InstanceRecord>& gold,
                    double threshold);

}  // namespace probcer
