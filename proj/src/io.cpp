#include "probcer/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "probcer/error.hpp"

namespace probcer {

using ojson = nlohmann::ordered_json;

namespace {

AttrValue to_value(const ojson& j, const std::string& where) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_number_float()) return j.get<double>();
  throw Error(Errc::syntax_error, where + ": attribute values must be scalars");
}

ojson from_value(const AttrValue& v) {
  return std::visit([](const auto& x) { return ojson(x); }, v);
}

AttrList to_attrs(const ojson& j, const std::string& where) {
  if (!j.is_object()) throw Error(Errc::syntax_error, where + ": args must be an object");
  AttrList out;
  for (const auto& [k, v] : j.items()) out.push_back({k, to_value(v, where)});
  return out;
}

ojson parse_json(const std::string& line, int line_no) {
  try {
    return ojson::parse(line);
  } catch (const ojson::parse_error& e) {
    throw Error(Errc::syntax_error, "malformed JSON: " + std::string(e.what()), line_no, 0);
  }
}

double prob_of(const ojson& j, const std::string& where) {
  if (!j.contains("prob")) return 1.0;
  if (!j["prob"].is_number()) throw Error(Errc::syntax_error, where + ": prob must be a number");
  return j["prob"].get<double>();
}

}  // namespace

double round9(double v) {
  if (!std::isfinite(v) || v == 0.0) return v;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return std::strtod(buf, nullptr);
}

ProbEvent parse_event_line(const std::string& line, const std::string& fallback_id) {
  ojson j = parse_json(line, 0);
  const std::string where = "event " + fallback_id;
  if (!j.is_object()) throw Error(Errc::syntax_error, where + ": record must be an object");
  RawEvent raw;
  if (j.contains("type")) {
    if (!j["type"].is_string()) throw Error(Errc::syntax_error, where + ": type must be a string");
    raw.type = j["type"].get<std::string>();
  }
  if (j.contains("ts")) {
    if (!j["ts"].is_number_integer()) throw Error(Errc::syntax_error, where + ": ts must be an integer");
    raw.ts = j["ts"].get<std::int64_t>();
  }
  if (j.contains("id")) {
    if (!j["id"].is_string()) throw Error(Errc::syntax_error, where + ": id must be a string");
    raw.id = j["id"].get<std::string>();
  }
  if (j.contains("alts")) {
    if (!j["alts"].is_array()) throw Error(Errc::syntax_error, where + ": alts must be an array");
    for (const auto& a : j["alts"]) {
      raw.alternatives.push_back({to_attrs(a.value("args", ojson::object()), where), prob_of(a, where)});
    }
  } else {
    raw.alternatives.push_back({to_attrs(j.value("args", ojson::object()), where), prob_of(j, where)});
  }
  return validate_event(raw, fallback_id);
}

std::vector<ProbEvent> read_events(std::istream& in) {
  std::vector<ProbEvent> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_event_line(line, "e" + std::to_string(out.size() + 1)));
    } catch (const Error& e) {
      throw Error(e.code(), e.what(), line_no, 0);
    }
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<ProbEvent> read_events_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot open " + path);
  return read_events(in);
}

std::string event_to_line(const ProbEvent& e) {
  ojson j;
  j["type"] = e.type;
  j["ts"] = e.ts;
  ojson alts = ojson::array();
  for (const auto& a : e.alternatives) {
    ojson args = ojson::object();
    for (const auto& at : a.attrs) args[at.name] = from_value(at.value);
    alts.push_back({{"args", args}, {"prob", round9(a.prob)}});
  }
  j["alts"] = alts;
  j["id"] = e.id;
  return j.dump();
}

std::string instance_to_line(const CEInstance& ce, bool gold) {
  ojson j;
  j["type"] = ce.ce_type;
  ojson attrs = ojson::object();
  for (const auto& a : ce.attrs) attrs[a.name] = from_value(a.value);
  j["attrs"] = attrs;
  j["ts"] = ce.ts;
  if (!gold) {
    j["prob"] = round9(ce.prob);
    j["ids"] = ce.contributing_ids;
  }
  return j.dump();
}

InstanceRecord parse_instance_line(const std::string& line, int line_no) {
  ojson j = parse_json(line, line_no);
  const std::string where = "line " + std::to_string(line_no);
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string() || !j.contains("ts") ||
      !j["ts"].is_number_integer()) {
    throw Error(Errc::syntax_error, where + ": expected type and integer ts", line_no, 0);
  }
  InstanceRecord r;
  r.ce.ce_type = j["type"].get<std::string>();
  r.ce.ts = j["ts"].get<std::int64_t>();
  if (j.contains("attrs")) r.ce.attrs = to_attrs(j["attrs"], where);
  if (j.contains("prob")) {
    r.ce.prob = prob_of(j, where);
    r.has_prob = true;
  } else {
    r.ce.prob = 1.0;
  }
  if (j.contains("ids")) {
    if (!j["ids"].is_array()) throw Error(Errc::syntax_error, where + ": ids must be an array", line_no, 0);
    for (const auto& id : j["ids"]) {
      if (!id.is_string()) throw Error(Errc::syntax_error, where + ": ids must be strings", line_no, 0);
      r.ce.contributing_ids.push_back(id.get<std::string>());
    }
  }
  return r;
}

std::vector<InstanceRecord> read_instances(std::istream& in) {
  std::vector<InstanceRecord> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_instance_line(line, line_no));
  }
  return out;
}

std::vector<InstanceRecord> read_instances_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot open " + path);
  return read_instances(in);
}

MetricsReport score(const std::vector<InstanceRecord>& predicted, const std::vector<InstanceRecord>& gold,
                    double threshold) {
  std::map<InstanceKey, std::size_t> unused;
  for (const auto& g : gold) ++unused[InstanceKey{g.ce.ce_type, g.ce.attrs, g.ce.ts}];
  MetricsReport m;
  for (const auto& p : predicted) {
    if (p.ce.prob < threshold) continue;
    auto it = unused.find(InstanceKey{p.ce.ce_type, p.ce.attrs, p.ce.ts});
    if (it != unused.end() && it->second > 0) {
      --it->second;
      ++m.tp;
    } else {
      ++m.fp;
    }
  }
  for (const auto& [k, n] : unused) m.fn += n;
  m.precision_defined = m.tp + m.fp > 0;
  m.recall_defined = m.tp + m.fn > 0;
  m.precision = m.precision_defined ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp) : 0.0;
  m.recall = m.recall_defined ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn) : 0.0;
  if (!m.recall_defined && !m.precision_defined) {
    m.precision = m.recall = 1.0;
    m.precision_defined = m.recall_defined = true;
  }
  m.f_measure = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

}  // namespace probcer
