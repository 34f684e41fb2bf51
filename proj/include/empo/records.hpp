#pragma once

// Line-delimited record formats (one JSON object per line) for batches,
// rewards, banks and policies, plus the CSV forms of metrics and pass@k
// curves.

#include <cmath>
#include <cstdlib>
#include <cstddef>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "empo/entropy_reward.hpp"
#include "empo/policy_sim.hpp"

namespace empo {

using Json = nlohmann::ordered_json;

class RecordError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace records_detail {

inline Json parse_object(const std::string& line) {
  Json j;
  try {
    j = Json::parse(line);
  } catch (const Json::parse_error& e) {
    throw RecordError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw RecordError("record is not a JSON object");
  return j;
}

inline const Json& field(const Json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) throw RecordError(std::string("missing field '") + name + "'");
  return *it;
}

inline std::string string_field(const Json& j, const char* name) {
  const Json& v = field(j, name);
  if (!v.is_string()) throw RecordError(std::string("field '") + name + "' must be a string");
  return v.get<std::string>();
}

inline double number_field(const Json& j, const char* name) {
  const Json& v = field(j, name);
  if (!v.is_number()) throw RecordError(std::string("field '") + name + "' must be a number");
  return v.get<double>();
}

inline std::size_t index_field(const Json& j, const char* name) {
  const Json& v = field(j, name);
  if (!v.is_number_unsigned()) {
    throw RecordError(std::string("field '") + name + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

inline std::vector<std::string> string_array(const Json& v, const char* name) {
  if (!v.is_array()) throw RecordError(std::string("field '") + name + "' must be an array");
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string()) throw RecordError(std::string("field '") + name + "' must hold strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

inline std::vector<double> number_array(const Json& v, const char* name) {
  if (!v.is_array()) throw RecordError(std::string("field '") + name + "' must be an array");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) throw RecordError(std::string("field '") + name + "' must hold numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

// Shortest text that reads back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

}  // namespace records_detail

// --- batch input -------------------------------------------------------------

struct BatchRecord {
  std::string question_id;
  std::string prompt;
  std::vector<std::string> samples;
  std::optional<std::string> golden_answer;

  RolloutGroup to_group() const {
    RolloutGroup g{question_id, prompt, {}};
    for (const auto& s : samples) g.outputs.push_back(RawOutput{s});
    return g;
  }

  std::optional<OracleLabel> label() const {
    if (!golden_answer) return std::nullopt;
    return OracleLabel{question_id, *golden_answer};
  }
};

inline BatchRecord parse_batch_record(const std::string& line) {
  using namespace records_detail;
  const Json j = parse_object(line);
  BatchRecord r;
  r.question_id = string_field(j, "question_id");
  r.prompt = string_field(j, "prompt");
  r.samples = string_array(field(j, "samples"), "samples");
  if (r.samples.empty()) throw RecordError("field 'samples' must be non-empty");
  if (auto it = j.find("golden_answer"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw RecordError("field 'golden_answer' must be a string");
    r.golden_answer = it->get<std::string>();
  }
  return r;
}

inline std::string to_line(const BatchRecord& r) {
  Json j;
  j["question_id"] = r.question_id;
  j["prompt"] = r.prompt;
  j["samples"] = r.samples;
  if (r.golden_answer) j["golden_answer"] = *r.golden_answer;
  return j.dump();
}

// --- reward output -----------------------------------------------------------

struct RewardRecord {
  std::string question_id;
  std::size_t sample_index = 0;
  std::size_t cluster_id = 0;
  double reward = 0.0;
  double advantage = 0.0;
  double entropy_nats = 0.0;
  bool gated = false;
  std::optional<double> reward_oracle;

  friend bool operator==(const RewardRecord&, const RewardRecord&) = default;
};

inline std::vector<RewardRecord> to_records(const RewardedGroup& g) {
  std::vector<RewardRecord> out;
  out.reserve(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    RewardRecord r;
    r.question_id = g.question_id;
    r.sample_index = i;
    r.cluster_id = g.cluster_of[i];
    r.reward = g.rewards[i];
    r.advantage = g.advantages[i];
    r.entropy_nats = g.entropy_nats;
    r.gated = g.gated;
    if (g.oracle_rewards) r.reward_oracle = (*g.oracle_rewards)[i];
    out.push_back(std::move(r));
  }
  return out;
}

inline std::string to_line(const RewardRecord& r) {
  Json j;
  j["question_id"] = r.question_id;
  j["sample_index"] = r.sample_index;
  j["cluster_id"] = r.cluster_id;
  j["reward"] = r.reward;
  j["advantage"] = r.advantage;
  j["entropy_nats"] = r.entropy_nats;
  j["gated"] = r.gated;
  if (r.reward_oracle) j["reward_oracle"] = *r.reward_oracle;
  return j.dump();
}

inline RewardRecord parse_reward_record(const std::string& line) {
  using namespace records_detail;
  const Json j = parse_object(line);
  RewardRecord r;
  r.question_id = string_field(j, "question_id");
  r.sample_index = index_field(j, "sample_index");
  r.cluster_id = index_field(j, "cluster_id");
  r.reward = number_field(j, "reward");
  r.advantage = number_field(j, "advantage");
  r.entropy_nats = number_field(j, "entropy_nats");
  const Json& gated = field(j, "gated");
  if (!gated.is_boolean()) throw RecordError("field 'gated' must be a boolean");
  r.gated = gated.get<bool>();
  if (j.contains("reward_oracle")) r.reward_oracle = number_field(j, "reward_oracle");
  return r;
}

/// Regroups a record stream (consecutive records per question, indices
/// 0..G-1 in order) into RewardedGroups.
inline std::vector<RewardedGroup> groups_from_records(const std::vector<RewardRecord>& recs) {
  std::vector<RewardedGroup> out;
  for (const auto& r : recs) {
    const bool starts = r.sample_index == 0;
    if (!starts) {
      if (out.empty() || out.back().question_id != r.question_id ||
          out.back().size() != r.sample_index) {
        throw RecordError("record " + r.question_id + "/" + std::to_string(r.sample_index) +
                          " is out of sequence");
      }
    } else {
      RewardedGroup g;
      g.question_id = r.question_id;
      g.entropy_nats = r.entropy_nats;
      g.gated = r.gated;
      if (r.reward_oracle) g.oracle_rewards.emplace();
      out.push_back(std::move(g));
    }
    RewardedGroup& g = out.back();
    if (r.entropy_nats != g.entropy_nats || r.gated != g.gated ||
        r.reward_oracle.has_value() != g.oracle_rewards.has_value()) {
      throw RecordError("records of question '" + g.question_id + "' disagree on group fields");
    }
    g.rewards.push_back(r.reward);
    g.advantages.push_back(r.advantage);
    g.cluster_of.push_back(r.cluster_id);
    if (r.reward_oracle) g.oracle_rewards->push_back(*r.reward_oracle);
  }
  return out;
}

// --- banks and policies ------------------------------------------------------

inline std::string to_line(const SyntheticQuestion& q) {
  Json j;
  j["question_id"] = q.question_id;
  j["prompt"] = q.prompt;
  Json meanings = Json::array();
  for (const auto& m : q.meanings) {
    meanings.push_back(Json{{"canonical", m.canonical}, {"surfaces", m.surfaces}});
  }
  j["meanings"] = std::move(meanings);
  j["unparseable"] = q.unparseable;
  j["correct_meaning"] = q.correct_meaning ? Json(*q.correct_meaning) : Json(nullptr);
  j["init_logits"] = q.init_logits;
  return j.dump();
}

inline SyntheticQuestion parse_question(const std::string& line) {
  using namespace records_detail;
  const Json j = parse_object(line);
  SyntheticQuestion q;
  q.question_id = string_field(j, "question_id");
  q.prompt = j.contains("prompt") ? string_field(j, "prompt") : std::string{};
  const Json& ms = field(j, "meanings");
  if (!ms.is_array()) throw RecordError("field 'meanings' must be an array");
  for (const auto& m : ms) {
    if (!m.is_object()) throw RecordError("each meaning must be an object");
    q.meanings.push_back({string_field(m, "canonical"), string_array(field(m, "surfaces"), "surfaces")});
  }
  if (j.contains("unparseable")) q.unparseable = string_array(j["unparseable"], "unparseable");
  if (auto it = j.find("correct_meaning"); it != j.end() && !it->is_null()) {
    q.correct_meaning = index_field(j, "correct_meaning");
  }
  q.init_logits = number_array(field(j, "init_logits"), "init_logits");
  return q;
}

inline void write_bank(std::ostream& out, const Bank& bank) {
  for (const auto& q : bank) out << to_line(q) << '\n';
}

/// Reads and validates a bank. Blank lines are ignored.
inline Bank read_bank(std::istream& in) {
  Bank bank;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      bank.push_back(parse_question(line));
    } catch (const RecordError& e) {
      throw RecordError("bank line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  validate_bank(bank);
  return bank;
}

inline void write_policy(std::ostream& out, const PolicyTable& p) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    Json j;
    j["question_id"] = p.question_ids[i];
    j["logits"] = p.logits[i];
    out << j.dump() << '\n';
  }
}

inline PolicyTable read_policy(std::istream& in) {
  using namespace records_detail;
  PolicyTable p;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const Json j = parse_object(line);
      p.question_ids.push_back(string_field(j, "question_id"));
      p.logits.push_back(number_array(field(j, "logits"), "logits"));
    } catch (const RecordError& e) {
      throw RecordError("policy line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return p;
}

// --- CSV ---------------------------------------------------------------------

inline constexpr const char* kMetricsHeader = "step,mean_entropy,mean_reward,accuracy,frac_gated";

inline void write_metrics_csv(std::ostream& out, const MetricsTrace& trace) {
  using records_detail::format_double;
  out << kMetricsHeader << '\n';
  for (const auto& r : trace) {
    out << r.step << ',' << format_double(r.mean_entropy) << ',' << format_double(r.mean_reward)
        << ',' << format_double(r.accuracy) << ',' << format_double(r.frac_gated) << '\n';
  }
}

inline MetricsTrace read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.substr(0, line.find_last_not_of("\r") + 1) != kMetricsHeader) {
    throw RecordError(std::string("metrics file must start with header '") + kMetricsHeader + "'");
  }
  MetricsTrace trace;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 5) {
      throw RecordError("metrics line " + std::to_string(lineno) + ": expected 5 columns");
    }
    auto num = [&](const std::string& s) {
      char* end = nullptr;
      double v = std::strtod(s.c_str(), &end);
      if (end == s.c_str() || (*end != '\0' && *end != '\r')) {
        throw RecordError("metrics line " + std::to_string(lineno) + ": bad number '" + s + "'");
      }
      return v;
    };
    MetricsRecord r;
    r.step = static_cast<std::size_t>(num(cells[0]));
    r.mean_entropy = num(cells[1]);
    r.mean_reward = num(cells[2]);
    r.accuracy = num(cells[3]);
    r.frac_gated = num(cells[4]);
    trace.push_back(r);
  }
  return trace;
}

struct CurveRow {
  std::string label;
  std::size_t k;
  double mean_pass_at_k;
};

inline void write_curve_csv(std::ostream& out, const std::vector<CurveRow>& rows) {
  out << "label,k,mean_pass_at_k\n";
  for (const auto& r : rows) {
    out << r.label << ',' << r.k << ',' << records_detail::format_double(r.mean_pass_at_k) << '\n';
  }
}

}  // namespace empo
