#pragma once

// Flat `key = value` run configuration. Values resolve as
// built-in default < config file < command-line flag.

#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "empo/entropy_reward.hpp"
#include "empo/policy_sim.hpp"

namespace empo {

inline constexpr const char* kConfigEnvVar = "EMPO_CONFIG";

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class JudgeMode { RuleBased, External };

struct RunConfig {
  TrainConfig train{};
  JudgeMode judge_mode = JudgeMode::RuleBased;
  std::string judge_command;
  std::size_t workers = 1;

  GateConfig gate() const { return train.gate; }
  AdvantageConfig advantage() const { return {train.clip_epsilon, train.std_floor}; }

  static const std::vector<std::string>& keys() {
    static const std::vector<std::string> k = {
        "group_size",   "learning_rate", "steps",          "inner_epochs",
        "clip_epsilon", "std_floor",     "delta_low",      "delta_high",
        "normalize_by_log_g", "gate_enabled", "objective", "seed",
        "questions_per_step", "judge_mode", "judge_command", "workers"};
    return k;
  }

  void set(const std::string& key, const std::string& value);

  void validate() const {
    try {
      train.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (judge_mode == JudgeMode::External && judge_command.empty()) {
      throw ConfigError("judge_mode = external requires judge_command");
    }
  }
};

namespace config_detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double to_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  double d = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0') throw ConfigError(key + ": expected a number, got '" + v + "'");
  return d;
}

inline std::uint64_t to_unsigned(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  try {
    return std::stoull(v);
  } catch (const std::out_of_range&) {
    throw ConfigError(key + ": value out of range");
  }
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

}  // namespace config_detail

inline void RunConfig::set(const std::string& key, const std::string& value) {
  using namespace config_detail;
  auto& t = train;
  if (key == "group_size") t.group_size = to_unsigned(key, value);
  else if (key == "learning_rate") t.learning_rate = to_double(key, value);
  else if (key == "steps") t.steps = to_unsigned(key, value);
  else if (key == "inner_epochs") t.inner_epochs = to_unsigned(key, value);
  else if (key == "clip_epsilon") t.clip_epsilon = to_double(key, value);
  else if (key == "std_floor") t.std_floor = to_double(key, value);
  else if (key == "delta_low") t.gate.delta_low = to_double(key, value);
  else if (key == "delta_high") t.gate.delta_high = to_double(key, value);
  else if (key == "normalize_by_log_g") t.gate.normalize_by_log_g = to_bool(key, value);
  else if (key == "gate_enabled") t.gate.enabled = to_bool(key, value);
  else if (key == "objective") {
    auto o = parse_objective(value);
    if (!o) throw ConfigError("objective: expected EMPO or GRPO-oracle, got '" + value + "'");
    t.objective = *o;
  } else if (key == "seed") t.rng_seed = to_unsigned(key, value);
  else if (key == "questions_per_step") t.questions_per_step = to_unsigned(key, value);
  else if (key == "judge_mode") {
    if (value == "rule") judge_mode = JudgeMode::RuleBased;
    else if (value == "external") judge_mode = JudgeMode::External;
    else throw ConfigError("judge_mode: expected 'rule' or 'external', got '" + value + "'");
  } else if (key == "judge_command") judge_command = value;
  else if (key == "workers") workers = to_unsigned(key, value);
  else throw ConfigError("unknown configuration key '" + key + "'");
}

/// Parses `key = value` lines; `#` starts a comment, blank lines are ignored.
inline std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text) {
  using config_detail::trim;
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    out.emplace_back(std::move(key), trim(line.substr(eq + 1)));
  }
  return out;
}

/// Applies the file text (if any), then the flag overrides, onto defaults.
inline RunConfig resolve_config(const std::optional<std::string>& file_text,
                                const std::map<std::string, std::string>& flags) {
  RunConfig cfg;
  if (file_text) {
    for (const auto& [k, v] : parse_config_text(*file_text)) cfg.set(k, v);
  }
  for (const auto& [k, v] : flags) cfg.set(k, v);
  cfg.validate();
  return cfg;
}

/// Contents of the file named by EMPO_CONFIG, or nullopt when unset or empty.
inline std::optional<std::string> config_file_from_env() {
  const char* path = std::getenv(kConfigEnvVar);
  if (path == nullptr || *path == '\0') return std::nullopt;
  std::ifstream in(path);
  if (!in) throw ConfigError(std::string("cannot read config file '") + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace empo
