#pragma once

// Semantic entropy, cluster-likelihood rewards, rule-based oracle rewards,
// group-normalized advantages and the dual entropy gate.

#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "empo/answer_canon.hpp"
#include "empo/semantic_cluster.hpp"

namespace empo {

/// Groups are optimized only when delta_low < H' < delta_high, where H' is
/// the entropy in nats, or H / ln G when normalize_by_log_g is set.
struct GateConfig {
  double delta_low = 0.05;
  double delta_high = 0.90;
  bool normalize_by_log_g = true;
  bool enabled = true;

  void validate() const {
    if (!(delta_low >= 0.0)) throw std::invalid_argument("gate: delta_low must be >= 0");
    if (!(delta_low < delta_high)) {
      throw std::invalid_argument("gate: delta_low must be < delta_high");
    }
  }
};

struct AdvantageConfig {
  double clip_epsilon = 0.2;
  double std_floor = 1e-6;

  void validate() const {
    if (!(clip_epsilon > 0.0)) throw std::invalid_argument("clip_epsilon must be > 0");
    if (!(std_floor > 0.0)) throw std::invalid_argument("std_floor must be > 0");
  }
};

struct OracleLabel {
  std::string question_id;
  std::string golden_answer;
};

struct RewardedGroup {
  std::string question_id;
  double entropy_nats = 0.0;
  std::vector<double> rewards;
  std::vector<double> advantages;
  bool gated = false;
  std::vector<std::size_t> cluster_of;
  /// Present iff an oracle label was supplied.
  std::optional<std::vector<double>> oracle_rewards;

  std::size_t size() const noexcept { return rewards.size(); }
};

/// H = -sum_j p_j ln p_j with p_j = |c_j| / G, evaluated as
/// sum_j (|c_j| / G) (ln G - ln |c_j|) so that one cluster gives exactly 0.
inline double entropy_from_sizes(const std::vector<std::size_t>& sizes) {
  std::size_t g = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  if (g == 0) throw std::invalid_argument("entropy: empty partition");
  const double log_g = std::log(static_cast<double>(g));
  double h = 0.0;
  for (std::size_t n : sizes) {
    if (n == 0) continue;
    h += static_cast<double>(n) / static_cast<double>(g) *
         (log_g - std::log(static_cast<double>(n)));
  }
  return h < 0.0 ? 0.0 : h;
}

inline double semantic_entropy(const ClusterPartition& part) {
  return entropy_from_sizes(partition_signature(part));
}

/// r_i = |c(i)| / G.
inline std::vector<double> empo_rewards(const ClusterPartition& part) {
  std::vector<double> r(part.group_size);
  for (std::size_t i = 0; i < part.group_size; ++i) {
    r[i] = part.probability(part.cluster_of[i]);
  }
  return r;
}

inline constexpr double kOracleCorrect = 1.0;
inline constexpr double kOracleWrong = 0.0;
inline constexpr double kOracleUnparseable = -0.5;

inline std::vector<double> grpo_rewards(const std::vector<ExtractedAnswer>& answers,
                                        const OracleLabel& label) {
  const std::string gold = canonicalize(label.golden_answer);
  std::vector<double> r;
  r.reserve(answers.size());
  for (const auto& a : answers) {
    if (!a.parsed()) r.push_back(kOracleUnparseable);
    else r.push_back(a.canonical == gold ? kOracleCorrect : kOracleWrong);
  }
  return r;
}

inline std::vector<double> grpo_rewards(const RolloutGroup& group, const OracleLabel& label) {
  return grpo_rewards(extract_group(group), label);
}

/// A_i = (r_i - mean) / std with the population std. Groups whose std falls
/// below the floor get all-zero advantages.
inline std::vector<double> normalize_advantages(const std::vector<double>& rewards,
                                                const AdvantageConfig& cfg = {}) {
  if (rewards.empty()) throw std::invalid_argument("normalize_advantages: empty rewards");
  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= n;
  const double sd = std::sqrt(var);
  std::vector<double> adv(rewards.size(), 0.0);
  if (sd < cfg.std_floor) return adv;
  for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = (rewards[i] - mean) / sd;
  return adv;
}

/// Entropy as compared against the gate thresholds.
inline double gate_statistic(double entropy_nats, std::size_t group_size,
                             const GateConfig& cfg) {
  if (!cfg.normalize_by_log_g) return entropy_nats;
  if (group_size <= 1) return 0.0;
  return entropy_nats / std::log(static_cast<double>(group_size));
}

/// True when the group is excluded from optimization.
inline bool apply_gate(double entropy_nats, std::size_t group_size, const GateConfig& cfg) {
  if (!cfg.enabled) return false;
  const double h = gate_statistic(entropy_nats, group_size, cfg);
  return !(cfg.delta_low < h && h < cfg.delta_high);
}

/// Cluster, score and gate one group. Gated groups keep their rewards and
/// entropy but report all-zero advantages. JudgeError propagates.
inline RewardedGroup reward_group(const RolloutGroup& group, const EquivalenceJudge& judge,
                                  const GateConfig& gate_cfg, const AdvantageConfig& adv_cfg,
                                  const std::optional<OracleLabel>& label = std::nullopt) {
  auto answers = extract_group(group);
  ClusterPartition part = cluster_answers(group, answers, judge);
  RewardedGroup out;
  out.question_id = group.question_id;
  out.entropy_nats = semantic_entropy(part);
  out.rewards = empo_rewards(part);
  out.cluster_of = part.cluster_of;
  out.gated = apply_gate(out.entropy_nats, group.size(), gate_cfg);
  out.advantages = out.gated ? std::vector<double>(group.size(), 0.0)
                             : normalize_advantages(out.rewards, adv_cfg);
  if (label) out.oracle_rewards = grpo_rewards(answers, *label);
  return out;
}

inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// (mean EMPO reward, mean oracle reward) for a labelled group.
inline std::optional<std::pair<double, double>> reward_pair(const RewardedGroup& g) {
  if (!g.oracle_rewards) return std::nullopt;
  return std::pair{mean_of(g.rewards), mean_of(*g.oracle_rewards)};
}

}  // namespace empo
