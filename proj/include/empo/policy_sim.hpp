#pragma once

// Tabular softmax policies over synthetic questions, trained with the
// clipped group-relative surrogate on either cluster-likelihood rewards
// (EMPO) or oracle rewards (GRPO-oracle).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "empo/answer_canon.hpp"
#include "empo/entropy_reward.hpp"
#include "empo/rng.hpp"
#include "empo/semantic_cluster.hpp"

namespace empo {

struct Meaning {
  std::string canonical;
  std::vector<std::string> surfaces;
};

/// One synthetic question. Outcomes are indexed meaning-major (all surfaces
/// of meaning 0, then meaning 1, ...) followed by the unparseable outcomes.
struct SyntheticQuestion {
  std::string question_id;
  std::string prompt;
  std::vector<Meaning> meanings;
  /// Outputs without a final boxed answer; each is its own cluster.
  std::vector<std::string> unparseable;
  /// Hidden from EMPO; required by GRPO-oracle and accuracy metrics.
  std::optional<std::size_t> correct_meaning;
  std::vector<double> init_logits;

  std::size_t num_answer_outcomes() const {
    std::size_t n = 0;
    for (const auto& m : meanings) n += m.surfaces.size();
    return n;
  }

  std::size_t num_outcomes() const { return num_answer_outcomes() + unparseable.size(); }

  /// Meaning of an outcome, or nullopt for unparseable outcomes.
  std::optional<std::size_t> outcome_meaning(std::size_t k) const {
    for (std::size_t m = 0; m < meanings.size(); ++m) {
      if (k < meanings[m].surfaces.size()) return m;
      k -= meanings[m].surfaces.size();
    }
    return std::nullopt;
  }

  std::string outcome_text(std::size_t k) const {
    for (const auto& m : meanings) {
      if (k < m.surfaces.size()) {
        return "Working through the problem step by step.\nThe final answer is \\boxed{" +
               m.surfaces[k] + "}.";
      }
      k -= m.surfaces.size();
    }
    return unparseable.at(k);
  }

  bool is_correct_outcome(std::size_t k) const {
    auto m = outcome_meaning(k);
    return m && correct_meaning && *m == *correct_meaning;
  }
};

using Bank = std::vector<SyntheticQuestion>;

/// Throws std::invalid_argument describing the first violated invariant.
inline void validate_question(const SyntheticQuestion& q) {
  const std::string where = "question '" + q.question_id + "': ";
  if (q.question_id.empty()) throw std::invalid_argument("question with empty id");
  if (q.meanings.size() < 2) throw std::invalid_argument(where + "needs at least 2 meanings");
  std::unordered_set<std::string> seen;
  for (const auto& m : q.meanings) {
    if (m.surfaces.empty()) throw std::invalid_argument(where + "meaning without surfaces");
    const std::string canon = canonicalize(m.canonical);
    if (canon.empty()) throw std::invalid_argument(where + "empty canonical meaning");
    if (!seen.insert(canon).second) {
      throw std::invalid_argument(where + "meanings '" + canon + "' collide");
    }
    for (const auto& s : m.surfaces) {
      if (canonicalize(s) != canon) {
        throw std::invalid_argument(where + "surface '" + s + "' does not canonicalize to '" +
                                    canon + "'");
      }
    }
  }
  for (const auto& u : q.unparseable) {
    if (extract_final_answer(RawOutput{u}).parsed()) {
      throw std::invalid_argument(where + "unparseable outcome has a boxed answer");
    }
  }
  if (q.init_logits.size() != q.num_outcomes()) {
    throw std::invalid_argument(where + "init_logits length does not match outcome count");
  }
  for (double v : q.init_logits) {
    if (!std::isfinite(v)) throw std::invalid_argument(where + "non-finite logit");
  }
  if (q.correct_meaning && *q.correct_meaning >= q.meanings.size()) {
    throw std::invalid_argument(where + "correct_meaning out of range");
  }
}

inline void validate_bank(const Bank& bank) {
  if (bank.empty()) throw std::invalid_argument("empty bank");
  std::unordered_set<std::string> ids;
  for (const auto& q : bank) {
    validate_question(q);
    if (!ids.insert(q.question_id).second) {
      throw std::invalid_argument("duplicate question id '" + q.question_id + "'");
    }
  }
}

inline bool bank_has_labels(const Bank& bank) {
  return std::all_of(bank.begin(), bank.end(),
                     [](const SyntheticQuestion& q) { return q.correct_meaning.has_value(); });
}

/// Per-question logits; row i belongs to bank[i].
struct PolicyTable {
  std::vector<std::string> question_ids;
  std::vector<std::vector<double>> logits;

  static PolicyTable from_bank(const Bank& bank) {
    PolicyTable p;
    for (const auto& q : bank) {
      p.question_ids.push_back(q.question_id);
      p.logits.push_back(q.init_logits);
    }
    return p;
  }

  std::size_t size() const noexcept { return logits.size(); }

  /// Checks that rows line up with the bank by id and outcome count.
  void check_matches(const Bank& bank) const {
    if (bank.size() != logits.size()) throw std::invalid_argument("policy/bank size mismatch");
    for (std::size_t i = 0; i < bank.size(); ++i) {
      if (question_ids[i] != bank[i].question_id) {
        throw std::invalid_argument("policy/bank question order mismatch at '" +
                                    bank[i].question_id + "'");
      }
      if (logits[i].size() != bank[i].num_outcomes()) {
        throw std::invalid_argument("policy/bank outcome count mismatch at '" +
                                    bank[i].question_id + "'");
      }
    }
  }

  friend bool operator==(const PolicyTable&, const PolicyTable&) = default;
};

inline std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.size());
  if (logits.empty()) return p;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    p[k] = std::exp(logits[k] - mx);
    z += p[k];
  }
  for (double& v : p) v /= z;
  return p;
}

inline std::vector<double> log_softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double v : logits) z += std::exp(v - mx);
  const double lz = mx + std::log(z);
  for (std::size_t k = 0; k < logits.size(); ++k) out[k] = logits[k] - lz;
  return out;
}

/// Draws one outcome index from a probability vector by inverse CDF.
inline std::size_t sample_index(const std::vector<double>& probs, Rng& rng) {
  double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    acc += probs[k];
    if (u < acc) return k;
  }
  // u landed in the rounding slack above the last partial sum.
  for (std::size_t k = probs.size(); k-- > 0;) {
    if (probs[k] > 0.0) return k;
  }
  return 0;
}

struct SampledGroup {
  RolloutGroup group;
  std::vector<std::size_t> outcomes;
};

/// G i.i.d. outcomes from softmax(logits), rendered as output texts.
inline SampledGroup sample_rollouts(std::span<const double> logits,
                                    const SyntheticQuestion& question, std::size_t group_size,
                                    Rng& rng) {
  if (group_size < 1) throw std::invalid_argument("sample_rollouts: group size must be >= 1");
  const auto probs = softmax(logits);
  SampledGroup s;
  s.group.question_id = question.question_id;
  s.group.prompt = question.prompt;
  s.outcomes.reserve(group_size);
  s.group.outputs.reserve(group_size);
  for (std::size_t i = 0; i < group_size; ++i) {
    std::size_t k = sample_index(probs, rng);
    s.outcomes.push_back(k);
    s.group.outputs.push_back(RawOutput{question.outcome_text(k)});
  }
  return s;
}

// --- clipped surrogate -----------------------------------------------------

/// (1/G) sum_i min(rho_i A_i, clip(rho_i, 1-eps, 1+eps) A_i) with
/// rho_i = pi(o_i) / pi_old(o_i).
inline double surrogate_objective(std::span<const double> logits,
                                  std::span<const double> old_logits,
                                  std::span<const std::size_t> outcomes,
                                  std::span<const double> advantages, double clip_epsilon) {
  const auto lp = log_softmax(logits);
  const auto lp_old = log_softmax(old_logits);
  double total = 0.0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const double rho = std::exp(lp[outcomes[i]] - lp_old[outcomes[i]]);
    const double clipped = std::clamp(rho, 1.0 - clip_epsilon, 1.0 + clip_epsilon);
    total += std::min(rho * advantages[i], clipped * advantages[i]);
  }
  return total / static_cast<double>(outcomes.size());
}

/// Analytic gradient of surrogate_objective with respect to `logits`.
/// A term contributes A_i rho_i (e_{o_i} - pi) / G while its unclipped branch
/// is the minimum, and nothing otherwise.
inline std::vector<double> surrogate_gradient(std::span<const double> logits,
                                              std::span<const double> old_logits,
                                              std::span<const std::size_t> outcomes,
                                              std::span<const double> advantages,
                                              double clip_epsilon) {
  const auto lp = log_softmax(logits);
  const auto lp_old = log_softmax(old_logits);
  const auto probs = softmax(logits);
  std::vector<double> grad(logits.size(), 0.0);
  const double inv_g = 1.0 / static_cast<double>(outcomes.size());
  double mass = 0.0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const double a = advantages[i];
    if (a == 0.0) continue;
    const double rho = std::exp(lp[outcomes[i]] - lp_old[outcomes[i]]);
    const double clipped = std::clamp(rho, 1.0 - clip_epsilon, 1.0 + clip_epsilon);
    if (rho * a > clipped * a) continue;
    const double coeff = a * rho * inv_g;
    grad[outcomes[i]] += coeff;
    mass += coeff;
  }
  for (std::size_t k = 0; k < grad.size(); ++k) grad[k] -= mass * probs[k];
  return grad;
}

struct StepConfig {
  double learning_rate = 0.3;
  std::size_t inner_epochs = 1;
  double clip_epsilon = 0.2;
};

/// Gradient ascent on the clipped surrogate for one question. The ratio is
/// taken against the logits as they were on entry. Gated groups leave the
/// logits untouched.
inline void empo_step(std::vector<double>& logits, std::span<const std::size_t> outcomes,
                      std::span<const double> advantages, bool gated, const StepConfig& cfg) {
  if (gated) return;
  if (outcomes.size() != advantages.size()) {
    throw std::invalid_argument("empo_step: outcomes/advantages length mismatch");
  }
  const std::vector<double> old = logits;
  for (std::size_t e = 0; e < cfg.inner_epochs; ++e) {
    const auto grad = surrogate_gradient(logits, old, outcomes, advantages, cfg.clip_epsilon);
    for (std::size_t k = 0; k < logits.size(); ++k) logits[k] += cfg.learning_rate * grad[k];
  }
}

// --- training loop ---------------------------------------------------------

enum class Objective { Empo, GrpoOracle };

inline const char* to_string(Objective o) {
  return o == Objective::Empo ? "EMPO" : "GRPO-oracle";
}

inline std::optional<Objective> parse_objective(const std::string& s) {
  if (s == "EMPO" || s == "empo") return Objective::Empo;
  if (s == "GRPO-oracle" || s == "grpo-oracle" || s == "GRPO" || s == "grpo") {
    return Objective::GrpoOracle;
  }
  return std::nullopt;
}

struct TrainConfig {
  std::size_t group_size = 8;
  double learning_rate = 0.3;
  std::size_t steps = 300;
  std::size_t inner_epochs = 1;
  double clip_epsilon = 0.2;
  double std_floor = 1e-6;
  GateConfig gate{};
  Objective objective = Objective::Empo;
  std::uint64_t rng_seed = 7;
  /// Questions per step; 0 means the whole bank every step.
  std::size_t questions_per_step = 0;

  void validate() const {
    if (group_size < 2) throw std::invalid_argument("group_size must be >= 2");
    if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning_rate must be >= 0");
    if (inner_epochs < 1) throw std::invalid_argument("inner_epochs must be >= 1");
    AdvantageConfig{clip_epsilon, std_floor}.validate();
    gate.validate();
  }
};

struct MetricsRecord {
  std::size_t step = 0;
  double mean_entropy = 0.0;
  double mean_reward = 0.0;
  /// Fraction of sampled outputs whose meaning is correct; NaN without labels.
  double accuracy = 0.0;
  double frac_gated = 0.0;

  friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

using MetricsTrace = std::vector<MetricsRecord>;

struct TrainResult {
  PolicyTable policy;
  MetricsTrace trace;
};

/// Per-question hook invoked after each optimization step.
struct StepEvent {
  std::size_t step;
  std::size_t question;
  bool gated;
  const std::vector<double>& logits_before;
  const std::vector<double>& logits_after;
  const RewardedGroup& rewarded;
};

using StepObserver = std::function<void(const StepEvent&)>;

namespace sim_detail {

struct GroupOutcome {
  RewardedGroup rewarded;
  double accuracy;
};

inline GroupOutcome score_group(const SyntheticQuestion& q, const SampledGroup& s,
                                const TrainConfig& cfg) {
  static const EquivalenceJudge judge = EquivalenceJudge::rule_based();
  const AdvantageConfig adv_cfg{cfg.clip_epsilon, cfg.std_floor};
  GroupOutcome out;
  if (cfg.objective == Objective::Empo) {
    out.rewarded = reward_group(s.group, judge, cfg.gate, adv_cfg);
  } else {
    std::optional<OracleLabel> label =
        OracleLabel{q.question_id, q.meanings[*q.correct_meaning].canonical};
    GateConfig no_gate = cfg.gate;
    no_gate.enabled = false;
    out.rewarded = reward_group(s.group, judge, no_gate, adv_cfg, label);
    out.rewarded.advantages = normalize_advantages(*out.rewarded.oracle_rewards, adv_cfg);
  }
  if (q.correct_meaning) {
    std::size_t hits = 0;
    for (std::size_t k : s.outcomes) hits += q.is_correct_outcome(k) ? 1 : 0;
    out.accuracy = static_cast<double>(hits) / static_cast<double>(s.outcomes.size());
  } else {
    out.accuracy = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

}  // namespace sim_detail

/// Runs `cfg.steps` optimization steps. Row 0 of the trace is a snapshot of
/// the initial policy (sampled, scored, not updated); row t describes the
/// groups sampled at step t before their update.
inline TrainResult train(const Bank& bank, const TrainConfig& cfg,
                         const StepObserver& observer = nullptr) {
  validate_bank(bank);
  cfg.validate();
  if (cfg.objective == Objective::GrpoOracle && !bank_has_labels(bank)) {
    throw std::invalid_argument("GRPO-oracle requires correct_meaning on every question");
  }
  TrainResult result{PolicyTable::from_bank(bank), {}};
  Rng rng(cfg.rng_seed);
  const StepConfig step_cfg{cfg.learning_rate, cfg.inner_epochs, cfg.clip_epsilon};

  std::vector<std::size_t> order(bank.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::size_t cursor = order.size();
  const std::size_t per_step = (cfg.questions_per_step == 0 || cfg.questions_per_step > bank.size())
                                   ? bank.size()
                                   : cfg.questions_per_step;

  auto run_step = [&](std::size_t step, const std::vector<std::size_t>& batch, bool update) {
    MetricsRecord rec;
    rec.step = step;
    std::size_t gated = 0;
    for (std::size_t qi : batch) {
      const auto& q = bank[qi];
      auto& logits = result.policy.logits[qi];
      auto sampled = sample_rollouts(logits, q, cfg.group_size, rng);
      auto scored = sim_detail::score_group(q, sampled, cfg);
      const auto& rg = scored.rewarded;
      rec.mean_entropy += rg.entropy_nats;
      rec.mean_reward += mean_of(rg.rewards);
      rec.accuracy += scored.accuracy;
      gated += rg.gated ? 1 : 0;
      if (!update) continue;
      if (observer) {
        const std::vector<double> before = logits;
        empo_step(logits, sampled.outcomes, rg.advantages, rg.gated, step_cfg);
        observer(StepEvent{step, qi, rg.gated, before, logits, rg});
      } else {
        empo_step(logits, sampled.outcomes, rg.advantages, rg.gated, step_cfg);
      }
    }
    const double n = static_cast<double>(batch.size());
    rec.mean_entropy /= n;
    rec.mean_reward /= n;
    rec.accuracy /= n;
    rec.frac_gated = static_cast<double>(gated) / n;
    result.trace.push_back(rec);
  };

  std::vector<std::size_t> all = order;
  run_step(0, all, false);
  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    std::vector<std::size_t> batch;
    batch.reserve(per_step);
    while (batch.size() < per_step) {
      if (cursor == order.size()) {
        rng.shuffle(order);
        cursor = 0;
      }
      batch.push_back(order[cursor++]);
    }
    run_step(step, batch, true);
  }
  return result;
}

/// Index of the largest logit; ties go to the lowest index.
inline std::size_t greedy_outcome(std::span<const double> logits) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < logits.size(); ++k) {
    if (logits[k] > logits[best]) best = k;
  }
  return best;
}

/// Fraction of labelled questions whose greedy outcome has the correct
/// meaning. NaN when no question is labelled.
inline double greedy_accuracy(const PolicyTable& policy, const Bank& bank) {
  policy.check_matches(bank);
  std::size_t labelled = 0, correct = 0;
  for (std::size_t i = 0; i < bank.size(); ++i) {
    if (!bank[i].correct_meaning) continue;
    ++labelled;
    correct += bank[i].is_correct_outcome(greedy_outcome(policy.logits[i])) ? 1 : 0;
  }
  if (labelled == 0) return std::numeric_limits<double>::quiet_NaN();
  return static_cast<double>(correct) / static_cast<double>(labelled);
}

}  // namespace empo
