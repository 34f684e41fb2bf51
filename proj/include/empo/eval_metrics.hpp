#pragma once

// Pass@k estimation, smoothing and rank/linear correlation helpers.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "empo/entropy_reward.hpp"
#include "empo/policy_sim.hpp"
#include "empo/rng.hpp"
#include "empo/semantic_cluster.hpp"

namespace empo {

struct SampleOutcomeSet {
  std::string question_id;
  std::size_t n = 0;
  std::size_t c = 0;
};

namespace metrics_detail {

using Integer = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

inline Integer binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  Integer r = 1;
  for (std::size_t i = 1; i <= k; ++i) {
    r *= n - k + i;
    r /= i;
  }
  return r;
}

}  // namespace metrics_detail

/// Unbiased estimator 1 - C(n-c, k) / C(n, k) in exact arithmetic.
inline boost::multiprecision::cpp_rational pass_at_k_exact(std::size_t n, std::size_t c,
                                                           std::size_t k) {
  using metrics_detail::binomial;
  if (n < 1) throw std::invalid_argument("pass_at_k: n must be >= 1");
  if (c > n) throw std::invalid_argument("pass_at_k: c must be <= n");
  if (k < 1 || k > n) throw std::invalid_argument("pass_at_k: k must be in [1, n]");
  return metrics_detail::Rational(1) -
         metrics_detail::Rational(binomial(n - c, k), binomial(n, k));
}

inline double pass_at_k(const SampleOutcomeSet& s, std::size_t k) {
  return pass_at_k_exact(s.n, s.c, k).convert_to<double>();
}

/// Count of correct outcomes among n draws from the question's policy.
inline SampleOutcomeSet sample_outcomes(std::span<const double> logits,
                                        const SyntheticQuestion& q, std::size_t n, Rng& rng) {
  const auto probs = softmax(logits);
  SampleOutcomeSet s{q.question_id, n, 0};
  for (std::size_t i = 0; i < n; ++i) s.c += q.is_correct_outcome(sample_index(probs, rng)) ? 1 : 0;
  return s;
}

/// Mean pass@k over the bank for each distinct k, ascending by k.
inline std::vector<std::pair<std::size_t, double>> pass_at_k_curve(
    const PolicyTable& policy, const Bank& bank, std::size_t n, std::vector<std::size_t> ks,
    Rng& rng) {
  policy.check_matches(bank);
  if (ks.empty()) throw std::invalid_argument("pass_at_k_curve: no k values");
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  if (ks.front() < 1 || ks.back() > n) {
    throw std::invalid_argument("pass_at_k_curve: every k must lie in [1, n]");
  }
  if (!bank_has_labels(bank)) throw std::invalid_argument("pass_at_k_curve: bank lacks labels");
  std::vector<double> sums(ks.size(), 0.0);
  for (std::size_t i = 0; i < bank.size(); ++i) {
    auto s = sample_outcomes(policy.logits[i], bank[i], n, rng);
    for (std::size_t j = 0; j < ks.size(); ++j) sums[j] += pass_at_k(s, ks[j]);
  }
  std::vector<std::pair<std::size_t, double>> curve;
  for (std::size_t j = 0; j < ks.size(); ++j) {
    curve.emplace_back(ks[j], sums[j] / static_cast<double>(bank.size()));
  }
  return curve;
}

/// s_0 = x_0, s_t = alpha x_t + (1 - alpha) s_{t-1}.
inline std::vector<double> exponential_smoothing(const std::vector<double>& xs, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("smoothing alpha must be in (0, 1]");
  std::vector<double> out(xs.size());
  for (std::size_t t = 0; t < xs.size(); ++t) {
    out[t] = t == 0 ? xs[0] : alpha * xs[t] + (1.0 - alpha) * out[t - 1];
  }
  return out;
}

/// Pearson coefficient; nullopt when either series is constant.
inline std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
  if (x.size() < 2) return std::nullopt;
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Ranks starting at 1; ties share their average rank.
inline std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

inline std::optional<double> spearman(const std::vector<double>& x, const std::vector<double>& y) {
  return pearson(average_ranks(x), average_ranks(y));
}

struct CorrelationReport {
  /// (semantic entropy, accuracy) pairs.
  std::vector<std::pair<double, double>> pairs;
  /// Spearman coefficient; nullopt marks a degenerate (constant) series.
  std::optional<double> coefficient;
  std::size_t samples = 0;

  bool degenerate() const noexcept { return !coefficient.has_value(); }
};

inline CorrelationReport entropy_accuracy_correlation(std::vector<std::pair<double, double>> records) {
  if (records.size() < 3) throw std::invalid_argument("correlation needs at least 3 records");
  std::vector<double> h, acc;
  for (const auto& [e, a] : records) {
    h.push_back(e);
    acc.push_back(a);
  }
  CorrelationReport r;
  r.coefficient = spearman(h, acc);
  r.samples = records.size();
  r.pairs = std::move(records);
  return r;
}

/// Step-wise (mean entropy, accuracy) pairs of a training trace.
inline CorrelationReport entropy_accuracy_correlation(const MetricsTrace& trace) {
  std::vector<std::pair<double, double>> pairs;
  for (const auto& rec : trace) pairs.emplace_back(rec.mean_entropy, rec.accuracy);
  return entropy_accuracy_correlation(std::move(pairs));
}

/// Per-question (semantic entropy, group accuracy) of one group of
/// `group_size` samples drawn from the current policy.
inline std::vector<std::pair<double, double>> question_snapshot(const PolicyTable& policy,
                                                                const Bank& bank,
                                                                std::size_t group_size, Rng& rng) {
  policy.check_matches(bank);
  const auto judge = EquivalenceJudge::rule_based();
  std::vector<std::pair<double, double>> out;
  for (std::size_t i = 0; i < bank.size(); ++i) {
    auto s = sample_rollouts(policy.logits[i], bank[i], group_size, rng);
    const double h = semantic_entropy(cluster_group(s.group, judge));
    std::size_t hits = 0;
    for (std::size_t k : s.outcomes) hits += bank[i].is_correct_outcome(k) ? 1 : 0;
    out.emplace_back(h, static_cast<double>(hits) / static_cast<double>(group_size));
  }
  return out;
}

}  // namespace empo
