#pragma once

// Greedy single-pass meaning clustering of a rollout group and the empirical
// meaning distribution p(c_j | q) = |c_j| / G.

#include <algorithm>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "empo/answer_canon.hpp"

namespace empo {

struct RolloutGroup {
  std::string question_id;
  std::string prompt;
  std::vector<RawOutput> outputs;

  std::size_t size() const noexcept { return outputs.size(); }
};

/// Raised when an external judge cannot produce a verdict.
class JudgeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Cache of external verdicts keyed by (question_id, unordered canonical pair).
/// Safe for concurrent use.
class JudgeCache {
 public:
  std::optional<bool> find(const std::string& qid, const std::string& a,
                           const std::string& b) const {
    std::shared_lock lock(mutex_);
    auto it = entries_.find(key(qid, a, b));
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  void insert(const std::string& qid, const std::string& a,
              const std::string& b, bool verdict) {
    std::unique_lock lock(mutex_);
    entries_.emplace(key(qid, a, b), verdict);
  }

  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
  }

 private:
  using Key = std::tuple<std::string, std::string, std::string>;

  static Key key(const std::string& qid, const std::string& a,
                 const std::string& b) {
    return a <= b ? Key{qid, a, b} : Key{qid, b, a};
  }

  mutable std::shared_mutex mutex_;
  std::map<Key, bool> entries_;
};

/// Decides whether two parsed answers share a meaning.
///
/// RuleBased compares canonical forms and ignores the question. External
/// forwards (question, answer_a, answer_b) to a callable that may throw
/// JudgeError; one direction is queried and trusted as symmetric.
class EquivalenceJudge {
 public:
  enum class Mode { RuleBased, External };
  using Callable = std::function<bool(const std::string& question,
                                      const std::string& answer_a,
                                      const std::string& answer_b)>;

  EquivalenceJudge() = default;

  static EquivalenceJudge rule_based() { return {}; }

  static EquivalenceJudge external(Callable fn,
                                   std::shared_ptr<JudgeCache> cache =
                                       std::make_shared<JudgeCache>()) {
    EquivalenceJudge j;
    j.mode_ = Mode::External;
    j.fn_ = std::move(fn);
    j.cache_ = std::move(cache);
    return j;
  }

  Mode mode() const noexcept { return mode_; }

  bool operator()(const RolloutGroup& group, const ExtractedAnswer& a,
                  const ExtractedAnswer& b) const {
    if (!a.parsed() || !b.parsed()) return false;
    if (mode_ == Mode::RuleBased) return are_equivalent(a, b);
    if (cache_) {
      if (auto hit = cache_->find(group.question_id, a.canonical, b.canonical)) {
        return *hit;
      }
    }
    bool verdict = fn_(group.prompt, a.surface, b.surface);
    if (cache_) cache_->insert(group.question_id, a.canonical, b.canonical, verdict);
    return verdict;
  }

 private:
  Mode mode_ = Mode::RuleBased;
  Callable fn_;
  std::shared_ptr<JudgeCache> cache_;
};

struct ClusterPartition {
  std::size_t group_size = 0;
  /// Output indices per cluster, each in insertion order.
  std::vector<std::vector<std::size_t>> clusters;
  /// cluster_of[i] = index into `clusters` holding output i.
  std::vector<std::size_t> cluster_of;

  std::size_t num_clusters() const noexcept { return clusters.size(); }
  std::size_t cluster_size(std::size_t j) const { return clusters[j].size(); }

  /// p_j = |c_j| / G as an exact (numerator, denominator) pair.
  std::pair<std::size_t, std::size_t> probability_fraction(std::size_t j) const {
    return {clusters[j].size(), group_size};
  }

  double probability(std::size_t j) const {
    return static_cast<double>(clusters[j].size()) / static_cast<double>(group_size);
  }

  std::vector<double> probabilities() const {
    std::vector<double> p(clusters.size());
    for (std::size_t j = 0; j < clusters.size(); ++j) p[j] = probability(j);
    return p;
  }
};

inline std::vector<ExtractedAnswer> extract_group(const RolloutGroup& group) {
  std::vector<ExtractedAnswer> out;
  out.reserve(group.outputs.size());
  for (const auto& o : group.outputs) out.push_back(extract_final_answer(o));
  return out;
}

/// Greedy clustering over already-extracted answers. Each output is compared
/// with the first member of every existing cluster in creation order and
/// joins the first match; unparseable outputs always open a singleton.
inline ClusterPartition cluster_answers(const RolloutGroup& group,
                                        const std::vector<ExtractedAnswer>& answers,
                                        const EquivalenceJudge& judge) {
  if (answers.empty()) throw std::invalid_argument("cluster_group: empty group");
  ClusterPartition part;
  part.group_size = answers.size();
  part.cluster_of.assign(answers.size(), 0);
  for (std::size_t i = 0; i < answers.size(); ++i) {
    std::size_t target = part.clusters.size();
    if (answers[i].parsed()) {
      for (std::size_t j = 0; j < part.clusters.size(); ++j) {
        const auto& rep = answers[part.clusters[j].front()];
        if (judge(group, rep, answers[i])) {
          target = j;
          break;
        }
      }
    }
    if (target == part.clusters.size()) part.clusters.emplace_back();
    part.clusters[target].push_back(i);
    part.cluster_of[i] = target;
  }
  return part;
}

inline ClusterPartition cluster_group(const RolloutGroup& group,
                                      const EquivalenceJudge& judge) {
  return cluster_answers(group, extract_group(group), judge);
}

/// Cluster sizes sorted descending; partitions with equal signatures have
/// equal entropy.
inline std::vector<std::size_t> partition_signature(const ClusterPartition& part) {
  std::vector<std::size_t> sizes;
  sizes.reserve(part.clusters.size());
  for (const auto& c : part.clusters) sizes.push_back(c.size());
  std::sort(sizes.begin(), sizes.end(), std::greater<>());
  return sizes;
}

}  // namespace empo
