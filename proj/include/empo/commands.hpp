#pragma once

// Subcommand bodies shared by the `empo` executable and the tests. Each takes
// explicit streams and returns the process exit code.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "empo/bank.hpp"
#include "empo/config.hpp"
#include "empo/eval_metrics.hpp"
#include "empo/policy_sim.hpp"
#include "empo/records.hpp"
#include "empo/subprocess_judge.hpp"

namespace empo {

inline constexpr int kExitOk = 0;
inline constexpr int kExitPartial = 1;
inline constexpr int kExitUsage = 2;

namespace cmd_detail {

// Opens `path` for writing, or returns nullptr for "-" (meaning `fallback`).
inline std::unique_ptr<std::ofstream> open_out(const std::string& path) {
  if (path == "-") return nullptr;
  auto f = std::make_unique<std::ofstream>(path, std::ios::binary);
  if (!*f) throw ConfigError("cannot write '" + path + "'");
  return f;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot read '" + path + "'");
  return f;
}

inline bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

struct Slot {
  std::size_t lineno = 0;
  std::string line;
  std::string output;
  std::string diagnostic;
};

inline void reward_one(Slot& slot, const EquivalenceJudge& judge, const RunConfig& cfg) {
  BatchRecord rec;
  try {
    rec = parse_batch_record(slot.line);
  } catch (const RecordError& e) {
    slot.diagnostic = "line " + std::to_string(slot.lineno) + ": malformed record: " + e.what();
    return;
  }
  try {
    const auto rg = reward_group(rec.to_group(), judge, cfg.gate(), cfg.advantage(), rec.label());
    std::string text;
    for (const auto& r : to_records(rg)) {
      text += to_line(r);
      text += '\n';
    }
    slot.output = std::move(text);
  } catch (const JudgeError& e) {
    slot.diagnostic = "line " + std::to_string(slot.lineno) + ": question '" + rec.question_id +
                      "': judge failure: " + e.what();
  }
}

}  // namespace cmd_detail

/// Streams BatchRecords from `in` to RewardRecords on `out`. Lines are read
/// in chunks, rewarded by `cfg.workers` threads, and written back in input
/// order, each group's records together.
inline int cmd_reward(std::istream& in, std::ostream& out, std::ostream& err, const RunConfig& cfg) {
  using cmd_detail::Slot;
  EquivalenceJudge judge = EquivalenceJudge::rule_based();
  std::shared_ptr<SubprocessJudge> proc;
  if (cfg.judge_mode == JudgeMode::External) {
    try {
      proc = std::make_shared<SubprocessJudge>(cfg.judge_command);
    } catch (const JudgeError& e) {
      err << "empo reward: " << e.what() << '\n';
      return kExitUsage;
    }
    judge = SubprocessJudge::make_judge(proc);
  }

  const std::size_t workers = std::max<std::size_t>(1, cfg.workers);
  const std::size_t chunk = 64 * workers;
  bool failed = false;
  std::size_t lineno = 0;
  std::vector<Slot> slots;
  std::string line;
  bool more = true;
  while (more) {
    slots.clear();
    while (slots.size() < chunk && (more = static_cast<bool>(std::getline(in, line)))) {
      ++lineno;
      if (cmd_detail::blank(line)) continue;
      slots.push_back({lineno, std::move(line), {}, {}});
    }
    if (slots.empty()) break;
    std::atomic<std::size_t> next{0};
    auto work = [&] {
      for (std::size_t i; (i = next.fetch_add(1)) < slots.size();) {
        cmd_detail::reward_one(slots[i], judge, cfg);
      }
    };
    if (workers == 1) {
      work();
    } else {
      std::vector<std::thread> pool;
      for (std::size_t w = 0; w < std::min(workers, slots.size()); ++w) pool.emplace_back(work);
      for (auto& t : pool) t.join();
    }
    for (const auto& s : slots) {
      if (!s.diagnostic.empty()) {
        err << "empo reward: " << s.diagnostic << '\n';
        failed = true;
      } else {
        out << s.output;
      }
    }
    out.flush();
  }
  return failed ? kExitPartial : kExitOk;
}

inline Bank load_bank(const std::string& path) {
  auto f = cmd_detail::open_in(path);
  return read_bank(f);
}

inline PolicyTable load_policy(const std::string& path) {
  auto f = cmd_detail::open_in(path);
  return read_policy(f);
}

/// Trains on the bank at `bank_path`; writes the metrics CSV and the final
/// policy, then prints a one-line summary on `out`.
inline int cmd_train(const std::string& bank_path, const std::string& metrics_path,
                     const std::string& policy_path, const RunConfig& cfg, std::ostream& out,
                     std::ostream& err) {
  Bank bank;
  try {
    bank = load_bank(bank_path);
    if (cfg.train.objective == Objective::GrpoOracle && !bank_has_labels(bank)) {
      throw ConfigError("objective GRPO-oracle needs correct_meaning on every question");
    }
  } catch (const std::exception& e) {
    err << "empo train: " << e.what() << '\n';
    return kExitUsage;
  }
  const TrainResult result = train(bank, cfg.train);
  try {
    auto m = cmd_detail::open_out(metrics_path);
    write_metrics_csv(m ? *m : out, result.trace);
    auto p = cmd_detail::open_out(policy_path);
    write_policy(p ? *p : out, result.policy);
  } catch (const ConfigError& e) {
    err << "empo train: " << e.what() << '\n';
    return kExitUsage;
  }
  const auto& last = result.trace.back();
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "objective=%s steps=%zu final_accuracy=%.4f final_mean_entropy=%.4f "
                "greedy_accuracy=%.4f frac_gated=%.4f",
                to_string(cfg.train.objective), cfg.train.steps, last.accuracy, last.mean_entropy,
                greedy_accuracy(result.policy, bank), last.frac_gated);
  // Keep stdout clean for data when either file goes there.
  (metrics_path == "-" || policy_path == "-" ? err : out) << buf << '\n';
  return kExitOk;
}

struct PasskRequest {
  std::string bank_path;
  /// (label, policy file); the label "base" with an empty path means the
  /// bank's initial logits.
  std::vector<std::pair<std::string, std::string>> policies;
  std::size_t n = 64;
  std::vector<std::size_t> ks;
  std::uint64_t seed = 7;
  std::string out_path = "-";
};

/// Every policy is evaluated with a fresh generator seeded identically, so
/// curves for different policies share random numbers.
inline int cmd_passk(const PasskRequest& req, std::ostream& out, std::ostream& err) {
  if (req.ks.empty() || req.n < 1) {
    err << "empo passk: need n >= 1 and at least one k\n";
    return kExitUsage;
  }
  for (std::size_t k : req.ks) {
    if (k < 1 || k > req.n) {
      err << "empo passk: k = " << k << " outside [1, n = " << req.n << "]\n";
      return kExitUsage;
    }
  }
  if (req.policies.empty()) {
    err << "empo passk: no policy given\n";
    return kExitUsage;
  }
  std::vector<CurveRow> rows;
  try {
    const Bank bank = load_bank(req.bank_path);
    if (!bank_has_labels(bank)) throw ConfigError("bank lacks correct_meaning labels");
    for (const auto& [label, path] : req.policies) {
      const PolicyTable policy = path.empty() ? PolicyTable::from_bank(bank) : load_policy(path);
      policy.check_matches(bank);
      Rng rng(req.seed);
      for (const auto& [k, v] : pass_at_k_curve(policy, bank, req.n, req.ks, rng)) {
        rows.push_back({label, k, v});
      }
    }
    auto f = cmd_detail::open_out(req.out_path);
    write_curve_csv(f ? *f : out, rows);
  } catch (const std::exception& e) {
    err << "empo passk: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitOk;
}

inline int cmd_bankgen(const std::string& profile_name, std::uint64_t seed, bool hide_labels,
                       const std::string& out_path, std::ostream& out, std::ostream& err) {
  auto profile = find_profile(profile_name);
  if (!profile) {
    err << "empo bankgen: unknown profile '" << profile_name << "'; known:";
    for (const auto& p : standard_profiles()) err << ' ' << p.name;
    err << '\n';
    return kExitUsage;
  }
  Bank bank = generate_bank(*profile, seed);
  if (hide_labels) {
    for (auto& q : bank) q.correct_meaning.reset();
  }
  try {
    auto f = cmd_detail::open_out(out_path);
    write_bank(f ? *f : out, bank);
  } catch (const ConfigError& e) {
    err << "empo bankgen: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitOk;
}

/// Spearman correlation between entropy and accuracy. A metrics CSV gives
/// one pair per step (optionally EMA-smoothed); a reward record file with
/// oracle rewards gives one pair per group, accuracy being the share of
/// samples with the correct-answer reward.
inline int cmd_correlate(const std::string& path, std::optional<double> smooth_alpha,
                         std::ostream& out, std::ostream& err) {
  std::vector<std::pair<double, double>> pairs;
  std::string source;
  try {
    auto f = cmd_detail::open_in(path);
    std::string first;
    std::getline(f, first);
    f.clear();
    f.seekg(0);
    if (first.rfind("step,", 0) == 0) {
      source = "metrics";
      const auto trace = read_metrics_csv(f);
      std::vector<double> h, a;
      for (const auto& r : trace) {
        if (std::isnan(r.accuracy)) throw RecordError("metrics file has no accuracy values");
        h.push_back(r.mean_entropy);
        a.push_back(r.accuracy);
      }
      if (smooth_alpha) {
        h = exponential_smoothing(h, *smooth_alpha);
        a = exponential_smoothing(a, *smooth_alpha);
      }
      for (std::size_t i = 0; i < h.size(); ++i) pairs.emplace_back(h[i], a[i]);
    } else {
      source = "records";
      std::vector<RewardRecord> recs;
      std::string line;
      std::size_t lineno = 0;
      while (std::getline(f, line)) {
        ++lineno;
        if (cmd_detail::blank(line)) continue;
        try {
          recs.push_back(parse_reward_record(line));
        } catch (const RecordError& e) {
          throw RecordError("line " + std::to_string(lineno) + ": " + e.what());
        }
      }
      for (const auto& g : groups_from_records(recs)) {
        if (!g.oracle_rewards) {
          throw RecordError("question '" + g.question_id + "' has no reward_oracle values");
        }
        const auto hits = std::count(g.oracle_rewards->begin(), g.oracle_rewards->end(),
                                     kOracleCorrect);
        pairs.emplace_back(g.entropy_nats,
                           static_cast<double>(hits) / static_cast<double>(g.size()));
      }
    }
  } catch (const std::exception& e) {
    err << "empo correlate: " << e.what() << '\n';
    return kExitUsage;
  }
  if (pairs.size() < 3) {
    err << "empo correlate: need at least 3 records, got " << pairs.size() << '\n';
    return kExitPartial;
  }
  const auto report = entropy_accuracy_correlation(std::move(pairs));
  out << "source=" << source << " samples=" << report.samples << " spearman=";
  if (report.degenerate()) {
    out << "degenerate";
  } else {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", *report.coefficient);
    out << buf;
  }
  out << '\n';
  return kExitOk;
}

}  // namespace empo
