#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "empo/commands.hpp"
#include "oracles.hpp"

using namespace empo;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / ("empo_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string boxed(const std::string& a) { return "reasoning... \\boxed{" + a + "}"; }

BatchRecord running_example_record() {
  return {"q-running", "Find it.", {boxed("4"), boxed("2"), boxed("4"), boxed("1"), boxed("4"),
                                    boxed("2"), boxed("4")}, std::nullopt};
}

struct RewardRun {
  int code;
  std::string out;
  std::string err;
};

RewardRun run_reward(const std::string& input, const RunConfig& cfg = {}) {
  std::istringstream in(input);
  std::ostringstream out, err;
  int code = cmd_reward(in, out, err, cfg);
  return {code, out.str(), err.str()};
}

std::vector<RewardRecord> parse_all(const std::string& text) {
  std::vector<RewardRecord> v;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) v.push_back(parse_reward_record(line));
  return v;
}

// Synthetic batch with varied group sizes, answers and labels.
std::string synthetic_batch(std::size_t groups, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::vector<std::string> answers = {"1/2", "0.5", "3", "3.0", "7", "(1,2)", "B", "b"};
  std::string text;
  for (std::size_t g = 0; g < groups; ++g) {
    BatchRecord r;
    r.question_id = "g" + std::to_string(g);
    r.prompt = "question " + std::to_string(g);
    const std::size_t size = 2 + rng() % 8;
    for (std::size_t i = 0; i < size; ++i) {
      r.samples.push_back(rng() % 6 == 0 ? "unfinished" : boxed(answers[rng() % answers.size()]));
    }
    if (g % 3 == 0) r.golden_answer = answers[rng() % answers.size()];
    text += to_line(r) + "\n";
  }
  return text;
}

int run_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " EMPO_CLI_PATH " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

// --- config -------------------------------------------------------------------

TEST(Config, DefaultsMatchLibraryDefaults) {
  const auto cfg = resolve_config(std::nullopt, {});
  EXPECT_EQ(cfg.train.group_size, TrainConfig{}.group_size);
  EXPECT_EQ(cfg.train.gate.delta_low, 0.05);
  EXPECT_EQ(cfg.train.gate.delta_high, 0.90);
  EXPECT_EQ(cfg.judge_mode, JudgeMode::RuleBased);
  EXPECT_EQ(cfg.workers, 1u);
}

TEST(Config, FileParsingWithComments) {
  const auto kv = parse_config_text("# header\n  steps = 12  # trailing\n\nobjective=GRPO-oracle\n");
  ASSERT_EQ(kv.size(), 2u);
  EXPECT_EQ(kv[0], (std::pair<std::string, std::string>{"steps", "12"}));
  EXPECT_EQ(kv[1], (std::pair<std::string, std::string>{"objective", "GRPO-oracle"}));
}

TEST(Config, UnknownKeyIsAnError) {
  EXPECT_THROW(resolve_config(std::string("stpes = 3\n"), {}), ConfigError);
  EXPECT_THROW(resolve_config(std::nullopt, {{"bogus", "1"}}), ConfigError);
  EXPECT_THROW(resolve_config(std::string("steps 3\n"), {}), ConfigError);
}

TEST(Config, BadValuesAreErrors) {
  EXPECT_THROW(resolve_config(std::nullopt, {{"steps", "-1"}}), ConfigError);
  EXPECT_THROW(resolve_config(std::nullopt, {{"learning_rate", "fast"}}), ConfigError);
  EXPECT_THROW(resolve_config(std::nullopt, {{"gate_enabled", "maybe"}}), ConfigError);
  EXPECT_THROW(resolve_config(std::nullopt, {{"group_size", "1"}}), ConfigError);
  EXPECT_THROW(resolve_config(std::nullopt, {{"judge_mode", "external"}}), ConfigError);
}

// For every key: default < file < flag.
TEST(Config, PrecedencePerKey) {
  struct Case {
    std::string key, file_value, flag_value;
    std::function<std::string(const RunConfig&)> get;
  };
  auto num = [](double v) { return records_detail::format_double(v); };
  const std::vector<Case> cases = {
      {"group_size", "6", "5", [](auto& c) { return std::to_string(c.train.group_size); }},
      {"learning_rate", "0.25", "0.125", [&](auto& c) { return num(c.train.learning_rate); }},
      {"steps", "11", "13", [](auto& c) { return std::to_string(c.train.steps); }},
      {"inner_epochs", "2", "3", [](auto& c) { return std::to_string(c.train.inner_epochs); }},
      {"clip_epsilon", "0.1", "0.3", [&](auto& c) { return num(c.train.clip_epsilon); }},
      {"std_floor", "1e-05", "0.0001", [&](auto& c) { return num(c.train.std_floor); }},
      {"delta_low", "0.01", "0.02", [&](auto& c) { return num(c.train.gate.delta_low); }},
      {"delta_high", "0.8", "0.7", [&](auto& c) { return num(c.train.gate.delta_high); }},
      {"normalize_by_log_g", "false", "true",
       [](auto& c) { return std::string(c.train.gate.normalize_by_log_g ? "true" : "false"); }},
      {"gate_enabled", "false", "true",
       [](auto& c) { return std::string(c.train.gate.enabled ? "true" : "false"); }},
      {"objective", "GRPO-oracle", "EMPO", [](auto& c) { return std::string(to_string(c.train.objective)); }},
      {"seed", "101", "202", [](auto& c) { return std::to_string(c.train.rng_seed); }},
      {"questions_per_step", "4", "9", [](auto& c) { return std::to_string(c.train.questions_per_step); }},
      {"judge_command", "cat", "tac", [](auto& c) { return c.judge_command; }},
      {"workers", "3", "4", [](auto& c) { return std::to_string(c.workers); }},
  };
  for (const auto& c : cases) {
    const std::string dflt = c.get(resolve_config(std::nullopt, {}));
    const std::string file = c.key + " = " + c.file_value + "\n";
    const std::string from_file = c.get(resolve_config(file, {}));
    const std::string from_flag = c.get(resolve_config(file, {{c.key, c.flag_value}}));
    EXPECT_EQ(from_file, c.file_value) << c.key;
    EXPECT_NE(from_file, dflt) << c.key;
    EXPECT_EQ(from_flag, c.flag_value) << c.key;
  }
  // judge_mode needs a command to validate.
  const std::string file = "judge_mode = external\njudge_command = cat\n";
  EXPECT_EQ(resolve_config(file, {}).judge_mode, JudgeMode::External);
  EXPECT_EQ(resolve_config(file, {{"judge_mode", "rule"}}).judge_mode, JudgeMode::RuleBased);
}

// --- records ------------------------------------------------------------------

TEST(Records, BatchRecordValidation) {
  EXPECT_NO_THROW(parse_batch_record(R"({"question_id":"a","prompt":"p","samples":["x"]})"));
  EXPECT_THROW(parse_batch_record(R"({"question_id":"a","prompt":"p","samples":[]})"), RecordError);
  EXPECT_THROW(parse_batch_record(R"({"question_id":"a","samples":["x"]})"), RecordError);
  EXPECT_THROW(parse_batch_record(R"({"question_id":1,"prompt":"p","samples":["x"]})"), RecordError);
  EXPECT_THROW(parse_batch_record("not json"), RecordError);
  EXPECT_THROW(parse_batch_record("[1,2]"), RecordError);
}

TEST(Records, BankAndPolicyRoundTrip) {
  auto bank = generate_bank(*find_profile("modal-wrong-100"), 9);
  bank[4].correct_meaning.reset();
  std::stringstream ss;
  write_bank(ss, bank);
  const Bank back = read_bank(ss);
  ASSERT_EQ(back.size(), bank.size());
  for (std::size_t i = 0; i < bank.size(); ++i) {
    EXPECT_EQ(back[i].question_id, bank[i].question_id);
    EXPECT_EQ(back[i].init_logits, bank[i].init_logits);
    EXPECT_EQ(back[i].correct_meaning, bank[i].correct_meaning);
    EXPECT_EQ(back[i].unparseable, bank[i].unparseable);
    for (std::size_t m = 0; m < bank[i].meanings.size(); ++m) {
      EXPECT_EQ(back[i].meanings[m].surfaces, bank[i].meanings[m].surfaces);
    }
  }
  const auto policy = PolicyTable::from_bank(bank);
  std::stringstream ps;
  write_policy(ps, policy);
  EXPECT_EQ(read_policy(ps), policy);
}

TEST(Records, MetricsCsvRoundTrip) {
  MetricsTrace t = {{0, 1.0 / 3, 0.1, std::numeric_limits<double>::quiet_NaN(), 0.25},
                    {1, 0.7, 2.0 / 7, 0.5, 0.0}};
  std::stringstream ss;
  write_metrics_csv(ss, t);
  EXPECT_EQ(ss.str().substr(0, ss.str().find('\n')), "step,mean_entropy,mean_reward,accuracy,frac_gated");
  const auto back = read_metrics_csv(ss);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].mean_entropy, 1.0 / 3);
  EXPECT_TRUE(std::isnan(back[0].accuracy));
  EXPECT_EQ(back[1], t[1]);
}

// --- reward command -----------------------------------------------------------

TEST(RewardCommand, RunningExampleEndToEnd) {
  const auto r = run_reward(to_line(running_example_record()) + "\n");
  EXPECT_EQ(r.code, kExitOk);
  const auto recs = parse_all(r.out);
  ASSERT_EQ(recs.size(), 7u);
  const auto adv = oracle::advantages({{4, 7}, {2, 7}, {4, 7}, {1, 7}, {4, 7}, {2, 7}, {4, 7}});
  const std::vector<double> reward = {4.0 / 7, 2.0 / 7, 4.0 / 7, 1.0 / 7, 4.0 / 7, 2.0 / 7, 4.0 / 7};
  for (std::size_t i = 0; i < 7; ++i) {
    EXPECT_EQ(recs[i].question_id, "q-running");
    EXPECT_EQ(recs[i].sample_index, i);
    EXPECT_DOUBLE_EQ(recs[i].reward, reward[i]);
    EXPECT_NEAR(recs[i].advantage, adv[i], 1e-9);
    EXPECT_NEAR(recs[i].entropy_nats, oracle::entropy({4, 2, 1}), 1e-12);
    EXPECT_FALSE(recs[i].gated);
    EXPECT_FALSE(recs[i].reward_oracle.has_value());
  }
  EXPECT_EQ(recs[1].cluster_id, recs[5].cluster_id);
  EXPECT_NE(recs[0].cluster_id, recs[3].cluster_id);
}

TEST(RewardCommand, EmptyInput) {
  const auto r = run_reward("");
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_TRUE(r.out.empty());
  EXPECT_TRUE(r.err.empty());
}

TEST(RewardCommand, GoldenAnswerAddsOracleReward) {
  BatchRecord rec{"q", "p", {boxed("325"), boxed("324"), "no answer"}, "325"};
  const auto recs = parse_all(run_reward(to_line(rec) + "\n").out);
  ASSERT_EQ(recs.size(), 3u);
  EXPECT_EQ(recs[0].reward_oracle, 1.0);
  EXPECT_EQ(recs[1].reward_oracle, 0.0);
  EXPECT_EQ(recs[2].reward_oracle, -0.5);
}

TEST(RewardCommand, MalformedLinesAreSkippedAndReported) {
  const std::string good = to_line(running_example_record());
  const auto r = run_reward(good + "\n{broken\n" + good + "\n");
  EXPECT_EQ(r.code, kExitPartial);
  EXPECT_EQ(parse_all(r.out).size(), 14u);
  EXPECT_NE(r.err.find("line 2"), std::string::npos);
}

TEST(RewardCommand, JudgeFailureSkipsGroup) {
  RunConfig cfg;
  cfg.judge_mode = JudgeMode::External;
  // Agrees on the first query, then dies.
  cfg.judge_command = "read line; echo NO; exit 0";
  BatchRecord a{"a", "p", {boxed("1"), boxed("2")}, std::nullopt};
  BatchRecord b{"b", "p", {boxed("3"), boxed("4")}, std::nullopt};
  BatchRecord c{"c", "p", {boxed("5")}, std::nullopt};
  const auto r = run_reward(to_line(a) + "\n" + to_line(b) + "\n" + to_line(c) + "\n", cfg);
  EXPECT_EQ(r.code, kExitPartial);
  const auto recs = parse_all(r.out);
  ASSERT_EQ(recs.size(), 3u);
  EXPECT_EQ(recs[0].question_id, "a");
  EXPECT_EQ(recs[2].question_id, "c");
  EXPECT_NE(r.err.find("judge failure"), std::string::npos);
}

TEST(RewardCommand, ExternalJudgeMatchesRuleBasedWhenItAgrees) {
  RunConfig ext;
  ext.judge_mode = JudgeMode::External;
  ext.judge_command =
      "while IFS=\"$(printf '\\t')\" read -r q a b; do "
      "a=$(printf %s \"$a\" | tr -d ' '); b=$(printf %s \"$b\" | tr -d ' '); "
      "if [ \"$a\" = \"$b\" ]; then echo YES; else echo NO; fi; done";
  BatchRecord rec{"q", "p", {boxed("7"), boxed(" 7 "), boxed("8"), boxed("7")}, std::nullopt};
  const auto rule = run_reward(to_line(rec) + "\n");
  const auto other = run_reward(to_line(rec) + "\n", ext);
  EXPECT_EQ(other.code, kExitOk);
  EXPECT_EQ(rule.out, other.out);
}

TEST(RewardCommand, OutputOrderIndependentOfWorkers) {
  const std::string batch = synthetic_batch(300, 5);
  RunConfig one, many;
  many.workers = 7;
  const auto a = run_reward(batch, one), b = run_reward(batch, many);
  EXPECT_EQ(a.code, kExitOk);
  EXPECT_EQ(a.out, b.out);
  const auto groups = groups_from_records(parse_all(a.out));
  ASSERT_EQ(groups.size(), 300u);
  for (std::size_t g = 0; g < groups.size(); ++g) EXPECT_EQ(groups[g].question_id, "g" + std::to_string(g));
}

TEST(RewardCommand, RecordsRoundTripToRewardedGroups) {
  const std::string batch = synthetic_batch(120, 8);
  const auto r = run_reward(batch);
  const auto groups = groups_from_records(parse_all(r.out));
  std::istringstream in(batch);
  std::string line;
  std::size_t i = 0;
  while (std::getline(in, line)) {
    const auto rec = parse_batch_record(line);
    const auto direct = reward_group(rec.to_group(), EquivalenceJudge::rule_based(), {}, {}, rec.label());
    const auto& back = groups.at(i++);
    EXPECT_EQ(back.question_id, direct.question_id);
    EXPECT_EQ(back.entropy_nats, direct.entropy_nats);
    EXPECT_EQ(back.rewards, direct.rewards);
    EXPECT_EQ(back.advantages, direct.advantages);
    EXPECT_EQ(back.gated, direct.gated);
    EXPECT_EQ(back.cluster_of, direct.cluster_of);
    EXPECT_EQ(back.oracle_rewards, direct.oracle_rewards);
  }
  EXPECT_EQ(i, groups.size());
}

// --- train / passk / correlate -----------------------------------------------

class FileCommands : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    std::ostringstream out, err;
    ASSERT_EQ(cmd_bankgen("modal-correct-100", 7, false, (scratch_dir() / "bank.jsonl").string(),
                          out, err),
              kExitOk);
    ASSERT_EQ(cmd_bankgen("modal-correct-70", 7, true, (scratch_dir() / "hidden.jsonl").string(),
                          out, err),
              kExitOk);
  }
  static std::string path(const std::string& name) { return (scratch_dir() / name).string(); }
};

TEST_F(FileCommands, TrainIsByteDeterministic) {
  RunConfig cfg;
  cfg.train.steps = 25;
  std::ostringstream out, err;
  ASSERT_EQ(cmd_train(path("bank.jsonl"), path("m1.csv"), path("p1.jsonl"), cfg, out, err), kExitOk);
  ASSERT_EQ(cmd_train(path("bank.jsonl"), path("m2.csv"), path("p2.jsonl"), cfg, out, err), kExitOk);
  EXPECT_EQ(slurp(path("m1.csv")), slurp(path("m2.csv")));
  EXPECT_EQ(slurp(path("p1.jsonl")), slurp(path("p2.jsonl")));
  EXPECT_NE(out.str().find("final_accuracy="), std::string::npos);
  EXPECT_NE(out.str().find("final_mean_entropy="), std::string::npos);
}

TEST_F(FileCommands, TrainWithZeroStepsWritesOnlySnapshotRow) {
  RunConfig cfg;
  cfg.train.steps = 0;
  std::ostringstream out, err;
  ASSERT_EQ(cmd_train(path("bank.jsonl"), path("m0.csv"), path("p0.jsonl"), cfg, out, err), kExitOk);
  std::ifstream f(path("m0.csv"));
  const auto trace = read_metrics_csv(f);
  ASSERT_EQ(trace.size(), 1u);
  EXPECT_EQ(trace[0].step, 0u);
  std::ifstream pf(path("p0.jsonl"));
  std::ifstream bf(path("bank.jsonl"));
  EXPECT_EQ(read_policy(pf), PolicyTable::from_bank(read_bank(bf)));
}

TEST_F(FileCommands, GrpoOnHiddenLabelsIsStartupError) {
  RunConfig cfg;
  cfg.train.objective = Objective::GrpoOracle;
  std::ostringstream out, err;
  EXPECT_EQ(cmd_train(path("hidden.jsonl"), path("mx.csv"), path("px.jsonl"), cfg, out, err), kExitUsage);
  EXPECT_FALSE(fs::exists(path("mx.csv")));
}

TEST_F(FileCommands, InvalidBankIsStartupError) {
  std::ofstream(path("bad.jsonl")) << R"({"question_id":"x","meanings":[],"init_logits":[]})" << '\n';
  std::ostringstream out, err;
  EXPECT_EQ(cmd_train(path("bad.jsonl"), path("mb.csv"), path("pb.jsonl"), RunConfig{}, out, err),
            kExitUsage);
}

TEST_F(FileCommands, PasskRejectsKAboveNBeforeSampling) {
  PasskRequest req{path("does-not-exist.jsonl"), {{"base", ""}}, 8, {1, 9}, 7, "-"};
  std::ostringstream out, err;
  EXPECT_EQ(cmd_passk(req, out, err), kExitUsage);
  EXPECT_NE(err.str().find("k = 9"), std::string::npos);
}

TEST_F(FileCommands, PasskRowsSortedAndSaturatedPolicyIsOne) {
  std::ifstream bf(path("bank.jsonl"));
  const Bank bank = read_bank(bf);
  auto sat = PolicyTable::from_bank(bank);
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const auto correct_outcome = [&] {
      for (std::size_t k = 0;; ++k) {
        if (bank[i].is_correct_outcome(k)) return k;
      }
    }();
    sat.logits[i][correct_outcome] = 60;
  }
  std::ofstream(path("sat.jsonl")) << [&] {
    std::ostringstream s;
    write_policy(s, sat);
    return s.str();
  }();
  PasskRequest req{path("bank.jsonl"), {{"sat", path("sat.jsonl")}}, 16, {16, 1, 4}, 7, "-"};
  std::ostringstream out, err;
  ASSERT_EQ(cmd_passk(req, out, err), kExitOk);
  EXPECT_EQ(out.str(), "label,k,mean_pass_at_k\nsat,1,1\nsat,4,1\nsat,16,1\n");
}

// Trained modal-correct-100 policy: sampled pass@1 tracks greedy accuracy.
TEST_F(FileCommands, PassAtOneNearGreedyOnTrainedPolicy) {
  RunConfig cfg;
  std::ostringstream out, err;
  ASSERT_EQ(cmd_train(path("bank.jsonl"), path("mt.csv"), path("pt.jsonl"), cfg, out, err), kExitOk);
  PasskRequest req{path("bank.jsonl"), {{"trained", path("pt.jsonl")}}, 64, {1}, 7, path("curve.csv")};
  ASSERT_EQ(cmd_passk(req, out, err), kExitOk);
  std::ifstream cf(path("curve.csv"));
  std::string header, row;
  std::getline(cf, header);
  std::getline(cf, row);
  const double pass1 = std::stod(row.substr(row.rfind(',') + 1));
  std::ifstream bf(path("bank.jsonl")), pf(path("pt.jsonl"));
  const Bank bank = read_bank(bf);
  EXPECT_NEAR(pass1, greedy_accuracy(read_policy(pf), bank), 0.05);
}

TEST_F(FileCommands, CorrelateMetricsAndRecords) {
  RunConfig cfg;
  cfg.train.steps = 40;
  std::ostringstream tout, terr;
  ASSERT_EQ(cmd_train(path("bank.jsonl"), path("mc.csv"), path("pc.jsonl"), cfg, tout, terr), kExitOk);
  std::ostringstream out, err;
  ASSERT_EQ(cmd_correlate(path("mc.csv"), 0.1, out, err), kExitOk);
  EXPECT_EQ(out.str().rfind("source=metrics samples=41 spearman=", 0), 0u) << out.str();

  std::ofstream(path("rewards.jsonl")) << run_reward(synthetic_batch(90, 2)).out;
  std::ostringstream out2, err2;
  // Only every third group is labelled in the synthetic batch.
  EXPECT_EQ(cmd_correlate(path("rewards.jsonl"), std::nullopt, out2, err2), kExitUsage);
  std::string labelled;
  {
    std::istringstream in(synthetic_batch(90, 2));
    std::string line;
    while (std::getline(in, line)) {
      auto rec = parse_batch_record(line);
      if (!rec.golden_answer) rec.golden_answer = "3";
      labelled += to_line(rec) + "\n";
    }
  }
  std::ofstream(path("rewards2.jsonl")) << run_reward(labelled).out;
  std::ostringstream out3, err3;
  ASSERT_EQ(cmd_correlate(path("rewards2.jsonl"), std::nullopt, out3, err3), kExitOk);
  EXPECT_EQ(out3.str().rfind("source=records samples=90 spearman=", 0), 0u) << out3.str();
}

TEST_F(FileCommands, CorrelateReportsDegenerateMarker) {
  std::ofstream(path("flat.csv")) << "step,mean_entropy,mean_reward,accuracy,frac_gated\n"
                                  << "0,0.5,0.1,0.2,0\n1,0.5,0.1,0.4,0\n2,0.5,0.1,0.6,0\n";
  std::ostringstream out, err;
  ASSERT_EQ(cmd_correlate(path("flat.csv"), std::nullopt, out, err), kExitOk);
  EXPECT_EQ(out.str(), "source=metrics samples=3 spearman=degenerate\n");
}

// --- executable ----------------------------------------------------------------

TEST(Executable, ExitCodes) {
  const fs::path cfg = scratch_dir() / "typo.conf";
  std::ofstream(cfg) << "setps = 3\n";
  EXPECT_EQ(run_cli("bankgen -o /dev/null"), 0);
  EXPECT_EQ(run_cli("bankgen --profile nope -o /dev/null"), 2);
  EXPECT_EQ(run_cli("bankgen -o /dev/null", "EMPO_CONFIG=" + cfg.string()), 2);
  EXPECT_EQ(run_cli("--no-such-flag bankgen"), 2);
  EXPECT_EQ(run_cli("reward < /dev/null"), 0);
  EXPECT_EQ(run_cli("reward < /dev/null", "EMPO_CONFIG=/nonexistent/file"), 2);
}

TEST(Executable, FlagBeatsEnvironmentConfigFile) {
  const fs::path cfg = scratch_dir() / "steps.conf";
  std::ofstream(cfg) << "steps = 2\nseed = 3\n";
  const auto bank = (scratch_dir() / "exe_bank.jsonl").string();
  ASSERT_EQ(run_cli("bankgen -o " + bank), 0);
  const auto m1 = (scratch_dir() / "exe_m1.csv").string();
  const auto m2 = (scratch_dir() / "exe_m2.csv").string();
  const auto pol = (scratch_dir() / "exe_p.jsonl").string();
  const std::string env = "EMPO_CONFIG=" + cfg.string();
  ASSERT_EQ(run_cli("train --bank " + bank + " --metrics " + m1 + " --policy-out " + pol, env), 0);
  ASSERT_EQ(run_cli("train --steps 4 --bank " + bank + " --metrics " + m2 + " --policy-out " + pol, env), 0);
  std::ifstream f1(m1), f2(m2);
  EXPECT_EQ(read_metrics_csv(f1).size(), 3u);
  EXPECT_EQ(read_metrics_csv(f2).size(), 5u);
}
