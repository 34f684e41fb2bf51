#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "empo/commands.hpp"

using namespace empo;

int main(int argc, char** argv) {
  CLI::App app{"Semantic-entropy rewards, entropy-gated policy simulation and pass@k tools"};
  app.require_subcommand(1);

  // Every configuration key doubles as a flag; flags beat EMPO_CONFIG values.
  std::map<std::string, std::string> flag_values;
  std::map<std::string, CLI::Option*> flag_opts;
  for (const auto& key : RunConfig::keys()) {
    flag_opts[key] = app.add_option("--" + key, flag_values[key], "config key " + key);
  }

  auto* reward = app.add_subcommand("reward", "batch records (stdin) -> reward records (stdout)");
  std::string reward_in = "-";
  reward->add_option("-i,--input", reward_in, "input file, '-' for stdin");

  auto* trainc = app.add_subcommand("train", "train a tabular policy on a bank");
  std::string bank_path, metrics_path = "metrics.csv", policy_path = "policy.jsonl";
  trainc->add_option("--bank", bank_path, "bank file")->required();
  trainc->add_option("--metrics", metrics_path, "metrics CSV output");
  trainc->add_option("--policy-out", policy_path, "final policy output");

  auto* passk = app.add_subcommand("passk", "pass@k curves for one or more policies");
  PasskRequest preq;
  std::vector<std::string> policy_specs;
  std::string ks_text;
  bool include_base = false;
  passk->add_option("--bank", preq.bank_path, "bank file")->required();
  passk->add_option("--policy", policy_specs, "policy file, optionally LABEL=FILE (repeatable)");
  passk->add_flag("--base", include_base, "also evaluate the bank's initial policy as 'base'");
  passk->add_option("-n", preq.n, "samples per question");
  passk->add_option("--ks", ks_text, "comma-separated k values")->required();
  passk->add_option("-o,--out", preq.out_path, "curve CSV output");

  auto* bankgen = app.add_subcommand("bankgen", "write a standard synthetic bank");
  std::string profile = "modal-correct-70", bank_out = "-";
  bool hide_labels = false;
  bankgen->add_option("--profile", profile, "modal-correct-70 | modal-correct-100 | modal-wrong-100");
  bankgen->add_flag("--hide-labels", hide_labels, "write correct_meaning as null");
  bankgen->add_option("-o,--out", bank_out, "output file");

  auto* correlate = app.add_subcommand("correlate", "entropy/accuracy rank correlation");
  std::string corr_path;
  std::optional<double> alpha;
  correlate->add_option("file", corr_path, "metrics CSV or reward record file")->required();
  correlate->add_option("--smooth", alpha, "EMA alpha applied to metrics before ranking");

  for (auto* sub : {reward, trainc, passk, bankgen, correlate}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  RunConfig cfg;
  try {
    std::map<std::string, std::string> flags;
    for (const auto& [key, opt] : flag_opts) {
      if (opt->count() > 0) flags[key] = flag_values[key];
    }
    cfg = resolve_config(config_file_from_env(), flags);
  } catch (const ConfigError& e) {
    std::cerr << "empo: " << e.what() << '\n';
    return kExitUsage;
  }

  if (*reward) {
    if (reward_in == "-") return cmd_reward(std::cin, std::cout, std::cerr, cfg);
    std::ifstream in(reward_in, std::ios::binary);
    if (!in) {
      std::cerr << "empo reward: cannot read '" << reward_in << "'\n";
      return kExitUsage;
    }
    return cmd_reward(in, std::cout, std::cerr, cfg);
  }
  if (*trainc) return cmd_train(bank_path, metrics_path, policy_path, cfg, std::cout, std::cerr);
  if (*passk) {
    std::stringstream ss(ks_text);
    std::string tok;
    try {
      while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) preq.ks.push_back(std::stoul(tok));
      }
    } catch (const std::exception&) {
      std::cerr << "empo passk: bad --ks '" << ks_text << "'\n";
      return kExitUsage;
    }
    preq.seed = cfg.train.rng_seed;
    if (include_base) preq.policies.emplace_back("base", "");
    for (const auto& entry : policy_specs) {
      const auto eq = entry.find('=');
      if (eq == std::string::npos) preq.policies.emplace_back(entry, entry);
      else preq.policies.emplace_back(entry.substr(0, eq), entry.substr(eq + 1));
    }
    return cmd_passk(preq, std::cout, std::cerr);
  }
  if (*bankgen) return cmd_bankgen(profile, cfg.train.rng_seed, hide_labels, bank_out, std::cout, std::cerr);
  return cmd_correlate(corr_path, alpha, std::cout, std::cerr);
}
