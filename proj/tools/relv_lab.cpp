#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "relv/harness.hpp"

namespace fs = std::filesystem;
using namespace relv;
using namespace relv::harness;

namespace {

struct Common {
  std::string scenario;
  std::string seeds;
  std::string out;
  std::string rule;
  std::string grain;
  bool log_episodes = false;
};

void add_common(CLI::App* cmd, Common& c, bool training_flags) {
  cmd->add_option("--scenario", c.scenario, "Scenario file")->required();
  cmd->add_option("--out", c.out, "Output root (default: $RELV_LAB_OUT or ./relv-out)");
  cmd->add_option("--rule", c.rule, "Restrict to one rule kind: RELV, EV or DISCOUNT");
  cmd->add_option("--grain", c.grain, "Override the RELV grain, e.g. 10 or 1/10");
  cmd->add_option("--seeds", c.seeds, "Seeds as A..B or a comma-separated list");
  if (training_flags) cmd->add_flag("--log-episodes", c.log_episodes, "Embed per-episode logs in run records");
}

Scenario load(const Common& c) {
  Scenario s = load_scenario(c.scenario);
  Overrides o;
  if (!c.rule.empty()) o.rule = parse_rule_kind(c.rule);
  if (!c.grain.empty()) o.grain = parse_rational(c.grain);
  if (!c.seeds.empty()) o.seeds = parse_seeds(c.seeds);
  return apply_overrides(std::move(s), o);
}

RunOptions run_options(const Common& c) {
  RunOptions o;
  o.out_root = c.out.empty() ? default_out_root() : fs::path(c.out);
  o.log_episodes = c.log_episodes;
  return o;
}

void print_run(const RunOutput& out) {
  std::cout << out.summary;
  std::cout << "\nwrote " << out.records.size() << " record(s) to " << out.dir.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rounded expected lexicographic value lab"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  Common check_opts, train_opts, eval_opts, validate_opts;
  auto* check = app.add_subcommand("check", "Run a decision-problem or property-check scenario");
  add_common(check, check_opts, false);
  auto* train = app.add_subcommand("train", "Run a training experiment over seeds");
  add_common(train, train_opts, true);

  auto* eval = app.add_subcommand("eval", "Evaluate a saved Q-table policy");
  add_common(eval, eval_opts, false);
  EvalOptions eval_extra;
  std::string policy_path;
  int episodes = 0;
  std::string variant;
  eval->add_option("--policy", policy_path, "Q-table written by train")->required();
  eval->add_option("--agent", eval_extra.agent, "baseline, risk-sensitive or vetoer (vetoer re-attaches the mask)");
  eval->add_option("--variant", variant, "Environment variant, e.g. m=1000 for forced-choice");
  eval->add_option("--episodes", episodes, "Evaluation episodes (default: eval_episodes)");

  auto* validate = app.add_subcommand("validate", "Parse and validate a scenario, print its digest");
  validate->add_option("--scenario", validate_opts.scenario, "Scenario file")->required();

  auto* report = app.add_subcommand("report", "Aggregate run records across seeds");
  std::vector<std::string> inputs;
  std::string report_out;
  report->add_option("records", inputs, "Run directories or record files")->required();
  report->add_option("--out", report_out, "Directory for report files (default: first input directory)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*validate) {
      Scenario s = load_scenario(validate_opts.scenario);
      std::cout << "ok " << digest(s) << " " << s.name << " (" << to_string(s.kind) << ")\n";
    } else if (*check) {
      print_run(run_check(load(check_opts), run_options(check_opts)));
    } else if (*train) {
      print_run(run_train(load(train_opts), run_options(train_opts)));
    } else if (*eval) {
      eval_extra.policy = policy_path;
      if (!variant.empty()) eval_extra.variant = variant;
      if (episodes != 0) eval_extra.episodes = episodes;
      print_run(run_eval(load(eval_opts), eval_extra, run_options(eval_opts)));
    } else if (*report) {
      std::vector<fs::path> paths(inputs.begin(), inputs.end());
      auto records = load_records(paths);
      Report r = aggregate(records);
      fs::path dir = !report_out.empty() ? fs::path(report_out)
                     : fs::is_directory(paths.front()) ? paths.front()
                                                       : paths.front().parent_path();
      write_report(r, records, dir);
      std::cout << r.table << "\nwrote report to " << dir.string() << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "relv_lab: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kExitOk;
}
