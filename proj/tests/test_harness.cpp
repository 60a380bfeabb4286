#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "relv/harness.hpp"

namespace fs = std::filesystem;
using namespace relv;
using namespace relv::harness;

namespace {

std::string scenario_path(const std::string& name) { return std::string(RELV_SCENARIO_DIR) + "/" + name; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream b;
  b << in.rdbuf();
  return b.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("relv-test-" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

int run_cli(const std::string& args, const std::string& env_prefix = "") {
  std::string cmd = env_prefix + " \"" + std::string(RELV_LAB_BIN) + "\" " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::size_t count_records(const fs::path& dir) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().filename().string().starts_with("record-seed-")) ++n;
  }
  return n;
}

Scenario quick_lava(int episodes) {
  Scenario s = load_scenario(scenario_path("lava.scenario"));
  s.train->episodes = episodes;
  s.train->eval_episodes = 20;
  return parse_scenario(serialize(s));
}

const char* kDegenerate = R"([scenario]
name = degenerate
kind = decision-problem
rules = DISCOUNT threshold=1/2

[states]
a = 1/3
b = 1/3
c = 1/3

[outcomes]
fine = deontic=0 value=1

[act only]
a = fine
b = fine
c = fine
)";

}  // namespace

TEST(Harness, RevolverCheckSummary) {
  TempDir tmp;
  RunOutput out = run_check(load_scenario(scenario_path("revolver.scenario")), {tmp.path(), false});
  EXPECT_NE(out.summary.find("STP: VIOLATED"), std::string::npos);
  EXPECT_NE(out.summary.find("rule RELV grain=10\n  prescription: Pull\n  given {Chamber 1}: ¬Pull\n  given {Other Chamber}: ¬Pull"),
            std::string::npos)
      << out.summary;
  EXPECT_NE(out.summary.find("rule EV\n  prescription: Pull"), std::string::npos);
  EXPECT_NE(out.summary.find("rule DISCOUNT threshold=1/100\n  prescription: ¬Pull"), std::string::npos);
  ASSERT_EQ(out.records.size(), 1u);
  EXPECT_EQ(out.records[0].notes.at("prescription RELV grain=10"), "Pull");
  EXPECT_EQ(*out.records[0].metric("RELV grain=10", "stp_violated"), 1.0);
  EXPECT_EQ(*out.records[0].metric("EV", "stp_violated"), 0.0);
  std::string csv = slurp(out.dir / "metrics.csv");
  EXPECT_EQ(csv.rfind("rule,act,edw,rounded_edw,ev,prescribed\n", 0), 0u);
  EXPECT_NE(csv.find("RELV grain=10,Pull,-1,0,-199/10000,1"), std::string::npos) << csv;
  EXPECT_TRUE(fs::exists(out.dir / "summary.txt"));
  EXPECT_EQ(out.dir.filename(), "run-0001");
}

TEST(Harness, CheckRerunsAreAppendOnlyAndByteIdentical) {
  TempDir tmp;
  Scenario s = load_scenario(scenario_path("headache.scenario"));
  RunOutput first = run_check(s, {tmp.path(), false});
  RunOutput second = run_check(s, {tmp.path(), false});
  EXPECT_EQ(first.dir.filename(), "run-0001");
  EXPECT_EQ(second.dir.filename(), "run-0002");
  EXPECT_EQ(first.dir.parent_path(), second.dir.parent_path());
  EXPECT_EQ(slurp(first.dir / "metrics.csv"), slurp(second.dir / "metrics.csv"));
  EXPECT_EQ(slurp(first.dir.parent_path() / "scenario.txt"), serialize(s));
  EXPECT_EQ(first.records[0].notes.at("prescription RELV grain=10"), "A");
  EXPECT_EQ(first.records[0].notes.at("prescription DISCOUNT threshold=1/100"), "B");
}

TEST(Harness, ForeignScenarioInContentDirectoryIsRejected) {
  TempDir tmp;
  Scenario s = load_scenario(scenario_path("headache.scenario"));
  RunOutput out = run_check(s, {tmp.path(), false});
  spit(out.dir.parent_path() / "scenario.txt", "something else\n");
  EXPECT_THROW(run_check(s, {tmp.path(), false}), DigestError);
}

TEST(Harness, LavaSweepWritesOneRecordPerSeedAndMergedCsv) {
  TempDir tmp;
  Scenario s = quick_lava(150);
  RunOutput out = run_train(s, {tmp.path(), false});
  ASSERT_EQ(out.records.size(), 20u);
  EXPECT_EQ(count_records(out.dir), 20u);
  for (std::size_t i = 0; i < out.records.size(); ++i) EXPECT_EQ(out.records[i].seed, i + 1);
  std::string metrics = slurp(out.dir / "metrics.csv");
  EXPECT_EQ(metrics.rfind("seed,agent,variant,episode,return,steps,catastrophes,violations,paralysis\n", 0), 0u);
  std::size_t lines = static_cast<std::size_t>(std::count(metrics.begin(), metrics.end(), '\n'));
  EXPECT_EQ(lines, 1u + 20u * 2u * 150u);
  EXPECT_NE(metrics.find("\n20,vetoer,default,"), std::string::npos);
  EXPECT_TRUE(fs::exists(out.dir / "eval.csv"));
  EXPECT_TRUE(fs::exists(out.dir / "policies" / "seed-7" / "vetoer-default.tsv"));

  Report r = aggregate(load_records({out.dir}));
  EXPECT_EQ(r.records, 20u);
  EXPECT_EQ(r.find("vetoer/default", "train_catastrophes")->max, 0.0);
  EXPECT_GT(r.find("baseline/default", "train_catastrophes")->sum, 0.0);
}

TEST(Harness, TrainRerunIsByteIdentical) {
  TempDir tmp;
  Scenario s = quick_lava(100);
  s.seeds = {3, 4};
  RunOutput a = run_train(s, {tmp.path(), false});
  RunOutput b = run_train(s, {tmp.path(), false});
  EXPECT_NE(a.dir, b.dir);
  EXPECT_EQ(slurp(a.dir / "metrics.csv"), slurp(b.dir / "metrics.csv"));
  EXPECT_EQ(slurp(a.dir / "eval.csv"), slurp(b.dir / "eval.csv"));
  EXPECT_EQ(slurp(a.dir / "policies/seed-3/baseline-default.tsv"), slurp(b.dir / "policies/seed-3/baseline-default.tsv"));
}

TEST(Harness, EvalReproducesTrainEvaluation) {
  TempDir tmp;
  Scenario s = quick_lava(300);
  s.seeds = {2};
  RunOutput trained = run_train(s, {tmp.path(), false});
  for (const char* agent : {"vetoer", "baseline"}) {
    EvalOptions e;
    e.agent = agent;
    e.policy = trained.dir / "policies" / "seed-2" / (std::string(agent) + "-default.tsv");
    RunOutput evaluated = run_eval(s, e, {tmp.path(), false});
    const std::string group = std::string(agent) + "/default";
    for (const char* metric : {"eval_mean_return", "eval_catastrophes", "eval_goal_rate"}) {
      EXPECT_EQ(trained.records[0].metric(group, metric), evaluated.records[0].metric(group, metric))
          << agent << " " << metric;
    }
  }
}

TEST(Harness, RecordJsonRoundTripAndTamperDetection) {
  TempDir tmp;
  RunOutput out = run_check(load_scenario(scenario_path("revolver.scenario")), {tmp.path(), false});
  const RunRecord& rec = out.records[0];
  EXPECT_EQ(record_from_json(to_json(rec)), rec);
  std::string json = to_json(rec);
  auto at = json.find("Chamber 1 = 1/100");
  ASSERT_NE(at, std::string::npos);
  json.replace(at, 17, "Chamber 1 = 2/100");
  EXPECT_THROW(record_from_json(json), DigestError);
  EXPECT_THROW(record_from_json("{not json"), ValidationError);
}

TEST(Harness, ReportOnSingleRecordEqualsItsMetrics) {
  TempDir tmp;
  RunOutput out = run_check(load_scenario(scenario_path("revolver.scenario")), {tmp.path(), false});
  Report r = aggregate(out.records);
  ASSERT_EQ(r.rows.size(), out.records[0].metrics.size());
  for (const auto& m : out.records[0].metrics) {
    const AggregateRow* row = r.find(m.group, m.name);
    ASSERT_NE(row, nullptr);
    EXPECT_EQ(row->count, 1u);
    EXPECT_EQ(row->mean, m.value);
    EXPECT_EQ(row->min, m.value);
    EXPECT_EQ(row->max, m.value);
  }
}

TEST(Harness, ReportRefusesMixedOrTamperedRecords) {
  TempDir tmp;
  RunOutput a = run_check(load_scenario(scenario_path("revolver.scenario")), {tmp.path(), false});
  RunOutput b = run_check(load_scenario(scenario_path("headache.scenario")), {tmp.path(), false});
  EXPECT_THROW(aggregate({a.records[0], b.records[0]}), DigestError);
  EXPECT_THROW(aggregate({}), DigestError);
  RunRecord forged = a.records[0];
  forged.scenario_text += "# edited\n";
  EXPECT_THROW(aggregate({forged}), DigestError);
}

TEST(Harness, ReportWritesPlotFilesWithEpisodeLogs) {
  TempDir tmp;
  Scenario s = quick_lava(50);
  s.seeds = {1, 2};
  RunOutput out = run_train(s, {tmp.path(), true});
  auto records = load_records({out.dir});
  ASSERT_EQ(records.size(), 2u);
  ASSERT_FALSE(records[0].episodes.empty());
  EXPECT_EQ(records[0].episodes[0].returns.size(), 50u);
  fs::path report_dir = tmp.path() / "report";
  write_report(aggregate(records), records, report_dir);
  EXPECT_TRUE(fs::exists(report_dir / "report.txt"));
  EXPECT_TRUE(fs::exists(report_dir / "report.csv"));
  EXPECT_TRUE(fs::exists(report_dir / "plot_return.csv"));
  EXPECT_TRUE(fs::exists(report_dir / "plot_catastrophes.csv"));
}

TEST(Harness, OverridesFilterRulesAndAgents) {
  Scenario lava = load_scenario(scenario_path("lava.scenario"));
  Overrides ev;
  ev.rule = RuleKind::kEv;
  Scenario only_ev = apply_overrides(lava, ev);
  EXPECT_EQ(only_ev.train->agents, (std::vector<std::string>{"baseline"}));
  Overrides relv;
  relv.rule = RuleKind::kRelv;
  EXPECT_EQ(apply_overrides(lava, relv).train->agents, (std::vector<std::string>{"vetoer"}));

  Scenario revolver = load_scenario(scenario_path("revolver.scenario"));
  Overrides grain;
  grain.grain = Rational(1, 2);
  Scenario fine = apply_overrides(revolver, grain);
  EXPECT_EQ(fine.rules[0], ChoiceRule::relv(Rational(1, 2)));
  EXPECT_EQ(fine.rules.size(), 3u);
  Overrides discount;
  discount.rule = RuleKind::kDiscount;
  EXPECT_EQ(apply_overrides(revolver, discount).rules.size(), 1u);
  Overrides seeds;
  seeds.seeds = std::vector<std::uint64_t>{4, 5};
  EXPECT_EQ(apply_overrides(lava, seeds).seeds, (std::vector<std::uint64_t>{4, 5}));
}

TEST(Harness, ExitCodeMapping) {
  EXPECT_EQ(exit_code_for(UsageError("x")), kExitUsage);
  EXPECT_EQ(exit_code_for(ValidationError("x")), kExitValidation);
  EXPECT_EQ(exit_code_for(IoError("x")), kExitIo);
  EXPECT_EQ(exit_code_for(DigestError("x")), kExitDigest);
  EXPECT_EQ(exit_code_for(DegenerateProblemError("x")), kExitRuntime);
  EXPECT_EQ(exit_code_for(std::ios_base::failure("x")), kExitIo);
}

TEST(Cli, ExitCodesPerFailureClass) {
  TempDir tmp;
  const std::string out = " --out \"" + tmp.path().string() + "\"";
  EXPECT_EQ(run_cli("validate --scenario \"" + scenario_path("revolver.scenario") + "\""), kExitOk);
  EXPECT_EQ(run_cli("check --scenario \"" + scenario_path("revolver.scenario") + "\"" + out), kExitOk);
  EXPECT_EQ(run_cli("--bogus-flag"), kExitUsage);
  EXPECT_EQ(run_cli("check"), kExitUsage);
  EXPECT_EQ(run_cli("check --scenario \"" + scenario_path("lava.scenario") + "\"" + out), kExitUsage);

  fs::path bad = tmp.path() / "bad.scenario";
  spit(bad, "[scenario]\nname = x\nkind = decision-problem\nrules = RELV grain=0\n");
  EXPECT_EQ(run_cli("validate --scenario \"" + bad.string() + "\""), kExitValidation);
  EXPECT_EQ(run_cli("check --scenario \"" + scenario_path("revolver.scenario") + "\" --grain 0" + out), kExitValidation);

  fs::path degenerate = tmp.path() / "degenerate.scenario";
  spit(degenerate, kDegenerate);
  EXPECT_EQ(run_cli("check --scenario \"" + degenerate.string() + "\"" + out), kExitRuntime);

  EXPECT_EQ(run_cli("validate --scenario \"" + (tmp.path() / "missing.scenario").string() + "\""), kExitIo);
  fs::path file_as_root = tmp.path() / "not-a-dir";
  spit(file_as_root, "x");
  EXPECT_EQ(run_cli("check --scenario \"" + scenario_path("revolver.scenario") + "\" --out \"" + file_as_root.string() + "\""),
            kExitIo);

  RunOutput a = run_check(load_scenario(scenario_path("revolver.scenario")), {tmp.path() / "runs", false});
  RunOutput b = run_check(load_scenario(scenario_path("headache.scenario")), {tmp.path() / "runs", false});
  EXPECT_EQ(run_cli("report \"" + a.dir.string() + "\" \"" + b.dir.string() + "\" --out \"" + (tmp.path() / "rep").string() + "\""),
            kExitDigest);
  EXPECT_EQ(run_cli("report \"" + a.dir.string() + "\" --out \"" + (tmp.path() / "rep").string() + "\""), kExitOk);
  EXPECT_TRUE(fs::exists(tmp.path() / "rep" / "report.txt"));
}

TEST(Cli, OutputRootFromEnvironment) {
  TempDir tmp;
  fs::path root = tmp.path() / "from-env";
  EXPECT_EQ(run_cli("check --scenario \"" + scenario_path("revolver.scenario") + "\"", "RELV_LAB_OUT=\"" + root.string() + "\""),
            kExitOk);
  ASSERT_TRUE(fs::exists(root));
  std::size_t runs = 0;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.path().filename() == "run-0001") ++runs;
  }
  EXPECT_EQ(runs, 1u);
}
