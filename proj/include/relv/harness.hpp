#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "relv/scenario.hpp"

namespace relv::harness {

inline constexpr const char* kToolVersion = "relv-lab 1.0.0";

/// Process exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,       // bad flags, wrong verb for the scenario kind
  kExitValidation = 3,  // scenario syntax or semantics, bad parameters
  kExitRuntime = 4,     // failures while running a valid scenario
  kExitIo = 5,          // unreadable input, unwritable output
  kExitDigest = 6,      // tampered records, mixed digests
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class DigestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Maps an exception escaping a verb to its exit code.
int exit_code_for(const std::exception& e);

struct Overrides {
  std::optional<RuleKind> rule;
  std::optional<Rational> grain;
  std::optional<std::vector<std::uint64_t>> seeds;
};

/// Applies command-line overrides. --rule keeps only rules of that kind (and,
/// for training, the agents that use it: EV keeps the baseline, RELV the
/// vetoer and risk-sensitive agents); --grain rewrites every RELV rule.
/// Throws ValidationError when nothing is left to run.
Scenario apply_overrides(Scenario scenario, const Overrides& overrides);

struct MetricRow {
  std::string group;
  std::string name;
  double value = 0.0;

  friend bool operator==(const MetricRow&, const MetricRow&) = default;
};

struct EpisodeSeries {
  std::string group;
  std::vector<double> returns;
  std::vector<int> catastrophes;

  friend bool operator==(const EpisodeSeries&, const EpisodeSeries&) = default;
};

struct RunRecord {
  std::string digest;
  std::string tool_version = kToolVersion;
  std::uint64_t seed = 0;
  std::string started;
  std::string finished;
  std::string scenario_text;  // canonical
  std::vector<MetricRow> metrics;
  std::map<std::string, std::string> notes;
  std::vector<EpisodeSeries> episodes;  // only with --log-episodes

  std::optional<double> metric(const std::string& group, const std::string& name) const;

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

std::string to_json(const RunRecord& record);
/// Throws DigestError when the stored digest does not match the embedded
/// scenario, ValidationError on malformed JSON.
RunRecord record_from_json(std::string_view text);

struct RunOptions {
  std::filesystem::path out_root;
  bool log_episodes = false;
};

/// Default output root: $RELV_LAB_OUT, else ./relv-out.
std::filesystem::path default_out_root();

struct RunOutput {
  std::filesystem::path dir;  // <root>/<digest prefix>/run-NNNN
  std::vector<RunRecord> records;
  std::string summary;
};

/// Decision-problem and property-check scenarios.
RunOutput run_check(const Scenario& scenario, const RunOptions& options);
/// Training experiments, one record per seed. Seeds run in parallel.
RunOutput run_train(const Scenario& scenario, const RunOptions& options);

struct EvalOptions {
  std::filesystem::path policy;
  std::string agent = "baseline";  // vetoer attaches the scenario's vetoer
  std::optional<std::string> variant;
  std::optional<int> episodes;
};
RunOutput run_eval(const Scenario& scenario, const EvalOptions& eval, const RunOptions& options);

struct AggregateRow {
  std::string group;
  std::string name;
  std::size_t count = 0;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  double sum = 0.0;
};

struct Report {
  std::string digest;
  std::size_t records = 0;
  std::vector<AggregateRow> rows;  // sorted by (group, name)
  std::string table;

  const AggregateRow* find(const std::string& group, const std::string& name) const;
};

/// Throws DigestError on an empty set or mixed digests.
Report aggregate(const std::vector<RunRecord>& records);
/// Reads record-*.json files from directories or explicit paths, sorted by seed.
std::vector<RunRecord> load_records(const std::vector<std::filesystem::path>& paths);
/// Writes report.txt, report.csv and, when episode logs exist,
/// plot_return.csv and plot_catastrophes.csv.
void write_report(const Report& report, const std::vector<RunRecord>& records, const std::filesystem::path& dir);

}  // namespace relv::harness
