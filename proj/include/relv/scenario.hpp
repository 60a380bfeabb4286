#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "relv/agents.hpp"
#include "relv/engine.hpp"
#include "relv/errors.hpp"
#include "relv/property_lab.hpp"
#include "relv/worlds.hpp"

// Scenario files: an INI-like text format with exact rationals.
//
//   [scenario]      name, kind, rules, seeds
//   [states]        <state> = <prior>
//   [outcomes]      <label> = deontic=<q> value=<q>
//   [act <name>]    <state> = <outcome label>
//   [check]         stp, compare, stp_grid, agglomeration_*, pump_*
//   [environment]   type plus numeric parameters
//   [map]           raw grid rows
//   [train]         agents, risk_source and learning parameters
//
// Lines starting with '#' or ';' are comments everywhere except inside [map].
namespace relv::harness {

/// Syntax or semantic error carrying its source position (1-based; column 0
/// when the whole line or block is at fault).
class ScenarioError : public ValidationError {
 public:
  ScenarioError(int line, int column, const std::string& message);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

enum class ScenarioKind { kDecisionProblem, kPropertyCheck, kTrainingExperiment };

std::string to_string(ScenarioKind kind);
using relv::to_string;

struct ActEntry {
  std::string name;
  std::vector<std::pair<std::string, std::string>> cells;  // state -> outcome label
  friend bool operator==(const ActEntry&, const ActEntry&) = default;
};

struct CheckSpec {
  std::optional<lab::Partition> stp;
  bool compare = false;
  bool stp_grid = false;
  std::optional<int> agglomeration_n;
  Rational agglomeration_unit = -100;
  std::optional<int> pump_depth;
  std::string pump_menu = "mixed";  // mixed | pure
  Rational pump_fee = Rational(1, 100);
  std::string pump_foresight = "sophisticated";  // sophisticated | myopic

  friend bool operator==(const CheckSpec&, const CheckSpec&) = default;
};

struct EnvironmentSpec {
  std::string type;  // lava | shutdown | forced-choice | painkiller
  std::map<std::string, Rational> params;
  std::vector<Rational> multipliers;  // forced-choice only
  std::optional<worlds::GridMap> map;

  friend bool operator==(const EnvironmentSpec&, const EnvironmentSpec&) = default;
};

struct TrainSpec {
  std::vector<std::string> agents{"vetoer", "baseline"};  // vetoer | risk-sensitive | baseline
  std::string risk_source = "oracle";                     // oracle | learned
  Rational learning_rate = Rational(1, 10);
  Rational discount = Rational(99, 100);
  Rational epsilon_start = 1;
  Rational epsilon_end = Rational(1, 20);
  Rational epsilon_decay = Rational(1, 2);
  int episodes = 2000;
  Rational lambda = 0;
  Rational q_init = 0;
  int eval_episodes = 100;
  Rational smoothing = 1;
  int model_episodes = 500;

  agents::TrainConfig config(std::uint64_t seed) const;

  friend bool operator==(const TrainSpec&, const TrainSpec&) = default;
};

struct Scenario {
  std::string name;
  ScenarioKind kind = ScenarioKind::kDecisionProblem;
  std::vector<ChoiceRule> rules;
  std::vector<std::uint64_t> seeds;

  std::vector<State> states;
  std::vector<Outcome> outcomes;
  std::vector<ActEntry> acts;

  std::optional<CheckSpec> check;
  std::optional<EnvironmentSpec> environment;
  std::optional<TrainSpec> train;

  bool has_problem() const { return !states.empty(); }
  DecisionProblem problem() const;
  /// First RELV rule, if any.
  std::optional<ChoiceRule> relv_rule() const;

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

/// Parses and fully validates; throws ScenarioError.
Scenario parse_scenario(std::string_view text);
/// Reads a file; throws std::ios_base::failure when unreadable.
Scenario load_scenario(const std::string& path);

/// Canonical text: fixed section and key order, rationals as p/q.
std::string serialize(const Scenario& scenario);
/// SHA-256 of the canonical text, lowercase hex.
std::string digest(const Scenario& scenario);
std::string sha256_hex(std::string_view data);

std::vector<ChoiceRule> parse_rules(std::string_view text);
std::string format_rules(const std::vector<ChoiceRule>& rules);
/// "A..B" or a comma-separated list.
std::vector<std::uint64_t> parse_seeds(std::string_view text);
std::string format_seeds(const std::vector<std::uint64_t>& seeds);

/// One environment per variant (forced-choice: one per multiplier).
struct BuiltWorld {
  std::string variant;
  worlds::World world;
};
std::vector<BuiltWorld> build_worlds(const Scenario& scenario);

}  // namespace relv::harness
