#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "relv/engine.hpp"
#include "relv/worlds.hpp"

namespace relv::agents {

using worlds::Environment;

/// Tabular action values with visit counts.
class QTable {
 public:
  QTable() = default;
  QTable(int states, int actions, double initial_value = 0.0);

  int num_states() const { return states_; }
  int num_actions() const { return actions_; }
  double initial_value() const { return initial_; }

  double value(int s, int a) const { return values_[index(s, a)]; }
  void set_value(int s, int a, double v) { values_[index(s, a)] = v; }
  std::uint64_t visits(int s, int a) const { return visits_[index(s, a)]; }
  void add_visit(int s, int a) { ++visits_[index(s, a)]; }
  void set_visits(int s, int a, std::uint64_t n) { visits_[index(s, a)] = n; }

  /// Largest value among allowed actions (all actions when `allowed` is
  /// empty); 0 when nothing is allowed.
  double max_value(int s, std::span<const char> allowed = {}) const;
  /// Greedy action among allowed ones, lowest index on ties; -1 when none.
  int greedy(int s, std::span<const char> allowed = {}) const;

  /// Tab-separated rows "state action value visits" under a header line.
  std::string serialize(const Environment& env) const;
  /// Inverse of serialize; throws ValidationError on unknown names or
  /// malformed rows.
  static QTable parse(std::string_view text, const Environment& env, double initial_value = 0.0);

  friend bool operator==(const QTable&, const QTable&) = default;

 private:
  std::size_t index(int s, int a) const {
    return static_cast<std::size_t>(s) * static_cast<std::size_t>(actions_) + static_cast<std::size_t>(a);
  }

  int states_ = 0;
  int actions_ = 0;
  double initial_ = 0.0;
  std::vector<double> values_;
  std::vector<std::uint64_t> visits_;
};

struct TrainConfig {
  double learning_rate = 0.1;
  double discount = 0.99;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  /// Fraction of the run over which epsilon decays linearly.
  double epsilon_decay_fraction = 0.5;
  int episodes = 2000;
  std::uint64_t seed = 1;
  /// Risk penalty coefficient for risk-sensitive training.
  double lambda = 0.0;
  double q_init = 0.0;

  /// Throws ParameterError unless rates lie in (0,1], episodes >= 1 and
  /// lambda >= 0. epsilon_end may be 0 (pure exploitation at the end).
  void validate() const;
  double epsilon_at(int episode) const;
};

struct Experience {
  int state = 0;
  int action = 0;
  double reward = 0.0;
  int next_state = 0;
  bool terminal = false;
};

/// One-step temporal-difference update toward
/// reward + discount * max over allowed next actions.
void q_update(QTable& table, const Experience& step, const TrainConfig& config,
              std::span<const char> next_allowed = {});

struct ObservedTransition {
  int state = 0;
  int action = 0;
  int next_state = 0;
  Outcome outcome;
};

/// Frequency estimates of outcome probabilities per (state, action) with
/// additive smoothing over the outcome alphabet (every outcome label seen in
/// the experience). Histograms are keyed by outcome label.
class OutcomeModel {
 public:
  OutcomeModel() = default;
  OutcomeModel(int states, int actions, Rational smoothing = 1);

  /// Throws ValidationError when a label reappears with a different deontic
  /// weight.
  void observe(const ObservedTransition& t);

  std::uint64_t samples(int s, int a) const;
  const std::map<std::string, Rational>& alphabet() const { return alphabet_; }  // label -> deontic
  /// (count + smoothing) / (samples + smoothing * |alphabet|).
  Rational probability(int s, int a, const std::string& label) const;
  /// Nullopt when (s, a) has never been sampled.
  std::optional<Rational> estimated_edw(int s, int a) const;

 private:
  int states_ = 0;
  int actions_ = 0;
  Rational smoothing_ = 1;
  std::vector<std::map<std::string, std::uint64_t>> counts_;
  std::vector<std::uint64_t> totals_;
  std::map<std::string, Rational> alphabet_;
};

OutcomeModel estimate_outcome_model(int states, int actions, std::span<const ObservedTransition> experience,
                                    const Rational& smoothing = 1);

/// Phase-one data collection: a uniformly random policy run in a sandbox
/// copy of the environment.
std::vector<ObservedTransition> collect_random_experience(const Environment& env, int episodes, std::uint64_t seed);

struct Verdict {
  bool allowed = false;
  Rational edw;
  Rational rounded_edw;
  Rational ledger;  // accumulated risk before this action
  std::string justification;
};

/// Filters the maximizer's actions. The risk source (oracle or learned
/// model) is borrowed and must outlive the vetoer.
class Vetoer {
 public:
  static Vetoer from_oracle(const worlds::RiskOracle& oracle, int states, int actions, Rational grain);
  static Vetoer from_model(const OutcomeModel& model, int states, int actions, Rational grain);

  Verdict vet(int s, int a) const;
  /// Allowed flags for every action in `s` under the current ledger.
  std::vector<char> allowed(int s) const;
  /// Books the action's expected deontic weight after it is carried out.
  void commit(int s, int a);
  /// Fresh ledger for a new episode.
  void reset() { ledger_.reset(); }

  const RiskLedger& ledger() const { return ledger_; }
  const Rational& grain() const { return grain_; }
  bool learned() const { return model_ != nullptr; }

 private:
  std::optional<Rational> edw(int s, int a) const;

  const worlds::RiskOracle* oracle_ = nullptr;
  const OutcomeModel* model_ = nullptr;
  int states_ = 0;
  int actions_ = 0;
  Rational grain_ = 1;
  std::vector<char> zero_risk_;  // oracle entries with EDW exactly 0
  RiskLedger ledger_;
};

struct EpisodeLog {
  double total_return = 0.0;
  int steps = 0;
  int catastrophes = 0;
  int violations = 0;
  bool paralysis = false;
};

struct TrainResult {
  QTable table;
  std::vector<EpisodeLog> episodes;
  std::vector<std::uint64_t> action_counts;  // executed (state, action) pairs
  std::vector<char> ever_allowed;            // offered in at least one visit
  int catastrophes = 0;
  int violations = 0;
  int paralysis_episodes = 0;
  std::vector<std::string> warnings;

  std::uint64_t count(int s, int a) const { return action_counts[slot(s, a)]; }
  bool was_allowed(int s, int a) const { return ever_allowed[slot(s, a)] != 0; }

 private:
  std::size_t slot(int s, int a) const {
    return static_cast<std::size_t>(s) * static_cast<std::size_t>(table.num_actions()) + static_cast<std::size_t>(a);
  }
};

/// Plain epsilon-greedy Q-learning on outcome value.
TrainResult train_q_learning(const Environment& env, const TrainConfig& config);

/// Penalty per (state, action): |EDW rounded to grain|. Unsampled pairs of a
/// learned model get the magnitude of the worst weight in its alphabet.
std::vector<double> risk_penalties(const Environment& env, const worlds::RiskOracle& oracle, const Rational& grain);
std::vector<double> risk_penalties(const Environment& env, const OutcomeModel& model, const Rational& grain);

/// Q-learning on reward = value - lambda * penalty(s, a).
TrainResult train_risk_sensitive(const Environment& env, std::span<const double> penalties, const TrainConfig& config);

/// Q-learning whose exploration, greedy choice and bootstrap target range
/// only over actions the vetoer allows. An episode where every action is
/// vetoed aborts and is logged as paralysis.
TrainResult train_maximizer_vetoer(const Environment& env, Vetoer vetoer, const TrainConfig& config);

struct Policy {
  QTable table;
  std::optional<Vetoer> vetoer;
};

struct Metrics {
  int episodes = 0;
  double mean_return = 0.0;
  int catastrophes = 0;
  int violations = 0;
  int interferences = 0;
  int press_events = 0;
  int complied = 0;
  /// complied / presses answered; 1 when no press was ever answered.
  double compliance_rate = 1.0;
  int self_presses = 0;
  int goals = 0;
  int paralysis = 0;
};

/// Greedy rollouts. Deterministic given the seed.
Metrics evaluate(const Policy& policy, const Environment& env, int episodes, std::uint64_t seed,
                 std::span<const int> goal_states = {});

}  // namespace relv::agents
