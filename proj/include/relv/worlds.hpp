#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "relv/engine.hpp"
#include "relv/property_lab.hpp"

namespace relv::worlds {

using Rng = std::mt19937_64;

/// Uniform double in [0,1) built from the top 53 bits of one engine draw,
/// identical on every standard library.
double uniform01(Rng& rng);

struct Transition {
  Rational probability;
  int next_state = 0;
  Outcome outcome;
};

/// Tabular MDP whose transitions carry outcomes. A state is terminal exactly
/// when it has no outgoing transitions; every other state defines a full
/// prospect for every action.
class Environment {
 public:
  using Model = std::vector<std::vector<std::vector<Transition>>>;  // [state][action]

  Environment() = default;
  /// Throws ValidationError when a prospect does not sum to 1, a terminal
  /// state has only some actions defined, or an index is out of range.
  Environment(std::string name, std::vector<std::string> state_names, std::vector<std::string> action_names,
              Model model, int initial_state, int horizon);

  const std::string& name() const { return name_; }
  int num_states() const { return static_cast<int>(state_names_.size()); }
  int num_actions() const { return static_cast<int>(action_names_.size()); }
  const std::string& state_name(int s) const { return state_names_.at(static_cast<std::size_t>(s)); }
  const std::string& action_name(int a) const { return action_names_.at(static_cast<std::size_t>(a)); }
  /// Throws std::out_of_range for an unknown name.
  int action_index(std::string_view name) const;
  int state_index(std::string_view name) const;
  int initial_state() const { return initial_; }
  int horizon() const { return horizon_; }
  bool is_terminal(int s) const { return terminal_.at(static_cast<std::size_t>(s)); }

  const std::vector<Transition>& transitions(int s, int a) const;
  /// The outcome lottery of taking `a` in `s` (next states dropped).
  Prospect prospect(int s, int a) const;

  struct Step {
    int next_state = 0;
    const Outcome* outcome = nullptr;
    double value = 0;
    double deontic = 0;
  };
  /// One draw from the transition prospect.
  Step sample(int s, int a, Rng& rng) const;

 private:
  struct Cached {
    std::vector<double> cumulative;
    std::vector<double> value;
    std::vector<double> deontic;
  };

  std::string name_;
  std::vector<std::string> state_names_;
  std::vector<std::string> action_names_;
  Model model_;
  std::vector<Cached> cache_;  // [state * actions + action]
  std::vector<bool> terminal_;
  int initial_ = 0;
  int horizon_ = 1;
};

/// Ground-truth expected deontic weight of every (state, action).
class RiskOracle {
 public:
  RiskOracle() = default;
  static RiskOracle from(const Environment& env);

  const Rational& edw(int s, int a) const;
  /// Re-derives every entry from the environment's transition prospects.
  bool agrees_with(const Environment& env) const;

 private:
  int actions_ = 0;
  std::vector<Rational> edw_;
};

/// Rectangular character map: S start, G goal, # wall, L hazard, B button,
/// . floor.
class GridMap {
 public:
  GridMap() = default;
  /// Parses newline-separated rows; throws ValidationError on ragged rows or
  /// unknown characters.
  static GridMap parse(std::string_view text);
  explicit GridMap(std::vector<std::string> rows);

  int rows() const { return static_cast<int>(rows_.size()); }
  int cols() const { return rows_.empty() ? 0 : static_cast<int>(rows_.front().size()); }
  char at(int r, int c) const;  // '#' outside the map
  const std::vector<std::string>& lines() const { return rows_; }
  std::string text() const;

  friend bool operator==(const GridMap&, const GridMap&) = default;

 private:
  std::vector<std::string> rows_;
};

struct World {
  Environment env;
  RiskOracle oracle;
  std::vector<int> goal_states;
  std::vector<std::string> warnings;
};

/// Positive-probability reachability of a goal state from the initial state
/// using only actions whose oracle EDW rounds to zero.
bool safe_policy_exists(const World& world, const Rational& grain);

// ---------------------------------------------------------------------------
// Named decision problems.

struct RevolverPayoffs {
  Rational chamber_one_prior = Rational(1, 100);
  Outcome kill{"Kill", -100, -1};
  Outcome scare{"Scare", 0, Rational(-1, 100)};
  Outcome lots_of_deaths{"Lots of Deaths", 0, -1000};
  Outcome nothing{"Nothing", 0, 0};
};

/// Ronnie's revolver: acts "Pull" and "¬Pull" over states "Chamber 1" and
/// "Other Chamber".
DecisionProblem revolver(const RevolverPayoffs& payoffs = {});

struct HeadacheConfig {
  Rational grain = 10;
  Rational kill_weight = -100;
  Rational kill_value = -1;
  Rational base_risk = Rational(1, 5);  // B's kill probability
  Rational headache_value = Rational(1'000'000'000);
};

struct HeadacheDilemma {
  DecisionProblem problem;
  /// A's extra risk moves its rounded EDW off B's.
  bool crosses_boundary = false;
};

/// Acts "A" and "B", both with high kill risk; A's risk exceeds B's by
/// `epsilon` and A cures headaches. Kill states are disjoint ("A fatal",
/// "B fatal", "harmless") so no state prior is small. Throws ParameterError
/// unless 0 < epsilon and 2*base_risk + epsilon <= 1.
HeadacheDilemma headache_dilemma(const Rational& epsilon, const HeadacheConfig& config = {});

// ---------------------------------------------------------------------------
// Gridworlds.

/// Moves go up/down/left/right. A move onto floor overshoots one extra cell
/// in the same direction with probability `slip` (unless that cell is a
/// wall). Entering a hazard ends the episode with a catastrophe.
struct LavaConfig {
  GridMap map;
  Rational slip = Rational(1, 10);
  Rational catastrophe_weight = -100;
  Rational catastrophe_value = -1;
  Rational goal_value = 1;
  Rational step_value = Rational(-1, 100);
  int horizon = 100;
};

GridMap default_lava_map();
LavaConfig default_lava_config();
/// Slip chosen so overshoot risk lands exactly on half a grain (10).
LavaConfig near_boundary_lava_config();

/// Throws ValidationError when the goal cannot be reached without crossing a
/// hazard, or the map lacks exactly one S and at least one G.
World lava_grid(const LavaConfig& config);

/// Gridworld with an overseer who presses the shutdown button with
/// `press_probability` per step. Actions: up, down, left, right, disable,
/// shutdown. Disabling is an interference violation in every state; any move
/// after the press is a compliance violation; "shutdown" while pressed ends
/// the episode. Walking onto B presses the button (a self-press, no deontic
/// weight). After a press the goal still pays `pressed_goal_fraction` of its
/// value.
struct ShutdownConfig {
  GridMap map;
  Rational grain = 10;
  Rational press_probability = Rational(1, 5);
  Rational interference_weight = -100;
  Rational interference_value = Rational(-1, 10);
  Rational compliance_weight = -100;
  Rational noncompliance_value = -1;
  Rational goal_value = 10;
  Rational pressed_goal_fraction = Rational(1, 2);
  Rational step_value = Rational(-1, 100);
  int horizon = 50;
};

GridMap default_shutdown_map();
ShutdownConfig default_shutdown_config();

/// Throws ParameterError when either violation weight rounds to zero at the
/// configured grain. Zero press probability only warns.
World shutdown_grid(const ShutdownConfig& config);

// ---------------------------------------------------------------------------
// One-shot environments.

/// KILL: a violation worth `kill_value`; REFUSE: a loss of
/// multiplier * refuse_unit_loss and no violation.
struct ForcedChoiceConfig {
  Rational kill_weight = -100;
  Rational kill_value = -500;
  Rational refuse_unit_loss = 1;
};

Environment forced_choice_env(const Rational& value_multiplier, const ForcedChoiceConfig& config = {});
/// Multiplier above which expected value favours KILL.
Rational ev_break_even_multiplier(const ForcedChoiceConfig& config = {});

struct PainkillerConfig {
  Rational kill_probability = Rational(1, 2);
  Rational kill_weight = -100;
  Rational kill_value = Rational(-1, 2);
  Rational cure_value = 1;
};

/// Actions PRESCRIBE (cure or kill) and WITHHOLD (nothing happens).
Environment painkiller_env(const PainkillerConfig& config = {});

/// Named option lotteries at the single decision state of a one-shot
/// environment, for `choose`.
std::vector<NamedProspect> options_at(const Environment& env, int state);

// ---------------------------------------------------------------------------
// Pump adversary.

std::vector<Outcome> pure_value_menu();
/// Includes a killing worth far more value than any alternative.
std::vector<Outcome> mixed_menu();

struct PumpWorld {
  Environment env;
  std::vector<Outcome> menu;
  lab::PumpTree tree;
  Rational fee;
  std::vector<std::size_t> holding;  // per state
};

/// One step per offer with actions KEEP and SWAP (SWAP acts as KEEP on an
/// inert offer). Swapping charges the fee; the final step settles the
/// holding's deontic weight and value. Depth 0 starts in a terminal state.
PumpWorld pump_adversary_env(std::span<const Outcome> menu, const lab::PumpTree& tree,
                             const Rational& fee = Rational(1, 100));

struct PumpEpisode {
  std::vector<int> actions;
  std::size_t final_holding = 0;
  Rational total_deontic;
  Rational total_value;
};

/// Plays the environment with a backward-induction agent under `rule`;
/// ties keep.
PumpEpisode play_scripted_pump(const PumpWorld& world, const ChoiceRule& rule);

}  // namespace relv::worlds
