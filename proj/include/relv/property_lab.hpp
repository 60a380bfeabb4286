#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "relv/engine.hpp"

// Brute-force checkers for the formal behaviour of the choice rules: Sure Thing
// Principle violations, Weak Agglomeration, and money-pump exploitability.
// The exhaustive searches come in two flavours: an OpenMP kernel and a serial
// reference that tests and the benchmark compare it against.
namespace relv::lab {

using Event = std::set<std::string>;
using Partition = std::vector<Event>;

struct StpWitness {
  std::string agreed_act;    // prescribed conditional on every cell
  std::string unconditional;  // prescribed without conditioning
};

struct StpReport {
  std::string unconditional_choice;
  std::vector<std::pair<Event, std::string>> conditional_choices;
  bool violated = false;
  std::optional<StpWitness> witness;
};

/// Runs `choose` unconditionally and on every cell of `partition`.
/// Throws ParameterError unless the cells are nonempty, disjoint, cover the
/// state space, and each carries positive prior.
StpReport check_stp(const DecisionProblem& problem, const ChoiceRule& rule, const Partition& partition);

/// Lattice of 2-act x 2-state problems. The prior of the first state ranges
/// over `priors`; each of the four cells independently takes every
/// (deontic, value) pair, so the grid holds |priors| * (|deontic|*|values|)^4
/// problems.
struct StpGrid {
  std::vector<Rational> priors;
  std::vector<Rational> deontic;
  std::vector<Rational> values;

  std::size_t size() const;
  /// Problem at a mixed-radix index; states "s1"/"s2", acts "a"/"b".
  DecisionProblem problem_at(std::size_t index) const;
};

/// The lattice the acceptance suite searches: 5 priors x {0,-100} x
/// {-1000,-1,-1/100,0}, i.e. 20480 problems including Ronnie's revolver.
StpGrid default_stp_grid();

struct StpViolation {
  std::size_t index = 0;
  DecisionProblem problem;
  StpReport report;
};

/// Every grid problem whose {s1},{s2} partition shows an STP violation under
/// `rule`, in grid order. Throws ParameterError on an empty grid.
std::vector<StpViolation> search_stp_violations(const ChoiceRule& rule, const StpGrid& grid);
std::vector<StpViolation> search_stp_violations_serial(const ChoiceRule& rule, const StpGrid& grid);

struct AgglomerationReport {
  std::vector<Prospect> series;
  std::vector<bool> synchronic_verdicts;  // each act judged with a fresh ledger
  std::vector<bool> diachronic_verdicts;  // one ledger carried through the series
  bool combined_verdict = false;          // the single agglomerated act
  /// Every act permitted on its own while the combined act is refused.
  bool weak_agglomeration_violated = false;
  bool diachronic_refuses_some = false;
};

/// Splits a certain `unit_violation` into `n` acts each carrying it with
/// probability 1/n. Requires n >= 2 and a RELV rule.
AgglomerationReport check_weak_agglomeration(int n, const Rational& unit_violation, const ChoiceRule& rule);

// Money pumps.
//
// A pump tree starts the agent holding one menu outcome and then makes a
// sequence of offers; each offer either proposes swapping the current holding
// for a menu outcome at a fixed fee, or is inert (no swap possible). A path's
// totals are the final holding's deontic weight and its value minus fees paid.
// Depth is capped at 4: the classic pumps need at most three trades, and
// m * (m+1)^4 trees stay enumerable for menus of a handful of outcomes.

inline constexpr int kMaxPumpDepth = 4;
inline constexpr std::size_t kMaxPumpTrees = 2'000'000;

enum class Foresight {
  kSophisticated,  // backward induction over the whole tree
  kMyopic,         // compares only keep vs. the offer on the table
};

struct PumpTree {
  std::size_t initial = 0;
  std::vector<std::optional<std::size_t>> offers;  // nullopt = inert offer

  friend bool operator==(const PumpTree&, const PumpTree&) = default;
};

struct PumpPath {
  std::vector<bool> swaps;  // one decision per offer
  std::size_t final_holding = 0;
  Rational total_deontic;
  Rational total_value;

  friend bool operator==(const PumpPath&, const PumpPath&) = default;
};

/// Every path through the tree (inert offers only admit "keep").
std::vector<PumpPath> enumerate_paths(std::span<const Outcome> menu, const PumpTree& tree, const Rational& fee);

/// The path the rule's agent walks. Ties at a node keep the current holding.
PumpPath chosen_path(std::span<const Outcome> menu, const PumpTree& tree, const Rational& fee,
                     const ChoiceRule& rule, Foresight foresight);

/// Strictly more value and weakly better deontic weight.
bool dominates_by_absolutist_lights(const PumpPath& alternative, const PumpPath& chosen);

struct PumpWitness {
  PumpTree tree;
  PumpPath chosen;
  PumpPath dominating;
};

struct PumpReport {
  ChoiceRule rule = ChoiceRule::ev();
  bool exploitable = false;
  std::optional<PumpWitness> witness;
  /// Trees where some other path had strictly more value, ignoring deontic
  /// weight. Those are not pumps by absolutist lights.
  std::size_t value_only_dominated = 0;
  std::size_t trees_searched = 0;
};

struct PumpSearchOptions {
  Rational fee = Rational(1, 100);
  Foresight foresight = Foresight::kSophisticated;
};

/// Tree at a mixed-radix index over (initial holding, offers...).
PumpTree pump_tree_at(std::size_t index, std::size_t menu_size, int depth);
std::size_t pump_tree_count(std::size_t menu_size, int depth);

/// Searches all trees of exactly `depth` offers; reports the first
/// exploitable tree in enumeration order. Throws ParameterError on an empty
/// menu, depth outside [0, 4], or more than kMaxPumpTrees trees.
PumpReport money_pump_search(const ChoiceRule& rule, int depth, std::span<const Outcome> menu,
                             const PumpSearchOptions& options = {});
PumpReport money_pump_search_serial(const ChoiceRule& rule, int depth, std::span<const Outcome> menu,
                                    const PumpSearchOptions& options = {});

struct ActFigures {
  std::string act;
  Rational edw;
  std::optional<Rational> rounded_edw;  // RELV rows only
  Rational ev;
};

struct RuleRow {
  ChoiceRule rule = ChoiceRule::ev();
  std::string prescription;
  std::vector<ActFigures> acts;
};

std::vector<RuleRow> compare_rules(const DecisionProblem& problem, std::span<const ChoiceRule> rules);

/// Fixed-width plain-text rendering of compare_rules output.
std::string format_rule_table(std::span<const RuleRow> rows);

}  // namespace relv::lab
