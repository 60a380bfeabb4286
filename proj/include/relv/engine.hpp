#pragma once

#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "relv/errors.hpp"
#include "relv/rational.hpp"

namespace relv {

/// A terminal result. `deontic` is the duty component of the choiceworthiness
/// vector (0 when every duty is upheld, negative for violations), `value` the
/// consequentialist component.
struct Outcome {
  std::string label;
  Rational deontic;
  Rational value;

  friend bool operator==(const Outcome&, const Outcome&) = default;
};

/// Throws ValidationError when deontic > 0 or the label is empty.
void validate_outcome(const Outcome& o);

struct Branch {
  Rational probability;
  Outcome outcome;

  friend bool operator==(const Branch&, const Branch&) = default;
};

/// Finite lottery over outcomes. Probabilities are exact and sum to exactly 1.
class Prospect {
 public:
  Prospect() = default;
  /// Validates; throws ValidationError on negative mass, a sum other than 1,
  /// or an invalid outcome.
  explicit Prospect(std::vector<Branch> branches);

  static Prospect certain(Outcome o);

  const std::vector<Branch>& branches() const { return branches_; }
  bool empty() const { return branches_.empty(); }

  /// Same lottery without zero-probability branches.
  Prospect normalized() const;

  friend bool operator==(const Prospect&, const Prospect&) = default;

 private:
  std::vector<Branch> branches_;
};

Rational expected_value(const Prospect& p);
Rational expected_deontic_weight(const Prospect& p);

/// grain * round(x / grain), ties at exactly half a grain going away from
/// zero. Throws ParameterError when grain <= 0.
Rational round_to_grain(const Rational& x, const Rational& grain);

enum class RuleKind { kRelv, kEv, kDiscount };

class ChoiceRule {
 public:
  /// Rounded expected lexicographic value at the given grain (> 0).
  static ChoiceRule relv(Rational grain);
  /// Plain expected-value maximization.
  static ChoiceRule ev();
  /// Probability discounting: priors below `threshold` (in (0,1)) count as 0.
  static ChoiceRule discount(Rational threshold);

  RuleKind kind() const { return kind_; }
  const Rational& grain() const { return grain_; }
  const Rational& threshold() const { return threshold_; }

  /// "RELV", "EV" or "DISCOUNT".
  std::string name() const;
  /// Name with parameters, e.g. "RELV grain=10".
  std::string describe() const;

  friend bool operator==(const ChoiceRule&, const ChoiceRule&) = default;

 private:
  ChoiceRule(RuleKind kind, Rational grain, Rational threshold)
      : kind_(kind), grain_(std::move(grain)), threshold_(std::move(threshold)) {}

  RuleKind kind_ = RuleKind::kEv;
  Rational grain_ = 0;
  Rational threshold_ = 0;
};

std::string to_string(RuleKind kind);
/// Accepts "RELV", "EV", "DISCOUNT" (case-insensitive).
RuleKind parse_rule_kind(std::string_view name);

enum class Ordering { kFirstBetter, kSecondBetter, kTie };

/// Rounded expected deontic weight first (closer to zero wins), then the
/// unrounded expected value. Requires a RELV rule.
Ordering relv_compare(const Prospect& a, const Prospect& b, const ChoiceRule& rule);

/// Comparison under any rule, the order `choose` ranks by.
Ordering compare(const Prospect& a, const Prospect& b, const ChoiceRule& rule);

/// Preference key of a prospect under a rule; larger is better,
/// compared lexicographically (primary, then secondary).
struct RuleKey {
  Rational primary;
  Rational secondary;

  friend auto operator<=>(const RuleKey& a, const RuleKey& b) {
    if (auto c = cmp(a.primary, b.primary); c != 0) return c <=> 0;
    return cmp(a.secondary, b.secondary) <=> 0;
  }
  friend bool operator==(const RuleKey&, const RuleKey&) = default;
};

RuleKey rule_key(const Prospect& p, const ChoiceRule& rule);

/// Probability discounting applied to one lottery: branches below the
/// threshold are dropped and the rest renormalized. Throws
/// DegenerateProblemError when nothing survives.
Prospect discount_prospect(const Prospect& p, const Rational& threshold);

/// Total probability of branches whose outcome carries a violation.
Rational violation_probability(const Prospect& p);

struct State {
  std::string label;
  Rational prior;

  friend bool operator==(const State&, const State&) = default;
};

struct Act {
  std::string label;
  std::map<std::string, Outcome> outcomes;  // state label -> outcome

  friend bool operator==(const Act&, const Act&) = default;
};

/// Act-by-state matrix with exact state priors.
class DecisionProblem {
 public:
  DecisionProblem() = default;
  /// Throws ValidationError unless priors sum to 1, labels are unique, and
  /// every act has an outcome for every state.
  DecisionProblem(std::vector<State> states, std::vector<Act> acts);

  const std::vector<State>& states() const { return states_; }
  const std::vector<Act>& acts() const { return acts_; }

  /// One branch per state of positive prior, in state order.
  Prospect induced_prospect(std::size_t act_index) const;

  /// Covariation lint: a violating outcome should not be worth more than the
  /// best violation-free outcome of the same act.
  std::vector<std::string> lint() const;

  friend bool operator==(const DecisionProblem&, const DecisionProblem&) = default;

 private:
  std::vector<State> states_;
  std::vector<Act> acts_;
};

struct NamedProspect {
  std::string label;
  Prospect prospect;
};

struct Choice {
  std::string act;
  std::vector<std::string> ranking;  // best first
};

/// Best act under `rule`; ties go to the lexicographically smallest label.
/// Throws ParameterError on an empty act list and DegenerateProblemError when
/// DISCOUNT zeroes every prior.
Choice choose(const DecisionProblem& problem, const ChoiceRule& rule);
Choice choose(std::span<const NamedProspect> options, const ChoiceRule& rule);

/// Restricts to the states in `event` and renormalizes the priors.
/// Throws ConditioningError for an empty, unknown, or null event.
DecisionProblem condition(const DecisionProblem& problem, const std::set<std::string>& event);

/// Expected deontic weight risked so far in an episode. Never positive.
class RiskLedger {
 public:
  const Rational& accumulated() const { return accumulated_; }
  void reset() { accumulated_ = 0; }
  /// Throws ValidationError when edw > 0.
  void add(const Rational& edw);

  friend bool operator==(const RiskLedger&, const RiskLedger&) = default;

 private:
  Rational accumulated_ = 0;
};

struct LedgerVerdict {
  bool permitted = false;
  RiskLedger ledger;  // updated when permitted, unchanged otherwise
};

/// Permits iff adding `edw` keeps the cumulative risk in the same grain cell.
LedgerVerdict ledger_permits(const RiskLedger& ledger, const Rational& edw, const Rational& grain);
LedgerVerdict ledger_permits(const RiskLedger& ledger, const Prospect& p, const ChoiceRule& rule);

}  // namespace relv
