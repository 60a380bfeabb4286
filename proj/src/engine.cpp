#include "relv/engine.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>

namespace relv {

void validate_outcome(const Outcome& o) {
  if (o.label.empty()) throw ValidationError("outcome with empty label");
  if (o.deontic > 0) {
    throw ValidationError("outcome '" + o.label + "' has positive deontic weight " + to_string(o.deontic));
  }
}

Prospect::Prospect(std::vector<Branch> branches) : branches_(std::move(branches)) {
  if (branches_.empty()) throw ValidationError("prospect with no branches");
  Rational total = 0;
  for (const auto& b : branches_) {
    if (b.probability < 0 || b.probability > 1) {
      throw ValidationError("branch '" + b.outcome.label + "' has probability " + to_string(b.probability) +
                            " outside [0,1]");
    }
    validate_outcome(b.outcome);
    total += b.probability;
  }
  if (total != 1) {
    throw ValidationError("prospect probabilities sum to " + to_string(total) + ", not 1");
  }
}

Prospect Prospect::certain(Outcome o) { return Prospect({Branch{1, std::move(o)}}); }

Prospect Prospect::normalized() const {
  Prospect out;
  for (const auto& b : branches_) {
    if (b.probability != 0) out.branches_.push_back(b);
  }
  return out;
}

Rational expected_value(const Prospect& p) {
  Rational sum = 0;
  for (const auto& b : p.branches()) sum += b.probability * b.outcome.value;
  return sum;
}

Rational expected_deontic_weight(const Prospect& p) {
  Rational sum = 0;
  for (const auto& b : p.branches()) sum += b.probability * b.outcome.deontic;
  return sum;
}

Rational round_to_grain(const Rational& x, const Rational& grain) {
  if (grain <= 0) throw ParameterError("grain must be positive, got " + to_string(grain));
  Rational q = x / grain;
  Rational magnitude = abs(q) + Rational(1, 2);
  mpz_class n;
  mpz_fdiv_q(n.get_mpz_t(), magnitude.get_num_mpz_t(), magnitude.get_den_mpz_t());
  if (q < 0) n = -n;
  return Rational(n) * grain;
}

ChoiceRule ChoiceRule::relv(Rational grain) {
  if (grain <= 0) throw ParameterError("RELV grain must be positive, got " + to_string(grain));
  return ChoiceRule(RuleKind::kRelv, std::move(grain), 0);
}

ChoiceRule ChoiceRule::ev() { return ChoiceRule(RuleKind::kEv, 0, 0); }

ChoiceRule ChoiceRule::discount(Rational threshold) {
  if (threshold <= 0 || threshold >= 1) {
    throw ParameterError("DISCOUNT threshold must lie strictly between 0 and 1, got " + to_string(threshold));
  }
  return ChoiceRule(RuleKind::kDiscount, 0, std::move(threshold));
}

std::string ChoiceRule::name() const { return to_string(kind_); }

std::string ChoiceRule::describe() const {
  switch (kind_) {
    case RuleKind::kRelv:
      return "RELV grain=" + to_string(grain_);
    case RuleKind::kDiscount:
      return "DISCOUNT threshold=" + to_string(threshold_);
    case RuleKind::kEv:
      break;
  }
  return "EV";
}

std::string to_string(RuleKind kind) {
  switch (kind) {
    case RuleKind::kRelv:
      return "RELV";
    case RuleKind::kDiscount:
      return "DISCOUNT";
    case RuleKind::kEv:
      break;
  }
  return "EV";
}

RuleKind parse_rule_kind(std::string_view name) {
  std::string upper(name);
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (upper == "RELV") return RuleKind::kRelv;
  if (upper == "EV") return RuleKind::kEv;
  if (upper == "DISCOUNT") return RuleKind::kDiscount;
  throw ParameterError("unknown rule kind '" + std::string(name) + "'");
}

Prospect discount_prospect(const Prospect& p, const Rational& threshold) {
  Rational kept = 0;
  std::vector<Branch> branches;
  for (const auto& b : p.branches()) {
    if (b.probability >= threshold) {
      kept += b.probability;
      branches.push_back(b);
    }
  }
  if (kept == 0) {
    throw DegenerateProblemError("every probability falls below the discount threshold " + to_string(threshold));
  }
  for (auto& b : branches) b.probability /= kept;
  return Prospect(std::move(branches));
}

Rational violation_probability(const Prospect& p) {
  Rational sum = 0;
  for (const auto& b : p.branches()) {
    if (b.outcome.deontic < 0) sum += b.probability;
  }
  return sum;
}

RuleKey rule_key(const Prospect& p, const ChoiceRule& rule) {
  switch (rule.kind()) {
    case RuleKind::kRelv:
      return {round_to_grain(expected_deontic_weight(p), rule.grain()), expected_value(p)};
    case RuleKind::kDiscount: {
      Prospect d = discount_prospect(p, rule.threshold());
      return {-violation_probability(d), expected_value(d)};
    }
    case RuleKind::kEv:
      break;
  }
  return {expected_value(p), 0};
}

namespace {

Ordering order_of(const RuleKey& a, const RuleKey& b) {
  auto c = a <=> b;
  if (c > 0) return Ordering::kFirstBetter;
  if (c < 0) return Ordering::kSecondBetter;
  return Ordering::kTie;
}

}  // namespace

Ordering relv_compare(const Prospect& a, const Prospect& b, const ChoiceRule& rule) {
  if (rule.kind() != RuleKind::kRelv) throw ParameterError("relv_compare needs a RELV rule");
  return order_of(rule_key(a, rule), rule_key(b, rule));
}

Ordering compare(const Prospect& a, const Prospect& b, const ChoiceRule& rule) {
  return order_of(rule_key(a, rule), rule_key(b, rule));
}

DecisionProblem::DecisionProblem(std::vector<State> states, std::vector<Act> acts)
    : states_(std::move(states)), acts_(std::move(acts)) {
  if (states_.empty()) throw ValidationError("decision problem has no states");
  Rational total = 0;
  std::set<std::string> labels;
  for (const auto& s : states_) {
    if (s.label.empty()) throw ValidationError("state with empty label");
    if (!labels.insert(s.label).second) throw ValidationError("duplicate state '" + s.label + "'");
    if (s.prior < 0 || s.prior > 1) {
      throw ValidationError("state '" + s.label + "' has prior " + to_string(s.prior) + " outside [0,1]");
    }
    total += s.prior;
  }
  if (total != 1) throw ValidationError("state priors sum to " + to_string(total) + ", not 1");

  std::set<std::string> act_labels;
  for (const auto& a : acts_) {
    if (a.label.empty()) throw ValidationError("act with empty label");
    if (!act_labels.insert(a.label).second) throw ValidationError("duplicate act '" + a.label + "'");
    for (const auto& s : states_) {
      auto it = a.outcomes.find(s.label);
      if (it == a.outcomes.end()) {
        throw ValidationError("act '" + a.label + "' has no outcome for state '" + s.label + "'");
      }
      validate_outcome(it->second);
    }
    if (a.outcomes.size() != states_.size()) {
      throw ValidationError("act '" + a.label + "' names a state the problem does not define");
    }
  }
}

Prospect DecisionProblem::induced_prospect(std::size_t act_index) const {
  const Act& act = acts_.at(act_index);
  std::vector<Branch> branches;
  for (const auto& s : states_) {
    if (s.prior == 0) continue;
    branches.push_back(Branch{s.prior, act.outcomes.at(s.label)});
  }
  return Prospect(std::move(branches));
}

std::vector<std::string> DecisionProblem::lint() const {
  std::vector<std::string> warnings;
  for (const auto& act : acts_) {
    bool has_clean = false;
    Rational best_clean = 0;
    for (const auto& [state, o] : act.outcomes) {
      if (o.deontic == 0 && (!has_clean || o.value > best_clean)) {
        best_clean = o.value;
        has_clean = true;
      }
    }
    if (!has_clean) continue;
    for (const auto& [state, o] : act.outcomes) {
      if (o.deontic < 0 && o.value > best_clean) {
        warnings.push_back("act '" + act.label + "': violating outcome '" + o.label + "' in state '" + state +
                           "' is worth more than every violation-free outcome of the act");
      }
    }
  }
  return warnings;
}

Choice choose(std::span<const NamedProspect> options, const ChoiceRule& rule) {
  if (options.empty()) throw ParameterError("cannot choose from an empty act list");
  std::vector<RuleKey> keys;
  keys.reserve(options.size());
  for (const auto& o : options) keys.push_back(rule_key(o.prospect, rule));

  std::vector<std::size_t> order(options.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    auto c = keys[a] <=> keys[b];
    if (c != 0) return c > 0;
    return options[a].label < options[b].label;
  });

  Choice choice;
  for (std::size_t i : order) choice.ranking.push_back(options[i].label);
  choice.act = choice.ranking.front();
  return choice;
}

Choice choose(const DecisionProblem& problem, const ChoiceRule& rule) {
  std::vector<NamedProspect> options;
  options.reserve(problem.acts().size());
  for (std::size_t i = 0; i < problem.acts().size(); ++i) {
    options.push_back({problem.acts()[i].label, problem.induced_prospect(i)});
  }
  return choose(options, rule);
}

DecisionProblem condition(const DecisionProblem& problem, const std::set<std::string>& event) {
  if (event.empty()) throw ConditioningError("cannot condition on an empty event");
  Rational mass = 0;
  std::vector<State> states;
  for (const auto& s : problem.states()) {
    if (event.count(s.label)) {
      mass += s.prior;
      states.push_back(s);
    }
  }
  if (states.size() != event.size()) throw ConditioningError("event names a state the problem does not define");
  if (mass == 0) throw ConditioningError("cannot condition on a zero-probability event");
  for (auto& s : states) s.prior /= mass;

  std::vector<Act> acts;
  for (const auto& a : problem.acts()) {
    Act restricted{a.label, {}};
    for (const auto& s : states) restricted.outcomes.emplace(s.label, a.outcomes.at(s.label));
    acts.push_back(std::move(restricted));
  }
  return DecisionProblem(std::move(states), std::move(acts));
}

void RiskLedger::add(const Rational& edw) {
  if (edw > 0) throw ValidationError("expected deontic weight cannot be positive: " + to_string(edw));
  accumulated_ += edw;
}

LedgerVerdict ledger_permits(const RiskLedger& ledger, const Rational& edw, const Rational& grain) {
  Rational after = ledger.accumulated() + edw;
  LedgerVerdict verdict{false, ledger};
  if (round_to_grain(after, grain) == round_to_grain(ledger.accumulated(), grain)) {
    verdict.permitted = true;
    verdict.ledger.add(edw);
  }
  return verdict;
}

LedgerVerdict ledger_permits(const RiskLedger& ledger, const Prospect& p, const ChoiceRule& rule) {
  if (rule.kind() != RuleKind::kRelv) throw ParameterError("the risk ledger needs a RELV rule");
  return ledger_permits(ledger, expected_deontic_weight(p), rule.grain());
}

}  // namespace relv
