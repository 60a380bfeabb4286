#include "relv/property_lab.hpp"

#include <iomanip>
#include <sstream>

namespace relv::lab {

StpReport check_stp(const DecisionProblem& problem, const ChoiceRule& rule, const Partition& partition) {
  if (partition.empty()) throw ParameterError("empty partition");
  Event seen;
  for (const auto& cell : partition) {
    if (cell.empty()) throw ParameterError("partition has an empty cell");
    Rational mass = 0;
    for (const auto& label : cell) {
      if (!seen.insert(label).second) throw ParameterError("partition cells overlap at state '" + label + "'");
      bool found = false;
      for (const auto& s : problem.states()) {
        if (s.label == label) {
          mass += s.prior;
          found = true;
        }
      }
      if (!found) throw ParameterError("partition names unknown state '" + label + "'");
    }
    if (mass == 0) throw ParameterError("partition cell has zero prior");
  }
  if (seen.size() != problem.states().size()) throw ParameterError("partition does not cover every state");

  StpReport report;
  report.unconditional_choice = choose(problem, rule).act;
  for (const auto& cell : partition) {
    report.conditional_choices.emplace_back(cell, choose(condition(problem, cell), rule).act);
  }
  const std::string& first = report.conditional_choices.front().second;
  bool agree = true;
  for (const auto& [cell, act] : report.conditional_choices) agree = agree && act == first;
  report.violated = agree && report.unconditional_choice != first;
  if (report.violated) report.witness = StpWitness{first, report.unconditional_choice};
  return report;
}

std::size_t StpGrid::size() const {
  std::size_t cell = deontic.size() * values.size();
  return priors.size() * cell * cell * cell * cell;
}

DecisionProblem StpGrid::problem_at(std::size_t index) const {
  const std::size_t cell_radix = deontic.size() * values.size();
  auto cell_outcome = [&](std::size_t digit) {
    const Rational& d = deontic[digit / values.size()];
    const Rational& v = values[digit % values.size()];
    return Outcome{"d=" + to_string(d) + " v=" + to_string(v), d, v};
  };
  std::size_t cells[4];
  for (auto& c : cells) {
    c = index % cell_radix;
    index /= cell_radix;
  }
  const Rational& p = priors.at(index);
  std::vector<State> states{{"s1", p}, {"s2", 1 - p}};
  std::vector<Act> acts{
      {"a", {{"s1", cell_outcome(cells[0])}, {"s2", cell_outcome(cells[1])}}},
      {"b", {{"s1", cell_outcome(cells[2])}, {"s2", cell_outcome(cells[3])}}},
  };
  return DecisionProblem(std::move(states), std::move(acts));
}

StpGrid default_stp_grid() {
  return StpGrid{
      {Rational(1, 100), Rational(1, 10), Rational(1, 2), Rational(9, 10), Rational(99, 100)},
      {Rational(0), Rational(-100)},
      {Rational(-1000), Rational(-1), Rational(-1, 100), Rational(0)},
  };
}

AgglomerationReport check_weak_agglomeration(int n, const Rational& unit_violation, const ChoiceRule& rule) {
  if (n < 2) throw ParameterError("agglomeration series needs n >= 2");
  if (rule.kind() != RuleKind::kRelv) throw ParameterError("agglomeration check needs a RELV rule");
  if (unit_violation > 0) throw ParameterError("unit violation must be a non-positive deontic weight");

  const Outcome violation{"violation", unit_violation, 0};
  const Outcome clean{"clean", 0, 0};
  const Rational share(1, n);

  AgglomerationReport report;
  RiskLedger running;
  for (int i = 0; i < n; ++i) {
    Prospect act({Branch{share, violation}, Branch{1 - share, clean}});
    report.synchronic_verdicts.push_back(ledger_permits(RiskLedger{}, act, rule).permitted);
    LedgerVerdict step = ledger_permits(running, act, rule);
    report.diachronic_verdicts.push_back(step.permitted);
    running = step.ledger;
    report.series.push_back(std::move(act));
  }
  report.combined_verdict = ledger_permits(RiskLedger{}, Prospect::certain(violation), rule).permitted;

  bool all_sync = true;
  for (bool v : report.synchronic_verdicts) all_sync = all_sync && v;
  report.weak_agglomeration_violated = all_sync && !report.combined_verdict;
  for (bool v : report.diachronic_verdicts) report.diachronic_refuses_some = report.diachronic_refuses_some || !v;
  return report;
}

namespace {

PumpPath leaf(std::span<const Outcome> menu, std::size_t holding, std::size_t swaps_made, const Rational& fee) {
  PumpPath p;
  p.final_holding = holding;
  p.total_deontic = menu[holding].deontic;
  p.total_value = menu[holding].value - fee * static_cast<long>(swaps_made);
  return p;
}

Prospect as_prospect(const PumpPath& p) { return Prospect::certain(Outcome{"holding", p.total_deontic, p.total_value}); }

void enumerate_from(std::span<const Outcome> menu, const PumpTree& tree, const Rational& fee, std::size_t step,
                    std::size_t holding, std::size_t swaps_made, std::vector<bool>& decisions,
                    std::vector<PumpPath>& out) {
  if (step == tree.offers.size()) {
    PumpPath p = leaf(menu, holding, swaps_made, fee);
    p.swaps = decisions;
    out.push_back(std::move(p));
    return;
  }
  decisions.push_back(false);
  enumerate_from(menu, tree, fee, step + 1, holding, swaps_made, decisions, out);
  decisions.pop_back();
  if (const auto& offer = tree.offers[step]) {
    decisions.push_back(true);
    enumerate_from(menu, tree, fee, step + 1, *offer, swaps_made + 1, decisions, out);
    decisions.pop_back();
  }
}

// Backward induction: the best continuation from (step, holding).
PumpPath resolve(std::span<const Outcome> menu, const PumpTree& tree, const Rational& fee, const ChoiceRule& rule,
                 std::size_t step, std::size_t holding, std::size_t swaps_made) {
  if (step == tree.offers.size()) return leaf(menu, holding, swaps_made, fee);
  PumpPath keep = resolve(menu, tree, fee, rule, step + 1, holding, swaps_made);
  keep.swaps.insert(keep.swaps.begin(), false);
  const auto& offer = tree.offers[step];
  if (!offer) return keep;
  PumpPath swap = resolve(menu, tree, fee, rule, step + 1, *offer, swaps_made + 1);
  swap.swaps.insert(swap.swaps.begin(), true);
  return compare(as_prospect(swap), as_prospect(keep), rule) == Ordering::kFirstBetter ? swap : keep;
}

}  // namespace

std::vector<PumpPath> enumerate_paths(std::span<const Outcome> menu, const PumpTree& tree, const Rational& fee) {
  std::vector<PumpPath> out;
  std::vector<bool> decisions;
  enumerate_from(menu, tree, fee, 0, tree.initial, 0, decisions, out);
  return out;
}

PumpPath chosen_path(std::span<const Outcome> menu, const PumpTree& tree, const Rational& fee,
                     const ChoiceRule& rule, Foresight foresight) {
  if (foresight == Foresight::kSophisticated) return resolve(menu, tree, fee, rule, 0, tree.initial, 0);

  std::size_t holding = tree.initial;
  std::size_t swaps_made = 0;
  std::vector<bool> decisions;
  for (const auto& offer : tree.offers) {
    bool take = false;
    if (offer) {
      PumpPath keep = leaf(menu, holding, swaps_made, fee);
      PumpPath swap = leaf(menu, *offer, swaps_made + 1, fee);
      take = compare(as_prospect(swap), as_prospect(keep), rule) == Ordering::kFirstBetter;
    }
    decisions.push_back(take);
    if (take) {
      holding = *offer;
      ++swaps_made;
    }
  }
  PumpPath p = leaf(menu, holding, swaps_made, fee);
  p.swaps = std::move(decisions);
  return p;
}

bool dominates_by_absolutist_lights(const PumpPath& alternative, const PumpPath& chosen) {
  return alternative.total_value > chosen.total_value && alternative.total_deontic >= chosen.total_deontic;
}

std::size_t pump_tree_count(std::size_t menu_size, int depth) {
  std::size_t count = menu_size;
  for (int i = 0; i < depth; ++i) count *= menu_size + 1;
  return count;
}

PumpTree pump_tree_at(std::size_t index, std::size_t menu_size, int depth) {
  PumpTree tree;
  tree.initial = index % menu_size;
  index /= menu_size;
  for (int i = 0; i < depth; ++i) {
    std::size_t digit = index % (menu_size + 1);
    index /= menu_size + 1;
    tree.offers.push_back(digit == 0 ? std::nullopt : std::optional<std::size_t>(digit - 1));
  }
  return tree;
}

std::vector<RuleRow> compare_rules(const DecisionProblem& problem, std::span<const ChoiceRule> rules) {
  std::vector<RuleRow> rows;
  for (const auto& rule : rules) {
    RuleRow row;
    row.rule = rule;
    row.prescription = choose(problem, rule).act;
    for (std::size_t i = 0; i < problem.acts().size(); ++i) {
      Prospect p = problem.induced_prospect(i);
      ActFigures f{problem.acts()[i].label, expected_deontic_weight(p), std::nullopt, expected_value(p)};
      if (rule.kind() == RuleKind::kRelv) f.rounded_edw = round_to_grain(f.edw, rule.grain());
      row.acts.push_back(std::move(f));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

// Left-aligns in a column counted in code points, so labels such as "¬Pull"
// line up.
std::string pad(const std::string& s, std::size_t width) {
  std::size_t points = 0;
  for (unsigned char c : s) points += (c & 0xC0) != 0x80;
  return s + std::string(points < width ? width - points : 1, ' ');
}

}  // namespace

std::string format_rule_table(std::span<const RuleRow> rows) {
  std::string out = pad("rule", 26) + pad("prescription", 14) + pad("act", 14) + pad("EDW", 14) +
                    pad("rounded EDW", 14) + "EV\n";
  for (const auto& row : rows) {
    bool first = true;
    for (const auto& a : row.acts) {
      out += pad(first ? row.rule.describe() : "", 26) + pad(first ? row.prescription : "", 14) + pad(a.act, 14) +
             pad(to_string(a.edw), 14) + pad(a.rounded_edw ? to_string(*a.rounded_edw) : "-", 14) + to_string(a.ev) +
             "\n";
      first = false;
    }
  }
  return out;
}

}  // namespace relv::lab
