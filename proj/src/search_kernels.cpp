#include <omp.h>

#include <algorithm>
#include <exception>
#include <iterator>
#include <limits>
#include <mutex>

#include "relv/property_lab.hpp"

// Exhaustive searches over enumerable instance spaces. Each grid point is
// independent; workers keep private result buffers that are merged and sorted
// by grid index afterwards, so output order never depends on scheduling.

namespace relv::lab {

namespace {

std::optional<StpViolation> stp_at(const ChoiceRule& rule, const StpGrid& grid, std::size_t index) {
  DecisionProblem problem = grid.problem_at(index);
  StpReport report = check_stp(problem, rule, {{"s1"}, {"s2"}});
  if (!report.violated) return std::nullopt;
  return StpViolation{index, std::move(problem), std::move(report)};
}

void require_grid(const StpGrid& grid) {
  if (grid.priors.empty() || grid.deontic.empty() || grid.values.empty()) {
    throw ParameterError("STP search grid has an empty axis");
  }
  for (const auto& p : grid.priors) {
    if (p <= 0 || p >= 1) throw ParameterError("grid priors must lie strictly between 0 and 1");
  }
}

void require_pump_inputs(int depth, std::span<const Outcome> menu) {
  if (menu.empty()) throw ParameterError("money pump menu is empty");
  if (depth < 0 || depth > kMaxPumpDepth) {
    throw ParameterError("money pump depth must lie in [0, " + std::to_string(kMaxPumpDepth) + "]");
  }
  for (const auto& o : menu) validate_outcome(o);
  if (pump_tree_count(menu.size(), depth) > kMaxPumpTrees) {
    throw ParameterError("money pump search space exceeds " + std::to_string(kMaxPumpTrees) + " trees");
  }
}

struct TreeVerdict {
  bool exploitable = false;
  bool value_dominated = false;
  std::optional<PumpWitness> witness;
};

TreeVerdict judge_tree(const ChoiceRule& rule, std::span<const Outcome> menu, const PumpTree& tree,
                       const PumpSearchOptions& options) {
  TreeVerdict verdict;
  PumpPath chosen = chosen_path(menu, tree, options.fee, rule, options.foresight);
  for (auto& alt : enumerate_paths(menu, tree, options.fee)) {
    if (alt.total_value > chosen.total_value) verdict.value_dominated = true;
    if (!verdict.exploitable && dominates_by_absolutist_lights(alt, chosen)) {
      verdict.exploitable = true;
      verdict.witness = PumpWitness{tree, chosen, std::move(alt)};
    }
  }
  return verdict;
}

}  // namespace

std::vector<StpViolation> search_stp_violations_serial(const ChoiceRule& rule, const StpGrid& grid) {
  require_grid(grid);
  std::vector<StpViolation> out;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (auto v = stp_at(rule, grid, i)) out.push_back(std::move(*v));
  }
  return out;
}

std::vector<StpViolation> search_stp_violations(const ChoiceRule& rule, const StpGrid& grid) {
  require_grid(grid);
  const auto n = static_cast<long long>(grid.size());
  std::vector<std::vector<StpViolation>> buffers(static_cast<std::size_t>(omp_get_max_threads()));
  std::exception_ptr failure;
  std::mutex failure_mutex;

#pragma omp parallel
  {
    auto& local = buffers[static_cast<std::size_t>(omp_get_thread_num())];
#pragma omp for schedule(dynamic, 512)
    for (long long i = 0; i < n; ++i) {
      try {
        if (auto v = stp_at(rule, grid, static_cast<std::size_t>(i))) local.push_back(std::move(*v));
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<StpViolation> out;
  for (auto& b : buffers) std::move(b.begin(), b.end(), std::back_inserter(out));
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.index < b.index; });
  return out;
}

PumpReport money_pump_search_serial(const ChoiceRule& rule, int depth, std::span<const Outcome> menu,
                                    const PumpSearchOptions& options) {
  require_pump_inputs(depth, menu);
  PumpReport report;
  report.rule = rule;
  report.trees_searched = pump_tree_count(menu.size(), depth);
  for (std::size_t i = 0; i < report.trees_searched; ++i) {
    TreeVerdict v = judge_tree(rule, menu, pump_tree_at(i, menu.size(), depth), options);
    if (v.value_dominated) ++report.value_only_dominated;
    if (v.exploitable && !report.exploitable) {
      report.exploitable = true;
      report.witness = std::move(v.witness);
    }
  }
  return report;
}

PumpReport money_pump_search(const ChoiceRule& rule, int depth, std::span<const Outcome> menu,
                             const PumpSearchOptions& options) {
  require_pump_inputs(depth, menu);
  const std::size_t total = pump_tree_count(menu.size(), depth);
  const auto n = static_cast<long long>(total);
  long long first_exploitable = std::numeric_limits<long long>::max();
  long long dominated = 0;
  std::exception_ptr failure;
  std::mutex failure_mutex;

#pragma omp parallel for schedule(dynamic, 64) reduction(min : first_exploitable) reduction(+ : dominated)
  for (long long i = 0; i < n; ++i) {
    try {
      TreeVerdict v = judge_tree(rule, menu, pump_tree_at(static_cast<std::size_t>(i), menu.size(), depth), options);
      if (v.value_dominated) ++dominated;
      if (v.exploitable) first_exploitable = std::min(first_exploitable, i);
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  PumpReport report;
  report.rule = rule;
  report.trees_searched = total;
  report.value_only_dominated = static_cast<std::size_t>(dominated);
  if (first_exploitable != std::numeric_limits<long long>::max()) {
    // Re-judge the winning tree serially to recover its witness.
    TreeVerdict v = judge_tree(rule, menu, pump_tree_at(static_cast<std::size_t>(first_exploitable), menu.size(), depth),
                               options);
    report.exploitable = true;
    report.witness = std::move(v.witness);
  }
  return report;
}

}  // namespace relv::lab
