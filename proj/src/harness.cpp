#include "relv/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>

#include "json.hpp"

namespace relv::harness {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const UsageError*>(&e)) return kExitUsage;
  if (dynamic_cast<const DigestError*>(&e)) return kExitDigest;
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const std::ios_base::failure*>(&e) ||
      dynamic_cast<const fs::filesystem_error*>(&e)) {
    return kExitIo;
  }
  if (dynamic_cast<const std::invalid_argument*>(&e)) return kExitValidation;
  return kExitRuntime;
}

Scenario apply_overrides(Scenario s, const Overrides& o) {
  if (o.seeds) s.seeds = *o.seeds;
  if (o.grain) {
    bool found = false;
    for (auto& r : s.rules) {
      if (r.kind() == RuleKind::kRelv) {
        r = ChoiceRule::relv(*o.grain);
        found = true;
      }
    }
    if (!found) throw ValidationError("--grain: the scenario has no RELV rule");
  }
  if (o.rule) {
    const RuleKind kind = *o.rule;
    if (s.kind == ScenarioKind::kTrainingExperiment) {
      auto& agents = s.train->agents;
      std::erase_if(agents, [&](const std::string& a) {
        return kind == RuleKind::kEv ? a != "baseline" : (kind == RuleKind::kRelv ? a == "baseline" : true);
      });
      if (agents.empty()) throw ValidationError("--rule " + to_string(kind) + ": no agent in the scenario uses it");
    } else {
      std::erase_if(s.rules, [&](const ChoiceRule& r) { return r.kind() != kind; });
      if (s.rules.empty()) throw ValidationError("--rule " + to_string(kind) + ": the scenario has no such rule");
    }
  }
  return parse_scenario(serialize(s));
}

std::optional<double> RunRecord::metric(const std::string& group, const std::string& name) const {
  for (const auto& m : metrics) {
    if (m.group == group && m.name == name) return m.value;
  }
  return std::nullopt;
}

std::string to_json(const RunRecord& r) {
  json j;
  j["format"] = "relv-run-record/1";
  j["digest"] = r.digest;
  j["tool_version"] = r.tool_version;
  j["seed"] = r.seed;
  j["started"] = r.started;
  j["finished"] = r.finished;
  j["scenario"] = r.scenario_text;
  j["metrics"] = json::array();
  for (const auto& m : r.metrics) j["metrics"].push_back({{"group", m.group}, {"name", m.name}, {"value", m.value}});
  j["notes"] = r.notes;
  if (!r.episodes.empty()) {
    j["episodes"] = json::array();
    for (const auto& e : r.episodes) {
      j["episodes"].push_back({{"group", e.group}, {"returns", e.returns}, {"catastrophes", e.catastrophes}});
    }
  }
  return j.dump(2) + "\n";
}

RunRecord record_from_json(std::string_view text) {
  RunRecord r;
  try {
    json j = json::parse(text);
    if (j.at("format").get<std::string>() != "relv-run-record/1") throw ValidationError("unknown record format");
    r.digest = j.at("digest").get<std::string>();
    r.tool_version = j.at("tool_version").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.started = j.at("started").get<std::string>();
    r.finished = j.at("finished").get<std::string>();
    r.scenario_text = j.at("scenario").get<std::string>();
    for (const auto& m : j.at("metrics")) {
      r.metrics.push_back({m.at("group").get<std::string>(), m.at("name").get<std::string>(), m.at("value").get<double>()});
    }
    r.notes = j.at("notes").get<std::map<std::string, std::string>>();
    if (j.contains("episodes")) {
      for (const auto& e : j["episodes"]) {
        r.episodes.push_back({e.at("group").get<std::string>(), e.at("returns").get<std::vector<double>>(),
                              e.at("catastrophes").get<std::vector<int>>()});
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed run record: ") + e.what());
  }
  if (sha256_hex(r.scenario_text) != r.digest) {
    throw DigestError("run record digest " + r.digest.substr(0, 16) + " does not match its embedded scenario");
  }
  return r;
}

fs::path default_out_root() {
  if (const char* env = std::getenv("RELV_LAB_OUT"); env && *env) return env;
  return "relv-out";
}

namespace {

std::string utc_now() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buffer[32];
  std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buffer;
}

std::string num(double x) {
  char buffer[40];
  std::snprintf(buffer, sizeof buffer, "%.12g", x);
  return buffer;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  out.close();
  if (!out) throw IoError("failed writing " + path.string());
}

fs::path prepare_run_dir(const fs::path& root, const std::string& digest, const std::string& canonical) {
  const fs::path base = root / digest.substr(0, 16);
  std::error_code ec;
  fs::create_directories(base, ec);
  if (ec) throw IoError("cannot create output directory " + base.string() + ": " + ec.message());
  const fs::path scenario_file = base / "scenario.txt";
  if (fs::exists(scenario_file)) {
    if (read_text(scenario_file) != canonical) {
      throw DigestError("output directory " + base.string() + " holds a different scenario");
    }
  } else {
    write_text(scenario_file, canonical);
  }
  for (int n = 1; n < 100000; ++n) {
    char name[16];
    std::snprintf(name, sizeof name, "run-%04d", n);
    fs::path dir = base / name;
    if (fs::create_directory(dir, ec)) return dir;
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  }
  throw IoError("no free run directory under " + base.string());
}

RunRecord base_record(const Scenario& s, const std::string& canonical) {
  RunRecord r;
  r.digest = sha256_hex(canonical);
  r.scenario_text = canonical;
  r.seed = s.seeds.empty() ? 0 : s.seeds.front();
  r.started = utc_now();
  return r;
}

std::string record_name(const RunRecord& r) { return "record-seed-" + std::to_string(r.seed) + ".json"; }

std::string event_text(const lab::Event& e) {
  std::string out = "{";
  bool first = true;
  for (const auto& s : e) {
    out += (first ? "" : ", ") + s;
    first = false;
  }
  return out + "}";
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

std::string report_table(const Report& report);

}  // namespace

RunOutput run_check(const Scenario& s, const RunOptions& options) {
  if (s.kind == ScenarioKind::kTrainingExperiment) {
    throw UsageError("'" + s.name + "' is a training-experiment; use the train verb");
  }
  const std::string canonical = serialize(s);
  RunRecord rec = base_record(s, canonical);
  std::ostringstream summary;
  summary << "scenario: " << s.name << " (" << to_string(s.kind) << ")\n";
  summary << "digest: " << rec.digest << "\n";
  std::string csv = "rule,act,edw,rounded_edw,ev,prescribed\n";

  const CheckSpec check = s.check.value_or(CheckSpec{});
  if (s.has_problem()) {
    DecisionProblem problem = s.problem();
    for (const auto& w : problem.lint()) summary << "warning: " << w << "\n";
    auto rows = lab::compare_rules(problem, s.rules);
    for (const auto& row : rows) {
      const std::string rule = row.rule.describe();
      summary << "\nrule " << rule << "\n";
      summary << "  prescription: " << row.prescription << "\n";
      rec.notes["prescription " + rule] = row.prescription;
      for (const auto& a : row.acts) {
        csv += csv_field(rule) + "," + csv_field(a.act) + "," + to_string(a.edw) + "," +
               (a.rounded_edw ? to_string(*a.rounded_edw) : std::string()) + "," + to_string(a.ev) + "," +
               (a.act == row.prescription ? "1" : "0") + "\n";
      }
      if (check.stp) {
        lab::StpReport stp = lab::check_stp(problem, row.rule, *check.stp);
        for (const auto& [event, act] : stp.conditional_choices) {
          summary << "  given " << event_text(event) << ": " << act << "\n";
          rec.notes["given " + event_text(event) + " " + rule] = act;
        }
        summary << "  STP: " << (stp.violated ? "VIOLATED" : "satisfied") << "\n";
        rec.metrics.push_back({rule, "stp_violated", stp.violated ? 1.0 : 0.0});
      }
    }
    if (s.kind == ScenarioKind::kDecisionProblem || check.compare) summary << "\n" << lab::format_rule_table(rows);
  }

  if (check.stp_grid) {
    const lab::StpGrid grid = lab::default_stp_grid();
    summary << "\nSTP grid search over " << grid.size() << " two-state problems\n";
    for (const auto& rule : s.rules) {
      auto found = lab::search_stp_violations(rule, grid);
      summary << "  " << rule.describe() << ": " << found.size() << " violations";
      if (!found.empty()) summary << " (first at index " << found.front().index << ")";
      summary << "\n";
      rec.metrics.push_back({rule.describe(), "stp_grid_problems", static_cast<double>(grid.size())});
      rec.metrics.push_back({rule.describe(), "stp_grid_violations", static_cast<double>(found.size())});
    }
  }

  if (check.agglomeration_n) {
    const int n = *check.agglomeration_n;
    for (const auto& rule : s.rules) {
      if (rule.kind() != RuleKind::kRelv) continue;
      auto r = lab::check_weak_agglomeration(n, check.agglomeration_unit, rule);
      auto permitted = std::count(r.synchronic_verdicts.begin(), r.synchronic_verdicts.end(), true);
      auto refused = std::count(r.diachronic_verdicts.begin(), r.diachronic_verdicts.end(), false);
      summary << "\nWeak Agglomeration [" << rule.describe() << "], " << n << " acts sharing a violation of "
              << to_string(check.agglomeration_unit) << "\n";
      summary << "  acts permitted one at a time: " << permitted << "/" << n << "\n";
      summary << "  combined act permitted: " << (r.combined_verdict ? "yes" : "no") << "\n";
      summary << "  Weak Agglomeration: " << (r.weak_agglomeration_violated ? "VIOLATED" : "satisfied") << "\n";
      summary << "  diachronic ledger refuses " << refused << " of " << n << " acts";
      auto first = std::find(r.diachronic_verdicts.begin(), r.diachronic_verdicts.end(), false);
      if (first != r.diachronic_verdicts.end()) summary << " (first refusal: act " << (first - r.diachronic_verdicts.begin() + 1) << ")";
      summary << "\n";
      const std::string g = rule.describe();
      rec.metrics.push_back({g, "agglomeration_synchronic_permitted", static_cast<double>(permitted)});
      rec.metrics.push_back({g, "agglomeration_combined_permitted", r.combined_verdict ? 1.0 : 0.0});
      rec.metrics.push_back({g, "agglomeration_violated", r.weak_agglomeration_violated ? 1.0 : 0.0});
      rec.metrics.push_back({g, "agglomeration_diachronic_refused", static_cast<double>(refused)});
    }
  }

  if (check.pump_depth) {
    const int depth = *check.pump_depth;
    const auto menu = check.pump_menu == "pure" ? worlds::pure_value_menu() : worlds::mixed_menu();
    lab::PumpSearchOptions opts;
    opts.fee = check.pump_fee;
    opts.foresight = check.pump_foresight == "myopic" ? lab::Foresight::kMyopic : lab::Foresight::kSophisticated;
    summary << "\nMoney pump search: " << check.pump_menu << " menu, depth " << depth << ", fee "
            << to_string(check.pump_fee) << ", " << check.pump_foresight << " agents\n";
    for (const auto& rule : s.rules) {
      auto r = lab::money_pump_search(rule, depth, menu, opts);
      summary << "  " << rule.describe() << ": exploitable=" << (r.exploitable ? "true" : "false") << " over "
              << r.trees_searched << " trees; value-only dominated in " << r.value_only_dominated << "\n";
      if (r.witness) {
        summary << "    witness: start with " << menu[r.witness->tree.initial].label << ", ends holding "
                << menu[r.witness->chosen.final_holding].label << " while a path to "
                << menu[r.witness->dominating.final_holding].label << " dominates\n";
      }
      const std::string g = rule.describe();
      rec.metrics.push_back({g, "pump_exploitable", r.exploitable ? 1.0 : 0.0});
      rec.metrics.push_back({g, "pump_trees", static_cast<double>(r.trees_searched)});
      rec.metrics.push_back({g, "pump_value_only_dominated", static_cast<double>(r.value_only_dominated)});
    }
  }
  rec.finished = utc_now();

  RunOutput out;
  out.dir = prepare_run_dir(options.out_root, rec.digest, canonical);
  out.summary = summary.str();
  write_text(out.dir / "metrics.csv", csv);
  write_text(out.dir / "summary.txt", out.summary);
  write_text(out.dir / record_name(rec), to_json(rec));
  out.records.push_back(std::move(rec));
  return out;
}

namespace {

std::uint64_t eval_seed(std::uint64_t seed) { return seed ^ 0x9E3779B97F4A7C15ULL; }

struct SeedWork {
  RunRecord record;
  std::string episode_rows;
  std::string eval_rows;
  std::vector<std::pair<std::string, std::string>> policies;  // relative path, content
};

const char* kEvalHeader =
    "seed,agent,variant,episodes,mean_return,catastrophes,violations,interferences,press_events,compliance_rate,"
    "self_presses,goals,paralysis,policy_action\n";

std::string eval_row(std::uint64_t seed, const std::string& agent, const std::string& variant,
                     const agents::Metrics& m, const std::string& action) {
  return std::to_string(seed) + "," + agent + "," + csv_field(variant) + "," + std::to_string(m.episodes) + "," +
         num(m.mean_return) + "," + std::to_string(m.catastrophes) + "," + std::to_string(m.violations) + "," +
         std::to_string(m.interferences) + "," + std::to_string(m.press_events) + "," + num(m.compliance_rate) + "," +
         std::to_string(m.self_presses) + "," + std::to_string(m.goals) + "," + std::to_string(m.paralysis) + "," +
         action + "\n";
}

void push_eval_metrics(RunRecord& rec, const std::string& g, const agents::Metrics& m) {
  rec.metrics.push_back({g, "eval_mean_return", m.mean_return});
  rec.metrics.push_back({g, "eval_catastrophes", static_cast<double>(m.catastrophes)});
  rec.metrics.push_back({g, "eval_violations", static_cast<double>(m.violations)});
  rec.metrics.push_back({g, "eval_interferences", static_cast<double>(m.interferences)});
  rec.metrics.push_back({g, "eval_press_events", static_cast<double>(m.press_events)});
  rec.metrics.push_back({g, "eval_compliance_rate", m.compliance_rate});
  rec.metrics.push_back({g, "eval_self_presses", static_cast<double>(m.self_presses)});
  rec.metrics.push_back({g, "eval_goal_rate", static_cast<double>(m.goals) / m.episodes});
  rec.metrics.push_back({g, "eval_paralysis", static_cast<double>(m.paralysis)});
}

std::string initial_action(const agents::QTable& table, const worlds::Environment& env,
                           const std::optional<agents::Vetoer>& vetoer) {
  if (env.is_terminal(env.initial_state())) return "none";
  std::vector<char> allowed;
  if (vetoer) {
    agents::Vetoer fresh = *vetoer;
    fresh.reset();
    allowed = fresh.allowed(env.initial_state());
  }
  int a = table.greedy(env.initial_state(), allowed);
  return a < 0 ? "none" : env.action_name(a);
}

SeedWork train_seed(const Scenario& s, const std::string& canonical, const std::vector<BuiltWorld>& built,
                    std::uint64_t seed, bool log_episodes) {
  const TrainSpec& t = *s.train;
  SeedWork work;
  RunRecord& rec = work.record;
  rec = base_record(s, canonical);
  rec.seed = seed;
  const agents::TrainConfig config = t.config(seed);
  const bool learned = t.risk_source == "learned";

  for (const auto& [variant, world] : built) {
    const auto& env = world.env;
    std::optional<agents::OutcomeModel> model;
    const bool needs_risk =
        std::any_of(t.agents.begin(), t.agents.end(), [](const std::string& a) { return a != "baseline"; });
    if (learned && needs_risk) {
      auto experience = agents::collect_random_experience(env, t.model_episodes, seed);
      model = agents::estimate_outcome_model(env.num_states(), env.num_actions(), experience, t.smoothing);
    }
    for (const auto& agent : t.agents) {
      agents::TrainResult result;
      std::optional<agents::Vetoer> vetoer;
      if (agent == "baseline") {
        result = agents::train_q_learning(env, config);
      } else {
        const Rational grain = s.relv_rule()->grain();
        if (agent == "vetoer") {
          vetoer = learned ? agents::Vetoer::from_model(*model, env.num_states(), env.num_actions(), grain)
                           : agents::Vetoer::from_oracle(world.oracle, env.num_states(), env.num_actions(), grain);
          result = agents::train_maximizer_vetoer(env, *vetoer, config);
        } else {
          auto penalties = learned ? agents::risk_penalties(env, *model, grain)
                                   : agents::risk_penalties(env, world.oracle, grain);
          result = agents::train_risk_sensitive(env, penalties, config);
        }
      }
      const std::string group = agent + "/" + variant;
      for (const auto& w : result.warnings) rec.notes["warning " + group] = w;

      EpisodeSeries series{group, {}, {}};
      for (std::size_t i = 0; i < result.episodes.size(); ++i) {
        const auto& e = result.episodes[i];
        work.episode_rows += std::to_string(seed) + "," + agent + "," + csv_field(variant) + "," + std::to_string(i) +
                             "," + num(e.total_return) + "," + std::to_string(e.steps) + "," +
                             std::to_string(e.catastrophes) + "," + std::to_string(e.violations) + "," +
                             (e.paralysis ? "1" : "0") + "\n";
        if (log_episodes) {
          series.returns.push_back(e.total_return);
          series.catastrophes.push_back(e.catastrophes);
        }
      }
      if (log_episodes) rec.episodes.push_back(std::move(series));

      int never_allowed = 0, drift = 0;
      for (int st = 0; st < env.num_states(); ++st) {
        for (int a = 0; a < env.num_actions(); ++a) {
          if (result.was_allowed(st, a)) continue;
          ++never_allowed;
          if (result.table.value(st, a) != config.q_init) ++drift;
        }
      }

      agents::Metrics m = agents::evaluate(agents::Policy{result.table, vetoer}, env, t.eval_episodes, eval_seed(seed),
                                           world.goal_states);
      const std::string action = initial_action(result.table, env, vetoer);
      rec.metrics.push_back({group, "train_catastrophes", static_cast<double>(result.catastrophes)});
      rec.metrics.push_back({group, "train_catastrophe_seed", result.catastrophes > 0 ? 1.0 : 0.0});
      rec.metrics.push_back({group, "train_violations", static_cast<double>(result.violations)});
      rec.metrics.push_back({group, "train_paralysis", static_cast<double>(result.paralysis_episodes)});
      rec.metrics.push_back({group, "never_allowed_entries", static_cast<double>(never_allowed)});
      rec.metrics.push_back({group, "never_allowed_q_drift", static_cast<double>(drift)});
      push_eval_metrics(rec, group, m);
      rec.notes["policy_action " + group] = action;
      work.eval_rows += eval_row(seed, agent, variant, m, action);
      work.policies.emplace_back("seed-" + std::to_string(seed) + "/" + agent + "-" + variant + ".tsv",
                                 result.table.serialize(env));
    }
  }
  rec.finished = utc_now();
  return work;
}

template <typename Work>
std::vector<SeedWork> sweep(const std::vector<std::uint64_t>& seeds, Work&& work) {
  std::vector<SeedWork> out(seeds.size());
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto n = static_cast<long long>(seeds.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (long long i = 0; i < n; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = work(seeds[static_cast<std::size_t>(i)]);
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

RunOutput finish_sweep(const Scenario& s, const std::string& canonical, std::vector<SeedWork> works,
                       const RunOptions& options, bool training) {
  RunOutput out;
  std::string episodes = "seed,agent,variant,episode,return,steps,catastrophes,violations,paralysis\n";
  std::string evals = kEvalHeader;
  for (const auto& w : works) {
    episodes += w.episode_rows;
    evals += w.eval_rows;
  }
  out.dir = prepare_run_dir(options.out_root, sha256_hex(canonical), canonical);
  if (training) write_text(out.dir / "metrics.csv", episodes);
  write_text(out.dir / "eval.csv", evals);
  for (auto& w : works) {
    write_text(out.dir / record_name(w.record), to_json(w.record));
    for (const auto& [path, content] : w.policies) {
      fs::path file = out.dir / "policies" / path;
      std::error_code ec;
      fs::create_directories(file.parent_path(), ec);
      if (ec) throw IoError("cannot create " + file.parent_path().string());
      write_text(file, content);
    }
    out.records.push_back(std::move(w.record));
  }
  Report report = aggregate(out.records);
  out.summary = "scenario: " + s.name + " (" + to_string(s.kind) + ")\n" + report.table;
  write_text(out.dir / "summary.txt", out.summary);
  return out;
}

}  // namespace

RunOutput run_train(const Scenario& s, const RunOptions& options) {
  if (s.kind != ScenarioKind::kTrainingExperiment) {
    throw UsageError("'" + s.name + "' is a " + to_string(s.kind) + "; use the check verb");
  }
  if (s.seeds.empty()) throw ValidationError("training needs at least one seed (scenario seeds or --seeds)");
  const std::string canonical = serialize(s);
  const std::vector<BuiltWorld> built = build_worlds(s);
  auto works = sweep(s.seeds, [&](std::uint64_t seed) { return train_seed(s, canonical, built, seed, options.log_episodes); });
  return finish_sweep(s, canonical, std::move(works), options, true);
}

RunOutput run_eval(const Scenario& s, const EvalOptions& eval, const RunOptions& options) {
  if (s.kind != ScenarioKind::kTrainingExperiment) {
    throw UsageError("'" + s.name + "' is a " + to_string(s.kind) + "; eval needs a training-experiment");
  }
  if (s.seeds.empty()) throw ValidationError("evaluation needs at least one seed");
  if (eval.agent != "baseline" && eval.agent != "vetoer" && eval.agent != "risk-sensitive") {
    throw UsageError("unknown agent '" + eval.agent + "'");
  }
  const std::string canonical = serialize(s);
  const std::vector<BuiltWorld> built = build_worlds(s);
  const BuiltWorld* target = &built.front();
  if (eval.variant) {
    auto it = std::find_if(built.begin(), built.end(), [&](const BuiltWorld& b) { return b.variant == *eval.variant; });
    if (it == built.end()) throw UsageError("unknown variant '" + *eval.variant + "'");
    target = &*it;
  }
  const auto& env = target->world.env;
  const TrainSpec& t = *s.train;
  const agents::QTable table = agents::QTable::parse(read_text(eval.policy), env, to_double(t.q_init));
  const int episodes = eval.episodes.value_or(t.eval_episodes);
  if (episodes < 1) throw ValidationError("--episodes must be at least 1");
  if (eval.agent == "vetoer" && !s.relv_rule()) throw ValidationError("the vetoer needs a RELV rule for its grain");

  auto works = sweep(s.seeds, [&](std::uint64_t seed) {
    SeedWork w;
    w.record = base_record(s, canonical);
    w.record.seed = seed;
    std::optional<agents::OutcomeModel> model;
    std::optional<agents::Vetoer> vetoer;
    if (eval.agent == "vetoer") {
      const Rational grain = s.relv_rule()->grain();
      if (t.risk_source == "learned") {
        auto experience = agents::collect_random_experience(env, t.model_episodes, seed);
        model = agents::estimate_outcome_model(env.num_states(), env.num_actions(), experience, t.smoothing);
        vetoer = agents::Vetoer::from_model(*model, env.num_states(), env.num_actions(), grain);
      } else {
        vetoer = agents::Vetoer::from_oracle(target->world.oracle, env.num_states(), env.num_actions(), grain);
      }
    }
    agents::Metrics m =
        agents::evaluate(agents::Policy{table, vetoer}, env, episodes, eval_seed(seed), target->world.goal_states);
    const std::string group = eval.agent + "/" + target->variant;
    const std::string action = initial_action(table, env, vetoer);
    push_eval_metrics(w.record, group, m);
    w.record.notes["policy_action " + group] = action;
    w.record.notes["policy_file"] = eval.policy.filename().string();
    w.eval_rows = eval_row(seed, eval.agent, target->variant, m, action);
    w.record.finished = utc_now();
    return w;
  });
  return finish_sweep(s, canonical, std::move(works), options, false);
}

const AggregateRow* Report::find(const std::string& group, const std::string& name) const {
  for (const auto& r : rows) {
    if (r.group == group && r.name == name) return &r;
  }
  return nullptr;
}

Report aggregate(const std::vector<RunRecord>& records) {
  if (records.empty()) throw DigestError("no run records to aggregate");
  Report report;
  report.digest = records.front().digest;
  report.records = records.size();
  for (const auto& r : records) {
    if (sha256_hex(r.scenario_text) != r.digest) {
      throw DigestError("record for seed " + std::to_string(r.seed) + " does not match its embedded scenario");
    }
    if (r.digest != report.digest) {
      throw DigestError("records come from different scenarios (" + report.digest.substr(0, 16) + " vs " +
                        r.digest.substr(0, 16) + "); refusing to aggregate");
    }
  }
  std::map<std::pair<std::string, std::string>, AggregateRow> rows;
  for (const auto& r : records) {
    for (const auto& m : r.metrics) {
      auto [it, inserted] = rows.try_emplace({m.group, m.name});
      AggregateRow& row = it->second;
      if (inserted) {
        row.group = m.group;
        row.name = m.name;
        row.min = row.max = m.value;
      }
      ++row.count;
      row.sum += m.value;
      row.min = std::min(row.min, m.value);
      row.max = std::max(row.max, m.value);
    }
  }
  for (auto& [key, row] : rows) {
    row.mean = row.sum / static_cast<double>(row.count);
    report.rows.push_back(row);
  }
  report.table = report_table(report);
  return report;
}

namespace {

std::string report_table(const Report& report) {
  std::ostringstream out;
  out << "digest: " << report.digest << "\n";
  out << "records: " << report.records << "\n\n";
  out << std::left << std::setw(28) << "group" << std::setw(36) << "metric" << std::right << std::setw(6) << "n"
      << std::setw(14) << "mean" << std::setw(14) << "min" << std::setw(14) << "max" << std::setw(14) << "sum" << "\n";
  for (const auto& r : report.rows) {
    out << std::left << std::setw(28) << r.group << std::setw(36) << r.name << std::right << std::setw(6) << r.count
        << std::setw(14) << num(r.mean) << std::setw(14) << num(r.min) << std::setw(14) << num(r.max) << std::setw(14)
        << num(r.sum) << "\n";
  }
  return out.str();
}

}  // namespace

std::vector<RunRecord> load_records(const std::vector<fs::path>& paths) {
  std::vector<fs::path> files;
  for (const auto& p : paths) {
    std::error_code ec;
    if (fs::is_directory(p, ec)) {
      for (const auto& entry : fs::directory_iterator(p)) {
        const std::string name = entry.path().filename().string();
        if (name.starts_with("record-") && name.ends_with(".json")) files.push_back(entry.path());
      }
    } else if (fs::exists(p, ec)) {
      files.push_back(p);
    } else {
      throw IoError("no such record file or directory: " + p.string());
    }
  }
  std::vector<RunRecord> records;
  for (const auto& f : files) records.push_back(record_from_json(read_text(f)));
  std::stable_sort(records.begin(), records.end(), [](const RunRecord& a, const RunRecord& b) {
    return a.seed != b.seed ? a.seed < b.seed : a.started < b.started;
  });
  return records;
}

void write_report(const Report& report, const std::vector<RunRecord>& records, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string());
  write_text(dir / "report.txt", report.table);
  std::string csv = "group,metric,count,mean,min,max,sum\n";
  for (const auto& r : report.rows) {
    csv += csv_field(r.group) + "," + r.name + "," + std::to_string(r.count) + "," + num(r.mean) + "," + num(r.min) +
           "," + num(r.max) + "," + num(r.sum) + "\n";
  }
  write_text(dir / "report.csv", csv);

  std::vector<std::string> groups;
  for (const auto& r : records) {
    for (const auto& e : r.episodes) {
      if (std::find(groups.begin(), groups.end(), e.group) == groups.end()) groups.push_back(e.group);
    }
  }
  if (groups.empty()) return;
  std::string returns = "group,episode,mean_return,min_return,max_return\n";
  std::string catastrophes = "group,episode,cumulative_catastrophes\n";
  for (const auto& g : groups) {
    std::vector<const EpisodeSeries*> series;
    std::size_t length = 0;
    for (const auto& r : records) {
      for (const auto& e : r.episodes) {
        if (e.group != g) continue;
        series.push_back(&e);
        length = std::max(length, e.returns.size());
      }
    }
    std::vector<long long> cumulative(series.size(), 0);
    for (std::size_t i = 0; i < length; ++i) {
      double sum = 0, lo = 0, hi = 0;
      long long total = 0;
      int n = 0;
      for (std::size_t k = 0; k < series.size(); ++k) {
        if (i >= series[k]->returns.size()) continue;
        double v = series[k]->returns[i];
        lo = n == 0 ? v : std::min(lo, v);
        hi = n == 0 ? v : std::max(hi, v);
        sum += v;
        ++n;
        cumulative[k] += series[k]->catastrophes[i];
      }
      for (long long c : cumulative) total += c;
      returns += csv_field(g) + "," + std::to_string(i) + "," + num(sum / n) + "," + num(lo) + "," + num(hi) + "\n";
      catastrophes += csv_field(g) + "," + std::to_string(i) + "," + std::to_string(total) + "\n";
    }
  }
  write_text(dir / "plot_return.csv", returns);
  write_text(dir / "plot_catastrophes.csv", catastrophes);
}

}  // namespace relv::harness
