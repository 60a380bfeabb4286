#include "relv/scenario.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace relv::harness {

ScenarioError::ScenarioError(int line, int column, const std::string& message)
    : ValidationError("line " + std::to_string(line) + (column > 0 ? ", column " + std::to_string(column) : "") +
                      ": " + message),
      line_(line),
      column_(column) {}

std::string to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::kDecisionProblem: return "decision-problem";
    case ScenarioKind::kPropertyCheck: return "property-check";
    case ScenarioKind::kTrainingExperiment: return "training-experiment";
  }
  return "?";
}

agents::TrainConfig TrainSpec::config(std::uint64_t seed) const {
  agents::TrainConfig c;
  c.learning_rate = to_double(learning_rate);
  c.discount = to_double(discount);
  c.epsilon_start = to_double(epsilon_start);
  c.epsilon_end = to_double(epsilon_end);
  c.epsilon_decay_fraction = to_double(epsilon_decay);
  c.episodes = episodes;
  c.seed = seed;
  c.lambda = to_double(lambda);
  c.q_init = to_double(q_init);
  return c;
}

DecisionProblem Scenario::problem() const {
  std::map<std::string, Outcome> by_label;
  for (const auto& o : outcomes) by_label.emplace(o.label, o);
  std::vector<Act> built;
  for (const auto& a : acts) {
    Act act{a.name, {}};
    for (const auto& [state, label] : a.cells) act.outcomes.emplace(state, by_label.at(label));
    built.push_back(std::move(act));
  }
  return DecisionProblem(states, std::move(built));
}

std::optional<ChoiceRule> Scenario::relv_rule() const {
  for (const auto& r : rules) {
    if (r.kind() == RuleKind::kRelv) return r;
  }
  return std::nullopt;
}

namespace {

struct FieldError {
  std::size_t offset;
  std::string message;
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::size_t leading_space(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
  return i;
}

// Splits on `sep`, reporting each trimmed piece with its offset in `s`.
std::vector<std::pair<std::string_view, std::size_t>> split(std::string_view s, char sep) {
  std::vector<std::pair<std::string_view, std::size_t>> out;
  std::size_t start = 0;
  while (true) {
    std::size_t end = s.find(sep, start);
    std::string_view piece = s.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    out.emplace_back(trim(piece), start + leading_space(piece));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return out;
}

Rational rational_field(std::string_view text, std::size_t offset = 0) {
  try {
    return parse_rational(text);
  } catch (const std::invalid_argument& e) {
    throw FieldError{offset, e.what()};
  }
}

long long integer_field(std::string_view text, std::size_t offset = 0) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw FieldError{offset, "expected an integer, got '" + std::string(text) + "'"};
  }
  return v;
}

std::uint64_t seed_value(std::string_view text, std::size_t offset) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw FieldError{offset, "bad seed '" + std::string(text) + "'"};
  }
  return v;
}

std::vector<ChoiceRule> rules_field(std::string_view text) {
  std::vector<ChoiceRule> rules;
  for (auto [piece, offset] : split(text, ';')) {
    if (piece.empty()) continue;
    std::istringstream in{std::string(piece)};
    std::string word;
    in >> word;
    RuleKind kind;
    try {
      kind = parse_rule_kind(word);
    } catch (const std::invalid_argument& e) {
      throw FieldError{offset, e.what()};
    }
    std::optional<Rational> grain, threshold;
    std::string param;
    while (in >> param) {
      std::size_t at = offset + piece.find(param);
      auto eq = param.find('=');
      if (eq == std::string::npos) throw FieldError{at, "rule parameter '" + param + "' lacks '='"};
      std::string key = param.substr(0, eq);
      Rational v = rational_field(std::string_view(param).substr(eq + 1), at + eq + 1);
      if (key == "grain" && kind == RuleKind::kRelv) {
        grain = v;
      } else if (key == "threshold" && kind == RuleKind::kDiscount) {
        threshold = v;
      } else {
        throw FieldError{at, "rule " + word + " takes no parameter '" + key + "'"};
      }
    }
    try {
      switch (kind) {
        case RuleKind::kRelv:
          if (!grain) throw FieldError{offset, "RELV needs grain=<q>"};
          rules.push_back(ChoiceRule::relv(*grain));
          break;
        case RuleKind::kEv: rules.push_back(ChoiceRule::ev()); break;
        case RuleKind::kDiscount:
          if (!threshold) throw FieldError{offset, "DISCOUNT needs threshold=<q>"};
          rules.push_back(ChoiceRule::discount(*threshold));
          break;
      }
    } catch (const std::invalid_argument& e) {
      throw FieldError{offset, e.what()};
    }
  }
  return rules;
}

std::vector<std::uint64_t> seeds_field(std::string_view text) {
  std::vector<std::uint64_t> seeds;
  for (auto [piece, offset] : split(text, ',')) {
    if (piece.empty()) {
      if (split(text, ',').size() == 1) break;
      throw FieldError{offset, "empty seed entry"};
    }
    auto dots = piece.find("..");
    if (dots == std::string_view::npos) {
      seeds.push_back(seed_value(piece, offset));
      continue;
    }
    std::uint64_t lo = seed_value(trim(piece.substr(0, dots)), offset);
    std::uint64_t hi = seed_value(trim(piece.substr(dots + 2)), offset + dots + 2);
    if (hi < lo) throw FieldError{offset, "seed range runs backwards"};
    if (hi - lo >= 1'000'000) throw FieldError{offset, "seed range too large"};
    for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
  }
  std::set<std::uint64_t> unique(seeds.begin(), seeds.end());
  if (unique.size() != seeds.size()) throw FieldError{0, "duplicate seeds"};
  return seeds;
}

bool bool_field(std::string_view text) {
  if (text == "yes" || text == "true") return true;
  if (text == "no" || text == "false") return false;
  throw FieldError{0, "expected yes or no, got '" + std::string(text) + "'"};
}

struct Entry {
  std::string key;
  std::string value;
  int line = 0;
  int key_col = 0;
  int value_col = 0;
};

struct Section {
  std::string name;  // "act" for act blocks
  std::string argument;
  int line = 0;
  std::vector<Entry> entries;
  std::vector<std::pair<std::string, int>> rows;  // [map] only
};

const std::set<std::string> kSections{"scenario", "states", "outcomes", "act", "check", "environment", "map", "train"};

std::vector<Section> split_sections(std::string_view text) {
  std::vector<Section> sections;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    std::string_view line = trim(raw);
    const int indent = static_cast<int>(leading_space(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ScenarioError(line_no, indent + 1, "unterminated section header");
      std::string_view inner = trim(line.substr(1, line.size() - 2));
      Section s;
      s.line = line_no;
      auto space = inner.find(' ');
      s.name = std::string(inner.substr(0, space));
      if (space != std::string_view::npos) s.argument = std::string(trim(inner.substr(space + 1)));
      if (!kSections.contains(s.name)) {
        throw ScenarioError(line_no, indent + 2, "unknown section [" + std::string(inner) + "]");
      }
      if (s.name == "act" && s.argument.empty()) throw ScenarioError(line_no, indent + 2, "act section needs a name");
      if (s.name != "act" && !s.argument.empty()) {
        throw ScenarioError(line_no, indent + 2, "section [" + s.name + "] takes no argument");
      }
      for (const auto& other : sections) {
        if (other.name == s.name && other.argument == s.argument) {
          throw ScenarioError(line_no, indent + 1,
                              "duplicate section [" + std::string(inner) + "], first at line " + std::to_string(other.line));
        }
      }
      sections.push_back(std::move(s));
      continue;
    }
    if (sections.empty()) {
      if (line.front() == '#' || line.front() == ';') continue;
      throw ScenarioError(line_no, indent + 1, "content before the first section header");
    }
    Section& current = sections.back();
    if (current.name == "map") {
      current.rows.emplace_back(std::string(line), line_no);
      continue;
    }
    if (line.front() == '#' || line.front() == ';') continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ScenarioError(line_no, indent + 1, "expected 'key = value'");
    Entry e;
    e.key = std::string(trim(line.substr(0, eq)));
    std::string_view rest = line.substr(eq + 1);
    e.value = std::string(trim(rest));
    e.line = line_no;
    e.key_col = indent + 1;
    e.value_col = indent + static_cast<int>(eq) + 2 + static_cast<int>(leading_space(rest));
    if (e.key.empty()) throw ScenarioError(line_no, indent + 1, "empty key");
    for (const auto& other : current.entries) {
      if (other.key == e.key) {
        throw ScenarioError(line_no, e.key_col,
                            "duplicate key '" + e.key + "', first at line " + std::to_string(other.line));
      }
    }
    current.entries.push_back(std::move(e));
  }
  return sections;
}

// Runs `f` translating field errors to positioned scenario errors.
template <typename F>
auto at(const Entry& e, F&& f) {
  try {
    return f();
  } catch (const FieldError& err) {
    throw ScenarioError(e.line, e.value_col + static_cast<int>(err.offset), e.key + ": " + err.message);
  } catch (const ScenarioError&) {
    throw;
  } catch (const std::invalid_argument& err) {
    throw ScenarioError(e.line, e.value_col, e.key + ": " + err.what());
  }
}

[[noreturn]] void unknown_key(const Section& s, const Entry& e) {
  throw ScenarioError(e.line, e.key_col, "unknown key '" + e.key + "' in [" + s.name + "]");
}

const std::map<std::string, std::set<std::string>> kEnvironmentKeys{
    {"lava", {"slip", "catastrophe_weight", "catastrophe_value", "goal_value", "step_value", "horizon"}},
    {"shutdown",
     {"press_probability", "interference_weight", "interference_value", "compliance_weight", "noncompliance_value",
      "goal_value", "pressed_goal_fraction", "step_value", "horizon"}},
    {"forced-choice", {"kill_weight", "kill_value", "refuse_unit_loss"}},
    {"painkiller", {"kill_probability", "kill_weight", "kill_value", "cure_value"}},
};

const std::set<std::string> kAgents{"vetoer", "risk-sensitive", "baseline"};

void parse_scenario_section(const Section& s, Scenario& out, bool& have_kind) {
  bool have_name = false;
  for (const auto& e : s.entries) {
    if (e.key == "name") {
      if (e.value.empty()) throw ScenarioError(e.line, e.value_col, "name: must not be empty");
      out.name = e.value;
      have_name = true;
    } else if (e.key == "kind") {
      if (e.value == "decision-problem") {
        out.kind = ScenarioKind::kDecisionProblem;
      } else if (e.value == "property-check") {
        out.kind = ScenarioKind::kPropertyCheck;
      } else if (e.value == "training-experiment") {
        out.kind = ScenarioKind::kTrainingExperiment;
      } else {
        throw ScenarioError(e.line, e.value_col, "kind: unknown scenario kind '" + e.value + "'");
      }
      have_kind = true;
    } else if (e.key == "rules") {
      out.rules = at(e, [&] { return rules_field(e.value); });
    } else if (e.key == "seeds") {
      out.seeds = at(e, [&] { return seeds_field(e.value); });
    } else {
      unknown_key(s, e);
    }
  }
  if (!have_name) throw ScenarioError(s.line, 0, "[scenario] needs a name");
  if (!have_kind) throw ScenarioError(s.line, 0, "[scenario] needs a kind");
}

Outcome outcome_field(const Entry& e) {
  Outcome o;
  o.label = e.key;
  bool has_d = false, has_v = false;
  for (auto [token, offset] : split(e.value, ' ')) {
    if (token.empty()) continue;
    auto eq = token.find('=');
    if (eq == std::string_view::npos) throw FieldError{offset, "expected deontic=<q> or value=<q>"};
    std::string_view key = token.substr(0, eq);
    Rational v = rational_field(token.substr(eq + 1), offset + eq + 1);
    if (key == "deontic" && !has_d) {
      o.deontic = v;
      has_d = true;
    } else if (key == "value" && !has_v) {
      o.value = v;
      has_v = true;
    } else {
      throw FieldError{offset, "unexpected '" + std::string(key) + "'"};
    }
  }
  if (!has_d || !has_v) throw FieldError{0, "outcome needs both deontic=<q> and value=<q>"};
  validate_outcome(o);
  return o;
}

lab::Partition partition_field(std::string_view text) {
  lab::Partition p;
  for (auto [cell, offset] : split(text, '|')) {
    lab::Event event;
    for (auto [state, inner] : split(cell, ',')) {
      if (state.empty()) throw FieldError{offset + inner, "empty state name in partition"};
      event.insert(std::string(state));
    }
    p.push_back(std::move(event));
  }
  return p;
}

void parse_check_section(const Section& s, CheckSpec& c) {
  bool has_unit = false;
  for (const auto& e : s.entries) {
    if (e.key == "stp") {
      c.stp = at(e, [&] { return partition_field(e.value); });
    } else if (e.key == "compare") {
      c.compare = at(e, [&] { return bool_field(e.value); });
    } else if (e.key == "stp_grid") {
      c.stp_grid = at(e, [&] { return bool_field(e.value); });
    } else if (e.key == "agglomeration_n") {
      long long n = at(e, [&] { return integer_field(e.value); });
      if (n < 2 || n > 1'000'000) throw ScenarioError(e.line, e.value_col, "agglomeration_n: must lie in [2, 1000000]");
      c.agglomeration_n = static_cast<int>(n);
    } else if (e.key == "agglomeration_unit") {
      c.agglomeration_unit = at(e, [&] { return rational_field(e.value); });
      if (c.agglomeration_unit > 0) throw ScenarioError(e.line, e.value_col, "agglomeration_unit: must be <= 0");
      has_unit = true;
    } else if (e.key == "pump_depth") {
      long long d = at(e, [&] { return integer_field(e.value); });
      if (d < 0 || d > lab::kMaxPumpDepth) {
        throw ScenarioError(e.line, e.value_col,
                            "pump_depth: must lie in [0, " + std::to_string(lab::kMaxPumpDepth) + "]");
      }
      c.pump_depth = static_cast<int>(d);
    } else if (e.key == "pump_menu") {
      if (e.value != "mixed" && e.value != "pure") {
        throw ScenarioError(e.line, e.value_col, "pump_menu: expected mixed or pure");
      }
      c.pump_menu = e.value;
    } else if (e.key == "pump_fee") {
      c.pump_fee = at(e, [&] { return rational_field(e.value); });
      if (c.pump_fee < 0) throw ScenarioError(e.line, e.value_col, "pump_fee: must be >= 0");
    } else if (e.key == "pump_foresight") {
      if (e.value != "sophisticated" && e.value != "myopic") {
        throw ScenarioError(e.line, e.value_col, "pump_foresight: expected sophisticated or myopic");
      }
      c.pump_foresight = e.value;
    } else {
      unknown_key(s, e);
    }
  }
  if (has_unit && !c.agglomeration_n) throw ScenarioError(s.line, 0, "agglomeration_unit given without agglomeration_n");
}

void parse_environment_section(const Section& s, EnvironmentSpec& env) {
  const Entry* type = nullptr;
  for (const auto& e : s.entries) {
    if (e.key == "type") type = &e;
  }
  if (!type) throw ScenarioError(s.line, 0, "[environment] needs a type");
  auto allowed = kEnvironmentKeys.find(type->value);
  if (allowed == kEnvironmentKeys.end()) {
    throw ScenarioError(type->line, type->value_col, "type: unknown environment type '" + type->value + "'");
  }
  env.type = type->value;
  for (const auto& e : s.entries) {
    if (e.key == "type") continue;
    if (e.key == "multipliers" && env.type == "forced-choice") {
      at(e, [&] {
        for (auto [piece, offset] : split(e.value, ',')) {
          Rational m = rational_field(piece, offset);
          if (m < 0) throw FieldError{offset, "multipliers must be non-negative"};
          env.multipliers.push_back(m);
        }
        return 0;
      });
      continue;
    }
    if (!allowed->second.contains(e.key)) unknown_key(s, e);
    Rational v = at(e, [&] { return rational_field(e.value); });
    if (e.key == "horizon" && (v.get_den() != 1 || v < 1 || v > 100000)) {
      throw ScenarioError(e.line, e.value_col, "horizon: must be an integer in [1, 100000]");
    }
    env.params.emplace(e.key, v);
  }
  if (env.type == "forced-choice" && env.multipliers.empty()) env.multipliers.push_back(1);
}

void parse_train_section(const Section& s, TrainSpec& t) {
  auto positive_int = [](const Entry& e, long long lo) {
    long long v = at(e, [&] { return integer_field(e.value); });
    if (v < lo || v > 100'000'000) {
      throw ScenarioError(e.line, e.value_col, e.key + ": must lie in [" + std::to_string(lo) + ", 100000000]");
    }
    return static_cast<int>(v);
  };
  auto rate = [](const Entry& e, bool allow_zero) {
    Rational v = at(e, [&] { return rational_field(e.value); });
    if (v > 1 || v < 0 || (v == 0 && !allow_zero)) {
      throw ScenarioError(e.line, e.value_col, e.key + (allow_zero ? ": must lie in [0,1]" : ": must lie in (0,1]"));
    }
    return v;
  };
  for (const auto& e : s.entries) {
    if (e.key == "agents") {
      t.agents.clear();
      for (auto [piece, offset] : split(e.value, ',')) {
        std::string name(piece);
        if (!kAgents.contains(name)) {
          throw ScenarioError(e.line, e.value_col + static_cast<int>(offset), "agents: unknown agent '" + name + "'");
        }
        if (std::find(t.agents.begin(), t.agents.end(), name) != t.agents.end()) {
          throw ScenarioError(e.line, e.value_col + static_cast<int>(offset), "agents: '" + name + "' listed twice");
        }
        t.agents.push_back(name);
      }
    } else if (e.key == "risk_source") {
      if (e.value != "oracle" && e.value != "learned") {
        throw ScenarioError(e.line, e.value_col, "risk_source: expected oracle or learned");
      }
      t.risk_source = e.value;
    } else if (e.key == "learning_rate") {
      t.learning_rate = rate(e, false);
    } else if (e.key == "discount") {
      t.discount = rate(e, false);
    } else if (e.key == "epsilon_start") {
      t.epsilon_start = rate(e, false);
    } else if (e.key == "epsilon_end") {
      t.epsilon_end = rate(e, true);
    } else if (e.key == "epsilon_decay") {
      t.epsilon_decay = rate(e, false);
    } else if (e.key == "episodes") {
      t.episodes = positive_int(e, 1);
    } else if (e.key == "lambda") {
      t.lambda = at(e, [&] { return rational_field(e.value); });
      if (t.lambda < 0) throw ScenarioError(e.line, e.value_col, "lambda: must be >= 0");
    } else if (e.key == "q_init") {
      t.q_init = at(e, [&] { return rational_field(e.value); });
    } else if (e.key == "eval_episodes") {
      t.eval_episodes = positive_int(e, 1);
    } else if (e.key == "smoothing") {
      t.smoothing = at(e, [&] { return rational_field(e.value); });
      if (t.smoothing < 0) throw ScenarioError(e.line, e.value_col, "smoothing: must be >= 0");
    } else if (e.key == "model_episodes") {
      t.model_episodes = positive_int(e, 1);
    } else {
      unknown_key(s, e);
    }
  }
  if (t.agents.empty()) throw ScenarioError(s.line, 0, "[train] lists no agents");
}

const Section* find_section(const std::vector<Section>& sections, const std::string& name) {
  for (const auto& s : sections) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

void validate_problem(const std::vector<Section>& sections, const Scenario& out) {
  const Section* states = find_section(sections, "states");
  const Section* outcomes = find_section(sections, "outcomes");
  if (!states) throw ScenarioError(1, 0, "decision problem needs a [states] block");
  if (!outcomes) throw ScenarioError(states->line, 0, "decision problem needs an [outcomes] block");
  if (out.states.empty()) throw ScenarioError(states->line, 0, "[states] is empty");
  if (out.acts.empty()) throw ScenarioError(outcomes->line, 0, "decision problem needs at least one [act] block");
  Rational total = 0;
  for (const auto& st : out.states) total += st.prior;
  if (total != 1) {
    throw ScenarioError(states->line, 0, "[states]: priors sum to " + to_string(total) + ", expected 1");
  }
  std::set<std::string> state_names;
  for (const auto& st : out.states) state_names.insert(st.label);
  std::set<std::string> outcome_names;
  for (const auto& o : out.outcomes) outcome_names.insert(o.label);
  for (const auto& s : sections) {
    if (s.name != "act") continue;
    std::set<std::string> covered;
    for (const auto& e : s.entries) {
      if (!state_names.contains(e.key)) {
        throw ScenarioError(e.line, e.key_col, "[act " + s.argument + "]: unknown state '" + e.key + "'");
      }
      if (!outcome_names.contains(e.value)) {
        throw ScenarioError(e.line, e.value_col, "[act " + s.argument + "]: unknown outcome '" + e.value + "'");
      }
      covered.insert(e.key);
    }
    for (const auto& name : state_names) {
      if (!covered.contains(name)) {
        throw ScenarioError(s.line, 0, "[act " + s.argument + "]: no outcome for state '" + name + "'");
      }
    }
  }
}

}  // namespace

Scenario parse_scenario(std::string_view text) {
  std::vector<Section> sections = split_sections(text);
  Scenario out;
  bool have_kind = false;
  const Section* header = find_section(sections, "scenario");
  if (!header) throw ScenarioError(1, 0, "missing [scenario] section");
  parse_scenario_section(*header, out, have_kind);

  std::set<std::string> seen_states, seen_outcomes;
  for (const auto& s : sections) {
    if (s.name == "states") {
      for (const auto& e : s.entries) {
        if (e.key.find_first_of("|,") != std::string::npos) {
          throw ScenarioError(e.line, e.key_col, "state names may not contain '|' or ','");
        }
        Rational p = at(e, [&] { return rational_field(e.value); });
        if (p < 0 || p > 1) throw ScenarioError(e.line, e.value_col, e.key + ": prior must lie in [0,1]");
        out.states.push_back({e.key, p});
      }
    } else if (s.name == "outcomes") {
      for (const auto& e : s.entries) out.outcomes.push_back(at(e, [&] { return outcome_field(e); }));
    } else if (s.name == "act") {
      ActEntry act{s.argument, {}};
      for (const auto& e : s.entries) act.cells.emplace_back(e.key, e.value);
      out.acts.push_back(std::move(act));
    } else if (s.name == "check") {
      CheckSpec c;
      parse_check_section(s, c);
      out.check = std::move(c);
    } else if (s.name == "environment") {
      EnvironmentSpec env;
      parse_environment_section(s, env);
      out.environment = std::move(env);
    } else if (s.name == "train") {
      TrainSpec t;
      parse_train_section(s, t);
      out.train = std::move(t);
    }
  }

  if (const Section* map = find_section(sections, "map")) {
    if (!out.environment) throw ScenarioError(map->line, 0, "[map] without an [environment]");
    if (out.environment->type != "lava" && out.environment->type != "shutdown") {
      throw ScenarioError(map->line, 0, "[map] is not used by environment type " + out.environment->type);
    }
    if (map->rows.empty()) throw ScenarioError(map->line, 0, "[map] is empty");
    std::string joined;
    for (const auto& [row, line] : map->rows) joined += row + "\n";
    try {
      out.environment->map = worlds::GridMap::parse(joined);
    } catch (const std::invalid_argument& e) {
      throw ScenarioError(map->line, 0, std::string("[map]: ") + e.what());
    }
  }

  const bool has_problem_blocks = find_section(sections, "states") || find_section(sections, "outcomes") ||
                                  find_section(sections, "act");
  switch (out.kind) {
    case ScenarioKind::kDecisionProblem:
      validate_problem(sections, out);
      if (out.environment || out.train) throw ScenarioError(header->line, 0, "decision-problem takes no environment");
      if (out.rules.empty()) throw ScenarioError(header->line, 0, "rules: at least one rule is required");
      break;
    case ScenarioKind::kPropertyCheck: {
      if (!out.check) throw ScenarioError(header->line, 0, "property-check needs a [check] block");
      if (out.rules.empty()) throw ScenarioError(header->line, 0, "rules: at least one rule is required");
      if (has_problem_blocks) validate_problem(sections, out);
      const Section* check = find_section(sections, "check");
      if ((out.check->stp || out.check->compare) && !out.has_problem()) {
        throw ScenarioError(check->line, 0, "stp and compare need a decision problem");
      }
      if (out.check->agglomeration_n && !out.relv_rule()) {
        throw ScenarioError(check->line, 0, "agglomeration needs a RELV rule");
      }
      if (out.check->stp) {
        try {
          lab::check_stp(out.problem(), out.rules.front(), *out.check->stp);
        } catch (const std::invalid_argument& e) {
          throw ScenarioError(check->line, 0, std::string("stp: ") + e.what());
        }
      }
      if (out.environment || out.train) throw ScenarioError(header->line, 0, "property-check takes no environment");
      break;
    }
    case ScenarioKind::kTrainingExperiment: {
      if (!out.environment) throw ScenarioError(header->line, 0, "training-experiment needs an [environment]");
      if (!out.train) throw ScenarioError(header->line, 0, "training-experiment needs a [train] block");
      if (has_problem_blocks || out.check) {
        throw ScenarioError(header->line, 0, "training-experiment takes no decision problem or checks");
      }
      const Section* train = find_section(sections, "train");
      for (const auto& a : out.train->agents) {
        if (a != "baseline" && !out.relv_rule()) {
          throw ScenarioError(train->line, 0, "agent '" + a + "' needs a RELV rule for its grain");
        }
      }
      if (std::find(out.train->agents.begin(), out.train->agents.end(), "risk-sensitive") != out.train->agents.end() &&
          out.train->lambda == 0) {
        throw ScenarioError(train->line, 0, "risk-sensitive agent needs lambda > 0");
      }
      try {
        build_worlds(out);
      } catch (const std::invalid_argument& e) {
        throw ScenarioError(find_section(sections, "environment")->line, 0, std::string("[environment]: ") + e.what());
      }
      break;
    }
  }
  return out;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::ios_base::failure("cannot read scenario file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_scenario(buffer.str());
}

std::vector<ChoiceRule> parse_rules(std::string_view text) {
  try {
    return rules_field(text);
  } catch (const FieldError& e) {
    throw ValidationError("rules: " + e.message);
  }
}

std::string format_rules(const std::vector<ChoiceRule>& rules) {
  std::string out;
  for (std::size_t i = 0; i < rules.size(); ++i) {
    if (i) out += "; ";
    out += rules[i].describe();
  }
  return out;
}

std::vector<std::uint64_t> parse_seeds(std::string_view text) {
  try {
    return seeds_field(trim(text));
  } catch (const FieldError& e) {
    throw ValidationError("seeds: " + e.message);
  }
}

std::string format_seeds(const std::vector<std::uint64_t>& seeds) {
  std::string out;
  std::size_t i = 0;
  while (i < seeds.size()) {
    std::size_t j = i;
    while (j + 1 < seeds.size() && seeds[j + 1] == seeds[j] + 1) ++j;
    if (!out.empty()) out += ", ";
    if (j - i >= 2) {
      out += std::to_string(seeds[i]) + ".." + std::to_string(seeds[j]);
      i = j + 1;
    } else {
      out += std::to_string(seeds[i]);
      ++i;
    }
  }
  return out;
}

std::string serialize(const Scenario& s) {
  std::ostringstream out;
  out << "[scenario]\n";
  out << "name = " << s.name << "\n";
  out << "kind = " << to_string(s.kind) << "\n";
  if (!s.rules.empty()) out << "rules = " << format_rules(s.rules) << "\n";
  if (!s.seeds.empty()) out << "seeds = " << format_seeds(s.seeds) << "\n";

  if (!s.states.empty()) {
    out << "\n[states]\n";
    for (const auto& st : s.states) out << st.label << " = " << to_string(st.prior) << "\n";
  }
  if (!s.outcomes.empty()) {
    out << "\n[outcomes]\n";
    for (const auto& o : s.outcomes) {
      out << o.label << " = deontic=" << to_string(o.deontic) << " value=" << to_string(o.value) << "\n";
    }
  }
  for (const auto& a : s.acts) {
    out << "\n[act " << a.name << "]\n";
    for (const auto& [state, label] : a.cells) out << state << " = " << label << "\n";
  }
  if (s.check) {
    const CheckSpec& c = *s.check;
    out << "\n[check]\n";
    if (c.stp) {
      out << "stp = ";
      for (std::size_t i = 0; i < c.stp->size(); ++i) {
        if (i) out << " | ";
        bool first = true;
        for (const auto& state : (*c.stp)[i]) {
          out << (first ? "" : ", ") << state;
          first = false;
        }
      }
      out << "\n";
    }
    out << "compare = " << (c.compare ? "yes" : "no") << "\n";
    out << "stp_grid = " << (c.stp_grid ? "yes" : "no") << "\n";
    if (c.agglomeration_n) {
      out << "agglomeration_n = " << *c.agglomeration_n << "\n";
      out << "agglomeration_unit = " << to_string(c.agglomeration_unit) << "\n";
    }
    if (c.pump_depth) out << "pump_depth = " << *c.pump_depth << "\n";
    out << "pump_menu = " << c.pump_menu << "\n";
    out << "pump_fee = " << to_string(c.pump_fee) << "\n";
    out << "pump_foresight = " << c.pump_foresight << "\n";
  }
  if (s.environment) {
    const EnvironmentSpec& env = *s.environment;
    out << "\n[environment]\n";
    out << "type = " << env.type << "\n";
    for (const auto& [key, value] : env.params) out << key << " = " << to_string(value) << "\n";
    if (!env.multipliers.empty()) {
      out << "multipliers = ";
      for (std::size_t i = 0; i < env.multipliers.size(); ++i) out << (i ? ", " : "") << to_string(env.multipliers[i]);
      out << "\n";
    }
    if (env.map) out << "\n[map]\n" << env.map->text();
  }
  if (s.train) {
    const TrainSpec& t = *s.train;
    out << "\n[train]\n";
    out << "agents = ";
    for (std::size_t i = 0; i < t.agents.size(); ++i) out << (i ? ", " : "") << t.agents[i];
    out << "\n";
    out << "risk_source = " << t.risk_source << "\n";
    out << "learning_rate = " << to_string(t.learning_rate) << "\n";
    out << "discount = " << to_string(t.discount) << "\n";
    out << "epsilon_start = " << to_string(t.epsilon_start) << "\n";
    out << "epsilon_end = " << to_string(t.epsilon_end) << "\n";
    out << "epsilon_decay = " << to_string(t.epsilon_decay) << "\n";
    out << "episodes = " << t.episodes << "\n";
    out << "lambda = " << to_string(t.lambda) << "\n";
    out << "q_init = " << to_string(t.q_init) << "\n";
    out << "eval_episodes = " << t.eval_episodes << "\n";
    out << "smoothing = " << to_string(t.smoothing) << "\n";
    out << "model_episodes = " << t.model_episodes << "\n";
  }
  return out.str();
}

std::string sha256_hex(std::string_view data) {
  unsigned char hash[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), hash, &length, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < length; ++i) {
    out += kHex[hash[i] >> 4];
    out += kHex[hash[i] & 15];
  }
  return out;
}

std::string digest(const Scenario& scenario) { return sha256_hex(serialize(scenario)); }

namespace {

template <typename T>
void assign(const std::map<std::string, Rational>& params, const std::string& key, T& field) {
  if (auto it = params.find(key); it != params.end()) {
    if constexpr (std::is_same_v<T, int>) {
      field = static_cast<int>(it->second.get_num().get_si());
    } else {
      field = it->second;
    }
  }
}

}  // namespace

std::vector<BuiltWorld> build_worlds(const Scenario& scenario) {
  if (!scenario.environment) throw ParameterError("scenario has no environment");
  const EnvironmentSpec& spec = *scenario.environment;
  const auto& p = spec.params;
  std::vector<BuiltWorld> out;
  auto wrap = [](worlds::Environment env) {
    worlds::World w;
    w.oracle = worlds::RiskOracle::from(env);
    w.env = std::move(env);
    return w;
  };

  if (spec.type == "lava") {
    worlds::LavaConfig c = worlds::default_lava_config();
    if (spec.map) c.map = *spec.map;
    assign(p, "slip", c.slip);
    assign(p, "catastrophe_weight", c.catastrophe_weight);
    assign(p, "catastrophe_value", c.catastrophe_value);
    assign(p, "goal_value", c.goal_value);
    assign(p, "step_value", c.step_value);
    assign(p, "horizon", c.horizon);
    out.push_back({"default", worlds::lava_grid(c)});
  } else if (spec.type == "shutdown") {
    worlds::ShutdownConfig c = worlds::default_shutdown_config();
    if (spec.map) c.map = *spec.map;
    if (auto rule = scenario.relv_rule()) c.grain = rule->grain();
    assign(p, "press_probability", c.press_probability);
    assign(p, "interference_weight", c.interference_weight);
    assign(p, "interference_value", c.interference_value);
    assign(p, "compliance_weight", c.compliance_weight);
    assign(p, "noncompliance_value", c.noncompliance_value);
    assign(p, "goal_value", c.goal_value);
    assign(p, "pressed_goal_fraction", c.pressed_goal_fraction);
    assign(p, "step_value", c.step_value);
    assign(p, "horizon", c.horizon);
    out.push_back({"default", worlds::shutdown_grid(c)});
  } else if (spec.type == "forced-choice") {
    worlds::ForcedChoiceConfig c;
    assign(p, "kill_weight", c.kill_weight);
    assign(p, "kill_value", c.kill_value);
    assign(p, "refuse_unit_loss", c.refuse_unit_loss);
    for (const auto& m : spec.multipliers) {
      out.push_back({"m=" + to_string(m), wrap(worlds::forced_choice_env(m, c))});
    }
  } else if (spec.type == "painkiller") {
    worlds::PainkillerConfig c;
    assign(p, "kill_probability", c.kill_probability);
    assign(p, "kill_weight", c.kill_weight);
    assign(p, "kill_value", c.kill_value);
    assign(p, "cure_value", c.cure_value);
    out.push_back({"default", wrap(worlds::painkiller_env(c))});
  } else {
    throw ParameterError("unknown environment type '" + spec.type + "'");
  }
  return out;
}

}  // namespace relv::harness
