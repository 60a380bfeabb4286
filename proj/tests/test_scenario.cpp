#include <gtest/gtest.h>

#include <filesystem>
#include <string>

#include "relv/scenario.hpp"
#include "relv/worlds.hpp"

using namespace relv;
using namespace relv::harness;

namespace {

std::string scenario_path(const std::string& name) { return std::string(RELV_SCENARIO_DIR) + "/" + name; }

const char* kSmallProblem = R"([scenario]
name = small
kind = decision-problem
rules = RELV grain=1/10; EV

[states]
rain = 1/2
sun = 1/2

[outcomes]
wet = deontic=0 value=-1
dry = deontic=0 value=1

[act umbrella]
rain = dry
sun = dry

[act none]
rain = wet
sun = dry
)";

// Replaces the first occurrence of `from` in the small problem.
std::string small_with(const std::string& from, const std::string& to) {
  std::string text = kSmallProblem;
  auto at = text.find(from);
  EXPECT_NE(at, std::string::npos) << from;
  return text.replace(at, from.size(), to);
}

ScenarioError parse_error(const std::string& text) {
  try {
    parse_scenario(text);
  } catch (const ScenarioError& e) {
    return e;
  }
  ADD_FAILURE() << "expected a ScenarioError";
  return ScenarioError(0, 0, "none");
}

}  // namespace

TEST(Scenario, RevolverFile) {
  Scenario s = load_scenario(scenario_path("revolver.scenario"));
  EXPECT_EQ(s.kind, ScenarioKind::kPropertyCheck);
  ASSERT_EQ(s.states.size(), 2u);
  EXPECT_EQ(s.states[0].prior, Rational(1, 100));
  ASSERT_EQ(s.acts.size(), 2u);
  EXPECT_EQ(s.acts[1].name, "¬Pull");
  EXPECT_EQ(s.problem(), worlds::revolver());
  ASSERT_EQ(s.rules.size(), 3u);
  EXPECT_EQ(s.rules[0], ChoiceRule::relv(10));
  EXPECT_EQ(s.rules[2], ChoiceRule::discount(Rational(1, 100)));
  ASSERT_TRUE(s.check && s.check->stp);
  EXPECT_EQ(s.check->stp->size(), 2u);
}

TEST(Scenario, GrainIsExactRational) {
  Scenario s = parse_scenario(kSmallProblem);
  EXPECT_EQ(s.rules[0].grain(), Rational(1, 10));
  Scenario back = parse_scenario(serialize(s));
  EXPECT_EQ(back.rules[0].grain(), Rational(1, 10));
  EXPECT_NE(serialize(s).find("grain=1/10"), std::string::npos);
  Scenario decimal = parse_scenario(small_with("grain=1/10", "grain=0.1"));
  EXPECT_EQ(decimal.rules[0].grain(), Rational(1, 10));
}

TEST(Scenario, PriorsMustSumToOne) {
  ScenarioError e = parse_error(small_with("sun = 1/2", "sun = 2/5"));
  EXPECT_NE(std::string(e.what()).find("[states]"), std::string::npos) << e.what();
  EXPECT_NE(std::string(e.what()).find("9/10"), std::string::npos) << e.what();
  EXPECT_EQ(e.line(), 6);
}

TEST(Scenario, ShippedScenariosRoundTrip) {
  for (const auto& entry : std::filesystem::directory_iterator(RELV_SCENARIO_DIR)) {
    if (entry.path().extension() != ".scenario") continue;
    Scenario s = load_scenario(entry.path().string());
    std::string canonical = serialize(s);
    Scenario again = parse_scenario(canonical);
    EXPECT_EQ(again, s) << entry.path();
    EXPECT_EQ(serialize(again), canonical) << entry.path();
    EXPECT_EQ(digest(again), digest(s));
  }
}

TEST(Scenario, ErrorsCarryLineAndColumn) {
  ScenarioError bad_rule = parse_error(small_with("rules = RELV grain=1/10; EV", "rules = RELV grain=1/10; MAXIMIN"));
  EXPECT_EQ(bad_rule.line(), 4);
  EXPECT_GT(bad_rule.column(), 0);
  EXPECT_NE(std::string(bad_rule.what()).find("line 4"), std::string::npos);
  EXPECT_NE(std::string(bad_rule.what()).find("MAXIMIN"), std::string::npos);

  ScenarioError zero_grain = parse_error(small_with("grain=1/10", "grain=0"));
  EXPECT_EQ(zero_grain.line(), 4);
  ScenarioError negative_grain = parse_error(small_with("grain=1/10", "grain=-10"));
  EXPECT_EQ(negative_grain.line(), 4);

  ScenarioError bad_number = parse_error(small_with("rain = 1/2", "rain = 1/x"));
  EXPECT_EQ(bad_number.line(), 7);
  EXPECT_GT(bad_number.column(), 0);

  ScenarioError no_eq = parse_error(small_with("rain = dry", "rain dry"));
  EXPECT_EQ(no_eq.line(), 15);

  ScenarioError unknown_outcome = parse_error(small_with("rain = dry", "rain = soaked"));
  EXPECT_EQ(unknown_outcome.line(), 15);

  ScenarioError unknown_section = parse_error(std::string(kSmallProblem) + "\n[weather]\n");
  EXPECT_NE(std::string(unknown_section.what()).find("weather"), std::string::npos);

  ScenarioError unknown_key = parse_error(small_with("kind = decision-problem", "kind = decision-problem\ncolour = red"));
  EXPECT_EQ(unknown_key.line(), 4);

  ScenarioError duplicate = parse_error(small_with("sun = 1/2", "sun = 1/2\nsun = 1/2"));
  EXPECT_EQ(duplicate.line(), 9);
}

TEST(Scenario, ErrorsAreValidationErrors) {
  EXPECT_THROW(parse_scenario(small_with("sun = 1/2", "sun = 2/5")), ValidationError);
  EXPECT_THROW(parse_scenario("garbage"), ValidationError);
  EXPECT_THROW(load_scenario(scenario_path("does-not-exist.scenario")), std::ios_base::failure);
}

TEST(Scenario, TrainingValidation) {
  std::string lava;
  {
    Scenario s = load_scenario(scenario_path("lava.scenario"));
    lava = serialize(s);
  }
  auto replace = [&](const std::string& from, const std::string& to) {
    std::string t = lava;
    auto at = t.find(from);
    EXPECT_NE(at, std::string::npos) << from;
    return t.replace(at, from.size(), to);
  };
  EXPECT_THROW(parse_scenario(replace("rules = RELV grain=10; EV", "rules = EV")), ScenarioError);
  EXPECT_THROW(parse_scenario(replace("agents = vetoer, baseline", "agents = risk-sensitive")), ScenarioError);
  EXPECT_THROW(parse_scenario(replace("agents = vetoer, baseline", "agents = wizard")), ScenarioError);
  EXPECT_THROW(parse_scenario(replace("slip = 1/10", "slip = 3/2")), ScenarioError);
  EXPECT_THROW(parse_scenario(replace("#SLLLLLLG#", "#SLLLLLL##")), ScenarioError);
}

TEST(Scenario, Seeds) {
  EXPECT_EQ(parse_seeds("1..5"), (std::vector<std::uint64_t>{1, 2, 3, 4, 5}));
  EXPECT_EQ(parse_seeds("3, 1, 7"), (std::vector<std::uint64_t>{3, 1, 7}));
  EXPECT_EQ(parse_seeds("1..3, 9"), (std::vector<std::uint64_t>{1, 2, 3, 9}));
  EXPECT_THROW(parse_seeds("5..1"), ValidationError);
  EXPECT_THROW(parse_seeds("1, 1"), ValidationError);
  EXPECT_THROW(parse_seeds("x"), ValidationError);
  EXPECT_EQ(format_seeds({1, 2, 3, 4, 9, 10}), "1..4, 9, 10");
  EXPECT_EQ(parse_seeds(format_seeds({1, 2, 3, 4, 9, 10})), (std::vector<std::uint64_t>{1, 2, 3, 4, 9, 10}));
}

TEST(Scenario, Rules) {
  auto rules = parse_rules("RELV grain=10; EV; DISCOUNT threshold=1/100");
  ASSERT_EQ(rules.size(), 3u);
  EXPECT_EQ(format_rules(rules), "RELV grain=10; EV; DISCOUNT threshold=1/100");
  EXPECT_THROW(parse_rules("RELV"), ValidationError);
  EXPECT_THROW(parse_rules("EV grain=10"), ValidationError);
  EXPECT_THROW(parse_rules("DISCOUNT threshold=1"), ValidationError);
}

TEST(Scenario, DigestTracksCanonicalContent) {
  Scenario a = parse_scenario(kSmallProblem);
  Scenario b = parse_scenario("# a comment\n" + small_with("grain=1/10", "grain=0.1"));
  EXPECT_EQ(digest(a), digest(b));
  Scenario c = parse_scenario(small_with("value=-1", "value=-2"));
  EXPECT_NE(digest(a), digest(c));
  EXPECT_EQ(digest(a).size(), 64u);
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Scenario, BuildWorlds) {
  auto forced = build_worlds(load_scenario(scenario_path("forced_choice.scenario")));
  ASSERT_EQ(forced.size(), 7u);
  EXPECT_EQ(forced.front().variant, "m=1");
  EXPECT_EQ(forced.back().variant, "m=1000000");
  auto lava = build_worlds(load_scenario(scenario_path("lava.scenario")));
  ASSERT_EQ(lava.size(), 1u);
  EXPECT_EQ(lava[0].world.env.name(), "lava");
}
