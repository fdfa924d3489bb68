#include <gtest/gtest.h>

#include <cmath>

#include "dossim/error.hpp"
#include "dossim/scenario.hpp"
#include "support.hpp"

using namespace dossim;
using namespace dossim::testing;

namespace {

// Squash-tree enumeration: every instance of handle i replays the subtree
// below it r times before resolving, so the subtree runs r+1 times.
std::uint64_t enumerate_nested(std::uint32_t h, std::uint32_t r) {
  if (h == 0) return 1;
  std::uint64_t total = 0;
  for (std::uint32_t pass = 0; pass <= r; ++pass) total += enumerate_nested(h - 1, r);
  return total;
}

std::uint64_t s_issues_from_events(const Scenario& sc, PolicyKind policy) {
  MachineConfig c = machine(policy);
  c.record_events = true;
  c.livelock_budget = scenario_livelock_budget(sc, c);
  Pipeline p(sc.victim, c, miss_plan(sc));
  p.run();
  std::uint64_t n = 0;
  for (const auto& ev : p.events()) {
    if (ev.type == SimEvent::Type::Issue &&
        std::find(sc.side_channel_pcs.begin(), sc.side_channel_pcs.end(), ev.pc) != sc.side_channel_pcs.end()) {
      ++n;
    }
  }
  return n;
}

}  // namespace

TEST(Scenario, PatternNames) {
  for (Pattern p : {Pattern::Single, Pattern::Serial, Pattern::Nested}) EXPECT_EQ(parse_pattern(to_string(p)), p);
  EXPECT_FALSE(parse_pattern("diamond"));
}

TEST(Scenario, SingleShape) {
  const Scenario sc = build_single(5);
  ASSERT_EQ(sc.handle_slots.size(), 1u);
  const Instruction& h = sc.victim.instructions[sc.handle_slots[0]];
  EXPECT_EQ(h.shadow, ShadowKind::E);
  ASSERT_EQ(sc.side_channel_pcs.size(), 1u);
  // S is younger than the handle and within one ROB window of it
  std::size_t s_slot = 0;
  for (std::size_t i = 0; i < sc.victim.size(); ++i) {
    if (sc.victim.instructions[i].kind == InstrKind::SideChannelTransmit) s_slot = i;
  }
  EXPECT_GT(s_slot, sc.handle_slots[0]);
  EXPECT_LT(s_slot - sc.handle_slots[0], MachineConfig{}.rob_size);
  EXPECT_EQ(miss_plan(sc).at(sc.handle_slots[0]), 5u);
}

TEST(Scenario, SingleCounts) {
  EXPECT_EQ(run_scenario(build_single(5), machine(PolicyKind::Baseline)).total_s_issues, 6u);
  EXPECT_LE(run_scenario(build_single(5), machine(PolicyKind::DosBloom)).total_s_issues, 2u);
  for (PolicyKind p : kPolicies) {
    const AttackReport r = run_scenario(build_single(0), machine(p));
    EXPECT_EQ(r.total_s_issues, 1u) << to_string(p);
    EXPECT_EQ(r.squashes, 0u);
  }
}

TEST(Scenario, SerialOfOneIsSingle) {
  for (std::uint32_t r : {1u, 3u, 7u}) {
    const Scenario a = build_serial(1, r);
    const Scenario b = build_single(r);
    EXPECT_EQ(a.victim.instructions, b.victim.instructions);
    EXPECT_EQ(a.attacker_script, b.attacker_script);
    EXPECT_EQ(a.side_channel_pcs, b.side_channel_pcs);
  }
}

TEST(Scenario, BaselineAmplificationMatchesEnumeration) {
  for (std::uint32_t h = 1; h <= 4; ++h) {
    for (std::uint32_t r = 1; r <= 3; ++r) {
      const Scenario nested = build_nested(h, r);
      EXPECT_EQ(s_issues_from_events(nested, PolicyKind::Baseline), enumerate_nested(h, r)) << h << "," << r;
      const Scenario serial = build_serial(h, r);
      EXPECT_EQ(s_issues_from_events(serial, PolicyKind::Baseline), std::uint64_t{h} * (r + 1)) << h << "," << r;
    }
  }
  EXPECT_EQ(enumerate_nested(2, 2), 9u);
}

TEST(Scenario, ReportMatchesEventLog) {
  for (PolicyKind p : kPolicies) {
    const Scenario sc = build_nested(3, 2);
    EXPECT_EQ(run_scenario(sc, machine(p)).total_s_issues, s_issues_from_events(sc, p)) << to_string(p);
  }
}

TEST(Scenario, DelayAllNeverIssuesSpeculatively) {
  for (const Scenario& sc : {build_single(4), build_serial(3, 2), build_nested(3, 2)}) {
    const AttackReport r = run_scenario(sc, machine(PolicyKind::DelayAll));
    for (const auto& [pc, n] : r.spec_executions_of_S) EXPECT_EQ(n, 1u);
  }
}

TEST(Scenario, NestedLatencyRule) {
  ScenarioParams p;
  p.latencies = {16, 8};
  EXPECT_NO_THROW(build_nested(2, 1, p));
  p.latencies = {15, 8};
  EXPECT_THROW(build_nested(2, 1, p), ConfigError);
  p.latencies = {8};
  EXPECT_THROW(build_nested(2, 1, p), ConfigError);
  const Scenario sc = build_nested(3, 2);
  EXPECT_EQ(sc.victim.instructions[sc.handle_slots[0]].resolve_latency, 72u);
  EXPECT_EQ(sc.victim.instructions[sc.handle_slots[2]].resolve_latency, 8u);
  EXPECT_EQ(sc.victim.instructions[sc.handle_slots[1]].shadow, ShadowKind::C);
}

TEST(Scenario, PreconditionsAreChecked) {
  EXPECT_THROW(build_serial(0, 1), ConfigError);
  EXPECT_THROW(build_serial(2, 0), ConfigError);
  EXPECT_THROW(build_nested(0, 1), ConfigError);
  EXPECT_THROW(build_nested(1, 0), ConfigError);
}

TEST(Scenario, LargeReplayCountStaysExact) {
  const Scenario sc = build_single(1000);
  EXPECT_EQ(run_scenario(sc, machine(PolicyKind::Baseline)).total_s_issues, 1001u);
  EXPECT_LE(run_scenario(sc, machine(PolicyKind::DosPerfect)).total_s_issues, 2u);
}

TEST(Scenario, UnboundedReplayIsReported) {
  ScenarioParams p;
  p.unbounded = true;
  const AttackReport r = run_scenario(build_single(1, p), machine(PolicyKind::Baseline));
  EXPECT_TRUE(r.sustained_replay);
  EXPECT_NE(r.diagnostic.find("livelock"), std::string::npos);
  EXPECT_LT(r.committed, r.trace_length);
}

TEST(Scenario, ContextSwitchesDoNotChangeTheOutcome) {
  ScenarioParams p;
  p.context_switches = {3, 10, 40, 41, 200};
  for (PolicyKind policy : kPolicies) {
    const AttackReport plain_run = run_scenario(build_nested(3, 2), machine(policy));
    const AttackReport switched = run_scenario(build_nested(3, 2, p), machine(policy));
    EXPECT_EQ(switched.metrics, plain_run.metrics) << to_string(policy);
  }
}

TEST(ScenarioFile, Parse) {
  const ScenarioParams p = parse_scenario(
      "# nested demo\npattern = nested\nhandles = 3\nreplays=2\ngap = 6\n"
      "latencies = 72, 24,8\nregion = 200\nunbounded = false\ncontext_switch = 10,20\n");
  EXPECT_EQ(p.pattern, Pattern::Nested);
  EXPECT_EQ(p.handles, 3u);
  EXPECT_EQ(p.replays, 2u);
  EXPECT_EQ(p.gap, 6u);
  EXPECT_EQ(p.latencies, (std::vector<std::uint32_t>{72, 24, 8}));
  EXPECT_EQ(p.region_len, 200u);
  EXPECT_EQ(p.context_switches, (std::vector<Cycle>{10, 20}));
  EXPECT_EQ(build_scenario(p).victim.size(), 200u);
}

TEST(ScenarioFile, Errors) {
  try {
    parse_scenario("pattern = single\nreplays = many\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_EQ(e.field(), "replays");
  }
  EXPECT_THROW(parse_scenario("colour = blue\n"), ParseError);
  EXPECT_THROW(parse_scenario("pattern = diamond\n"), ParseError);
  EXPECT_THROW(parse_scenario("handles 3\n"), ParseError);
}
