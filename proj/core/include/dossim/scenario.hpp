#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dossim/metrics.hpp"
#include "dossim/pipeline.hpp"
#include "dossim/trace.hpp"

namespace dossim {

enum class Pattern : std::uint8_t { Single, Serial, Nested };

std::string_view to_string(Pattern pattern) noexcept;  // single, serial, nested
std::optional<Pattern> parse_pattern(std::string_view name) noexcept;

struct AttackerAction {
  enum class Type : std::uint8_t { AcquireHandle, ReleaseHandle, ForceMisspeculate, ContextSwitch };

  Type type = Type::AcquireHandle;
  std::size_t slot = 0;     // trace slot of the handle
  std::uint32_t times = 0;  // ForceMisspeculate; kUnboundedMisses never releases
  Cycle at_cycle = 0;       // ContextSwitch

  friend bool operator==(const AttackerAction&, const AttackerAction&) = default;
};

struct ScenarioParams {
  Pattern pattern = Pattern::Single;
  std::uint32_t handles = 1;
  std::uint32_t replays = 1;
  std::uint32_t gap = 4;  // instructions between the last handle and S
  // Resolve latency per handle, outermost first. Empty: 16 for the E handles
  // of single/serial; nested uses 8 innermost and (r+1)x outward.
  std::vector<std::uint32_t> latencies;
  std::size_t region_len = 128;  // instructions per attack region (>= ROB size)
  bool unbounded = false;        // handles never stop misspeculating
  std::vector<Cycle> context_switches;

  friend bool operator==(const ScenarioParams&, const ScenarioParams&) = default;
};

struct Scenario {
  Trace victim;
  std::vector<AttackerAction> attacker_script;
  ScenarioParams params;
  std::vector<std::size_t> handle_slots;
  std::vector<Pc> side_channel_pcs;
};

// r == 0 is allowed and yields a scenario without any squash.
Scenario build_single(std::uint32_t replays, ScenarioParams params = {});
Scenario build_serial(std::uint32_t handles, std::uint32_t replays, ScenarioParams params = {});
// Throws ConfigError unless every outer latency is >= (r+1) x the next inner one.
Scenario build_nested(std::uint32_t handles, std::uint32_t replays, ScenarioParams params = {});
Scenario build_scenario(const ScenarioParams& params);

// `key = value` lines (pattern, handles, replays, gap, latencies, region,
// unbounded, context_switch); `#` starts a comment.
ScenarioParams parse_scenario(std::string_view text);
ScenarioParams load_scenario_file(const std::string& path);

struct AttackReport {
  Pattern pattern = Pattern::Single;
  PolicyKind policy = PolicyKind::Baseline;
  std::map<Pc, std::uint64_t> spec_executions_of_S;  // issue events per S PC
  std::uint64_t total_s_issues = 0;
  std::uint64_t squashes = 0;
  Cycle cycles = 0;
  std::uint64_t committed = 0;
  std::uint64_t trace_length = 0;
  bool sustained_replay = false;  // livelock budget ran out
  std::string diagnostic;
  // Only with config.record_events: S issues observed after a squash of S
  // while a handle present at that squash was still unsafe.
  std::optional<std::uint64_t> bound_violations;
  Metrics metrics;
};

MissPlan miss_plan(const Scenario& scenario);
// Cycles without a commit the finite script can legitimately cause.
std::uint64_t scenario_livelock_budget(const Scenario& scenario, const MachineConfig& config);

// Deterministic. The livelock budget is derived from the script unless the
// config pins one; unbounded scripts end with sustained_replay set.
AttackReport run_scenario(const Scenario& scenario, MachineConfig config);

std::uint64_t count_bound_violations(const std::vector<SimEvent>& events,
                                     const std::vector<Pc>& side_channel_pcs);

}  // namespace dossim
