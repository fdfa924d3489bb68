#include "dossim/scenario.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "dossim/error.hpp"

namespace dossim {

namespace {

constexpr std::array<std::string_view, 3> kPatternNames{"single", "serial", "nested"};
constexpr Pc kAttackBasePc = 0x10000;
constexpr Pc kRegionStride = 0x1000;
constexpr std::uint32_t kDefaultFaultLatency = 16;
constexpr std::uint32_t kDefaultInnerLatency = 8;

Instruction plain(Pc pc) {
  Instruction in;
  in.pc = pc;
  return in;
}

void push(Trace& t, Instruction in) {
  in.seq = t.instructions.size();
  t.instructions.push_back(in);
}

void script_handle(Scenario& sc, std::size_t slot) {
  const std::uint32_t times = sc.params.unbounded ? kUnboundedMisses : sc.params.replays;
  using T = AttackerAction::Type;
  sc.attacker_script.push_back({T::AcquireHandle, slot, 0, 0});
  sc.attacker_script.push_back({T::ForceMisspeculate, slot, times, 0});
  sc.attacker_script.push_back({T::ReleaseHandle, slot, 0, 0});
}

void script_switches(Scenario& sc) {
  for (Cycle c : sc.params.context_switches) {
    sc.attacker_script.push_back({AttackerAction::Type::ContextSwitch, 0, 0, c});
  }
}

// [H(E), gap, S, filler] padded to region_len.
void append_fault_region(Scenario& sc, Pc base, std::uint32_t latency) {
  Trace& t = sc.victim;
  const std::size_t start = t.size();
  Instruction h;
  h.pc = base;
  h.kind = InstrKind::Load;
  h.shadow = ShadowKind::E;
  h.resolve_latency = latency;
  sc.handle_slots.push_back(t.size());
  push(t, h);
  Pc pc = base + 4;
  for (std::uint32_t i = 0; i < sc.params.gap; ++i, pc += 4) push(t, plain(pc));
  Instruction s = plain(pc);
  s.kind = InstrKind::SideChannelTransmit;
  sc.side_channel_pcs.push_back(pc);
  push(t, s);
  pc += 4;
  while (t.size() - start < sc.params.region_len) {
    push(t, plain(pc));
    pc += 4;
  }
}

void check_common(const ScenarioParams& p) {
  if (p.region_len < p.gap + 2u + (p.pattern == Pattern::Nested ? p.handles - 1 : 0)) {
    throw ConfigError("region_len too small for the attack region");
  }
  if (p.region_len * 4 > kRegionStride) throw ConfigError("region_len must be <= 1024");
}

std::uint32_t fault_latency(const ScenarioParams& p, std::size_t i) {
  if (p.latencies.empty()) return kDefaultFaultLatency;
  if (p.latencies.size() != p.handles) {
    throw ConfigError("latencies: expected " + std::to_string(p.handles) + " values");
  }
  if (p.latencies[i] < 1) throw ConfigError("latencies must be >= 1");
  return p.latencies[i];
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view v, std::size_t line, const std::string& key) {
  T out{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) {
    throw ParseError(line, key, "expected a non-negative integer, got '" + std::string(v) + "'");
  }
  return out;
}

template <typename T>
std::vector<T> parse_list(std::string_view v, std::size_t line, const std::string& key) {
  std::vector<T> out;
  while (!v.empty()) {
    const auto comma = v.find(',');
    out.push_back(parse_number<T>(trim(v.substr(0, comma)), line, key));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  return out;
}

}  // namespace

std::string_view to_string(Pattern pattern) noexcept {
  return kPatternNames[static_cast<std::size_t>(pattern)];
}

std::optional<Pattern> parse_pattern(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kPatternNames.size(); ++i) {
    if (name == kPatternNames[i]) return static_cast<Pattern>(i);
  }
  return std::nullopt;
}

Scenario build_single(std::uint32_t replays, ScenarioParams params) {
  params.pattern = Pattern::Single;
  params.handles = 1;
  params.replays = replays;
  check_common(params);
  Scenario sc;
  sc.params = params;
  sc.victim.name = "single";
  append_fault_region(sc, kAttackBasePc, fault_latency(params, 0));
  if (replays > 0 || params.unbounded) script_handle(sc, sc.handle_slots[0]);
  script_switches(sc);
  return sc;
}

Scenario build_serial(std::uint32_t handles, std::uint32_t replays, ScenarioParams params) {
  if (handles < 1) throw ConfigError("serial: handles must be >= 1");
  if (replays < 1) throw ConfigError("serial: replays must be >= 1");
  params.pattern = Pattern::Serial;
  params.handles = handles;
  params.replays = replays;
  check_common(params);
  Scenario sc;
  sc.params = params;
  sc.victim.name = "serial";
  for (std::uint32_t i = 0; i < handles; ++i) {
    append_fault_region(sc, kAttackBasePc + i * kRegionStride, fault_latency(params, i));
    script_handle(sc, sc.handle_slots.back());
  }
  script_switches(sc);
  return sc;
}

Scenario build_nested(std::uint32_t handles, std::uint32_t replays, ScenarioParams params) {
  if (handles < 1) throw ConfigError("nested: handles must be >= 1");
  if (replays < 1) throw ConfigError("nested: replays must be >= 1");
  params.pattern = Pattern::Nested;
  params.handles = handles;
  params.replays = replays;
  check_common(params);

  std::vector<std::uint64_t> lat(handles);
  if (params.latencies.empty()) {
    lat[handles - 1] = kDefaultInnerLatency;
    for (std::size_t i = handles - 1; i-- > 0;) lat[i] = lat[i + 1] * (replays + 1ull);
    if (lat[0] > UINT32_MAX) throw ConfigError("nested: default latencies overflow");
  } else {
    if (params.latencies.size() != handles) {
      throw ConfigError("latencies: expected " + std::to_string(handles) + " values");
    }
    std::copy(params.latencies.begin(), params.latencies.end(), lat.begin());
  }
  for (std::size_t i = 0; i < handles; ++i) {
    if (lat[i] < 1) throw ConfigError("latencies must be >= 1");
    if (i + 1 < handles && lat[i] < (replays + 1ull) * lat[i + 1]) {
      throw ConfigError("nested: handle " + std::to_string(i + 1) + " latency " +
                        std::to_string(lat[i]) + " must be >= (r+1) x inner latency " +
                        std::to_string(lat[i + 1]) + " so outer handles resolve slower");
    }
  }

  Scenario sc;
  sc.params = params;
  sc.victim.name = "nested";
  Trace& t = sc.victim;
  Pc pc = kAttackBasePc;
  for (std::uint32_t i = 0; i < handles; ++i, pc += 4) {
    Instruction h;
    h.pc = pc;
    h.kind = InstrKind::Branch;
    h.shadow = ShadowKind::C;
    h.resolve_latency = static_cast<std::uint32_t>(lat[i]);
    sc.handle_slots.push_back(t.size());
    push(t, h);
    script_handle(sc, sc.handle_slots.back());
  }
  for (std::uint32_t i = 0; i < params.gap; ++i, pc += 4) push(t, plain(pc));
  Instruction s = plain(pc);
  s.kind = InstrKind::SideChannelTransmit;
  sc.side_channel_pcs.push_back(pc);
  push(t, s);
  for (pc += 4; t.size() < params.region_len; pc += 4) push(t, plain(pc));
  script_switches(sc);
  return sc;
}

Scenario build_scenario(const ScenarioParams& params) {
  switch (params.pattern) {
    case Pattern::Single:
      return build_single(params.replays, params);
    case Pattern::Serial:
      return build_serial(params.handles, params.replays, params);
    case Pattern::Nested:
      return build_nested(params.handles, params.replays, params);
  }
  throw ConfigError("unknown pattern");
}

ScenarioParams parse_scenario(std::string_view text) {
  ScenarioParams p;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, "line", "expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    if (key == "pattern") {
      const auto pat = parse_pattern(value);
      if (!pat) throw ParseError(line_no, key, "expected single, serial or nested");
      p.pattern = *pat;
    } else if (key == "handles") {
      p.handles = parse_number<std::uint32_t>(value, line_no, key);
    } else if (key == "replays") {
      p.replays = parse_number<std::uint32_t>(value, line_no, key);
    } else if (key == "gap") {
      p.gap = parse_number<std::uint32_t>(value, line_no, key);
    } else if (key == "latencies") {
      p.latencies = parse_list<std::uint32_t>(value, line_no, key);
    } else if (key == "region") {
      p.region_len = parse_number<std::size_t>(value, line_no, key);
    } else if (key == "unbounded") {
      if (value != "true" && value != "false") throw ParseError(line_no, key, "expected true or false");
      p.unbounded = value == "true";
    } else if (key == "context_switch") {
      p.context_switches = parse_list<Cycle>(value, line_no, key);
    } else {
      throw ParseError(line_no, key, "unknown key");
    }
  }
  return p;
}

ScenarioParams load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

MissPlan miss_plan(const Scenario& scenario) {
  MissPlan plan;
  for (const auto& a : scenario.attacker_script) {
    switch (a.type) {
      case AttackerAction::Type::AcquireHandle:
        plan.try_emplace(a.slot, 0);
        break;
      case AttackerAction::Type::ForceMisspeculate: {
        auto& n = plan[a.slot];
        n = (a.times == kUnboundedMisses || n == kUnboundedMisses) ? kUnboundedMisses : n + a.times;
        break;
      }
      case AttackerAction::Type::ReleaseHandle:
      case AttackerAction::Type::ContextSwitch:
        break;
    }
  }
  return plan;
}

std::uint64_t scenario_livelock_budget(const Scenario& scenario, const MachineConfig& config) {
  std::uint64_t budget = config.effective_livelock_budget();
  if (scenario.params.unbounded) return budget;
  const MissPlan plan = miss_plan(scenario);
  for (std::size_t slot : scenario.handle_slots) {
    const auto it = plan.find(slot);
    const std::uint64_t times = it == plan.end() ? 0 : it->second;
    const std::uint64_t lat = scenario.victim.instructions[slot].resolve_latency;
    budget += (times + 1) * (lat + config.rob_size + 8);
  }
  return budget;
}

AttackReport run_scenario(const Scenario& scenario, MachineConfig config) {
  if (!config.livelock_budget) config.livelock_budget = scenario_livelock_budget(scenario, config);
  std::vector<Cycle> switches;
  for (const auto& a : scenario.attacker_script) {
    if (a.type == AttackerAction::Type::ContextSwitch) switches.push_back(a.at_cycle);
  }
  std::sort(switches.begin(), switches.end());

  AttackReport rep;
  rep.pattern = scenario.params.pattern;
  rep.policy = config.policy;
  rep.trace_length = scenario.victim.size();

  Pipeline pipe(scenario.victim, config, miss_plan(scenario));
  std::size_t next_switch = 0;
  try {
    while (pipe.step()) {
      while (next_switch < switches.size() && pipe.cycle() >= switches[next_switch]) {
        const ContextBlob blob = pipe.save_context();
        pipe.evict_context();
        pipe.restore_context(blob);
        ++next_switch;
      }
    }
  } catch (const LivelockError& e) {
    rep.sustained_replay = true;
    rep.diagnostic = e.what();
  }

  rep.metrics = pipe.metrics();
  rep.metrics.cycles = pipe.cycle();
  rep.cycles = rep.metrics.cycles;
  rep.squashes = rep.metrics.squashes;
  rep.committed = rep.metrics.committed;
  for (Pc pc : scenario.side_channel_pcs) {
    const auto it = rep.metrics.per_pc_spec_issues.find(pc);
    const std::uint64_t n = it == rep.metrics.per_pc_spec_issues.end() ? 0 : it->second;
    rep.spec_executions_of_S[pc] = n;
    rep.total_s_issues += n;
  }
  if (config.record_events) {
    rep.bound_violations = count_bound_violations(pipe.events(), scenario.side_channel_pcs);
  }
  return rep;
}

std::uint64_t count_bound_violations(const std::vector<SimEvent>& events,
                                     const std::vector<Pc>& side_channel_pcs) {
  const std::set<Pc> s_pcs(side_channel_pcs.begin(), side_channel_pcs.end());
  std::unordered_map<Seq, Pc> issued_pc;
  std::set<Seq> unsafe;  // handles still in the queue
  struct Guard {
    Pc pc;
    std::set<Seq> handles;
  };
  std::vector<Guard> guards;
  std::uint64_t violations = 0;

  for (const auto& ev : events) {
    switch (ev.type) {
      case SimEvent::Type::Dispatch:
        break;
      case SimEvent::Type::Issue:
        issued_pc[ev.seq] = ev.pc;
        if (s_pcs.contains(ev.pc)) {
          for (const auto& g : guards) {
            if (g.pc == ev.pc &&
                std::any_of(g.handles.begin(), g.handles.end(),
                            [&](Seq h) { return unsafe.contains(h); })) {
              ++violations;
              break;
            }
          }
        }
        break;
      case SimEvent::Type::Squash: {
        std::set<Seq> present(ev.handles_in_flight.begin(), ev.handles_in_flight.end());
        for (Seq s : ev.squashed_issued) {
          const auto it = issued_pc.find(s);
          if (it != issued_pc.end() && s_pcs.contains(it->second)) {
            guards.push_back({it->second, present});
          }
        }
        for (Seq h : present) unsafe.insert(h);
        break;
      }
      case SimEvent::Type::HandleSafe:
        unsafe.erase(ev.seq);
        break;
      default:
        break;
    }
    std::erase_if(guards, [&](const Guard& g) {
      return std::none_of(g.handles.begin(), g.handles.end(),
                          [&](Seq h) { return unsafe.contains(h); });
    });
  }
  return violations;
}

}  // namespace dossim
