#include "dossim_cli/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <future>
#include <map>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "dossim/error.hpp"
#include "dossim/golden.hpp"

namespace dossim::cli {

namespace {

using json = nlohmann::ordered_json;

constexpr PolicyKind kAllPolicies[] = {PolicyKind::Baseline, PolicyKind::DelayAll,
                                       PolicyKind::DosPerfect, PolicyKind::DosBloom};

std::string hex(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

PolicyKind policy_or_throw(const std::string& name) {
  const auto p = parse_policy(name);
  if (!p) throw ConfigError("unknown policy '" + name + "' (baseline, delay-all, dos-perfect, dos-bloom)");
  return *p;
}

Format format_or_throw(const std::string& name) {
  const auto f = parse_format(name);
  if (!f) throw ConfigError("unknown format '" + name + "' (table, csv, json-lines)");
  return *f;
}

// Settings that may come from --config and from flags; flags win.
struct Settings {
  std::optional<PolicyKind> policy;
  RunConfig run;
};

void apply_json(Settings& s, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path + "': " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config file '" + path + "' must hold a JSON object");
  MachineConfig& m = s.run.machine;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "policy") s.policy = policy_or_throw(v.get<std::string>());
      else if (key == "bits") m.filters.bits = v.get<std::uint32_t>();
      else if (key == "hashes") m.filters.hashes = v.get<std::uint32_t>();
      else if (key == "filters") m.filters.count = v.get<std::uint32_t>();
      else if (key == "threshold") m.filters.threshold = v.get<std::uint32_t>();
      else if (key == "rob") m.rob_size = v.get<std::size_t>();
      else if (key == "width") m.width = v.get<std::size_t>();
      else if (key == "window") m.window_len = v.get<std::uint64_t>();
      else if (key == "recovery") m.recovery_latency = v.get<std::uint32_t>();
      else if (key == "seed") s.run.seed = v.get<std::uint64_t>();
      else if (key == "oracle") m.fp_oracle = v.get<bool>();
      else if (key == "format") s.run.format = format_or_throw(v.get<std::string>());
      else throw ConfigError("config file '" + path + "': unknown key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path + "': " + e.what());
  }
}

struct CommonFlags {
  std::string config;
  std::string policy;
  std::string format;
  std::uint32_t bits = 0, hashes = 0, filters = 0, threshold = 0, recovery = 0;
  std::size_t rob = 0, width = 0;
  std::uint64_t seed = 0, window = 0;
  bool oracle = false;
  std::map<std::string, CLI::Option*> opt;

  void add(CLI::App* app, bool with_policy) {
    app->add_option("--config", config, "JSON config file (flags override it)")->check(CLI::ExistingFile);
    if (with_policy) opt["policy"] = app->add_option("--policy", policy, "baseline|delay-all|dos-perfect|dos-bloom");
    opt["format"] = app->add_option("--format", format, "table|csv|json-lines");
    opt["bits"] = app->add_option("--bits", bits, "Bloom filter size m (power of two)");
    opt["hashes"] = app->add_option("--hashes", hashes, "hash functions k");
    opt["filters"] = app->add_option("--filters", filters, "rolling filters");
    opt["threshold"] = app->add_option("--threshold", threshold, "rotation threshold in set bits (0: m/2)");
    opt["rob"] = app->add_option("--rob", rob, "ROB entries");
    opt["width"] = app->add_option("--width", width, "issue/commit width");
    opt["window"] = app->add_option("--window", window, "clear deferral in retired instructions (0: ROB size)");
    opt["recovery"] = app->add_option("--recovery", recovery, "extra front-end cycles after a squash");
    opt["seed"] = app->add_option("--seed", seed, "hash salt and workload seed");
    opt["oracle"] = app->add_flag("--oracle", oracle, "run the perfect filter in lockstep to count false positives");
  }

  bool given(const std::string& name) const {
    const auto it = opt.find(name);
    return it != opt.end() && it->second->count() > 0;
  }

  Settings resolve() const {
    Settings s;
    if (!config.empty()) apply_json(s, config);
    MachineConfig& m = s.run.machine;
    if (given("policy")) s.policy = policy_or_throw(policy);
    if (given("format")) s.run.format = format_or_throw(format);
    if (given("bits")) m.filters.bits = bits;
    if (given("hashes")) m.filters.hashes = hashes;
    if (given("filters")) m.filters.count = filters;
    if (given("threshold")) m.filters.threshold = threshold;
    if (given("rob")) m.rob_size = rob;
    if (given("width")) m.width = width;
    if (given("window")) m.window_len = window;
    if (given("recovery")) m.recovery_latency = recovery;
    if (given("seed")) s.run.seed = seed;
    if (given("oracle")) m.fp_oracle = oracle;
    m.filters.salt = s.run.seed;
    if (s.policy) m.policy = *s.policy;
    m.validate();
    return s;
  }
};

struct WorkloadFlags {
  std::string trace;
  std::size_t body = 128;
  std::size_t iterations = 125;
  double squash_rate = 0.05;

  void add(CLI::App* app) {
    app->add_option("--trace", trace, "trace file (default: generated loop workload)")->check(CLI::ExistingFile);
    app->add_option("--body", body, "generated loop body length")->capture_default_str();
    app->add_option("--iterations", iterations, "generated loop iterations")->capture_default_str();
    app->add_option("--squash-rate", squash_rate, "per-shadow misspeculation probability")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
  }

  Trace load(std::uint64_t seed) const {
    if (!trace.empty()) return load_trace_file(trace);
    return gen_loop_trace(body, iterations, squash_rate, seed);
  }
};

bool fp_measured(const MachineConfig& m) {
  return m.policy != PolicyKind::DosBloom || m.fp_oracle;
}

std::string csv_field(const std::string& v) {
  if (v.find_first_of(",\"\n") == std::string::npos) return v;
  std::string out = "\"";
  for (char c : v) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

json json_value(const std::string& v) {
  if (v == "-") return nullptr;
  if (v == "true") return true;
  if (v == "false") return false;
  std::uint64_t u = 0;
  if (auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), u); ec == std::errc{} && p == v.data() + v.size()) {
    return u;
  }
  double d = 0;
  if (auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), d); ec == std::errc{} && p == v.data() + v.size()) {
    return d;
  }
  return v;
}

int cmd_simulate(const CommonFlags& flags, const WorkloadFlags& wl, bool golden, std::ostream& out) {
  if (golden) {
    const GoldenResult r = run_golden();
    out << render_golden(r);
    return r.passed() ? kExitOk : 1;
  }
  const Settings s = flags.resolve();
  const Trace trace = wl.load(s.run.seed);
  const Metrics m = Pipeline(trace, s.run.machine).run();
  write_rows(out, {metrics_row(m, fp_measured(s.run.machine))}, s.run.format);
  return kExitOk;
}

struct AttackFlags {
  std::string scenario;
  std::string pattern = "single";
  std::uint32_t handles = 1, replays = 1, gap = 4;
  std::vector<std::uint32_t> latencies;
  bool unbounded = false;
  std::map<std::string, CLI::Option*> opt;

  void add(CLI::App* app) {
    app->add_option("--scenario", scenario, "scenario file (flags override it)")->check(CLI::ExistingFile);
    opt["pattern"] = app->add_option("--pattern", pattern, "single|serial|nested");
    opt["handles"] = app->add_option("--handles", handles, "handle count h");
    opt["replays"] = app->add_option("--replays", replays, "replays per handle r");
    opt["gap"] = app->add_option("--gap", gap, "instructions between handles and S");
    opt["latencies"] = app->add_option("--latencies", latencies, "resolve latency per handle, outermost first")
                           ->delimiter(',');
    opt["unbounded"] = app->add_flag("--unbounded", unbounded, "handles never stop misspeculating");
  }

  ScenarioParams resolve() const {
    ScenarioParams p = scenario.empty() ? ScenarioParams{} : load_scenario_file(scenario);
    auto given = [&](const char* n) { return opt.at(n)->count() > 0; };
    if (given("pattern")) {
      const auto pat = parse_pattern(pattern);
      if (!pat) throw ConfigError("unknown pattern '" + pattern + "' (single, serial, nested)");
      p.pattern = *pat;
    }
    if (given("handles")) p.handles = handles;
    if (given("replays")) p.replays = replays;
    if (given("gap")) p.gap = gap;
    if (given("latencies")) p.latencies = latencies;
    if (given("unbounded")) p.unbounded = unbounded;
    return p;
  }
};

int cmd_attack(const CommonFlags& flags, const AttackFlags& af, std::ostream& out, std::ostream& err) {
  const Settings s = flags.resolve();
  const ScenarioParams params = af.resolve();
  const Scenario sc = build_scenario(params);
  std::vector<PolicyKind> policies;
  if (s.policy) policies.push_back(*s.policy);
  else policies.assign(std::begin(kAllPolicies), std::end(kAllPolicies));

  std::vector<Row> rows;
  bool livelock = false;
  for (PolicyKind p : policies) {
    MachineConfig m = s.run.machine;
    m.policy = p;
    const AttackReport rep = run_scenario(sc, m);
    if (rep.sustained_replay) {
      livelock = true;
      err << "sustained replay detected under " << to_string(p) << ": " << rep.diagnostic << "\n";
    }
    rows.push_back(attack_row(sc.params, rep));
  }
  write_rows(out, rows, s.run.format);
  return livelock ? kExitLivelock : kExitOk;
}

struct SweepFlags {
  std::vector<std::string> policies;
  std::vector<std::uint32_t> bits, hashes, filters, thresholds;
  std::vector<std::size_t> robs, widths;
  std::vector<std::uint64_t> seeds;
  unsigned jobs = 1;
  std::map<std::string, CLI::Option*> opt;

  // Shares --config/--format/--oracle/--window/--recovery with CommonFlags;
  // the swept axes take comma lists.
  void add(CLI::App* app, CommonFlags& common) {
    app->add_option("--config", common.config, "JSON config file (flags override it)")->check(CLI::ExistingFile);
    common.opt["format"] = app->add_option("--format", common.format, "table|csv|json-lines (default csv)");
    common.opt["oracle"] = app->add_flag("--oracle", common.oracle, "count false positives");
    common.opt["window"] = app->add_option("--window", common.window, "clear deferral (0: ROB size)");
    common.opt["recovery"] = app->add_option("--recovery", common.recovery, "extra cycles after a squash");
    opt["policy"] = app->add_option("--policy", policies, "policies")->delimiter(',');
    opt["bits"] = app->add_option("--bits", bits, "filter sizes")->delimiter(',');
    opt["hashes"] = app->add_option("--hashes", hashes, "hash counts")->delimiter(',');
    opt["filters"] = app->add_option("--filters", filters, "filter counts")->delimiter(',');
    opt["threshold"] = app->add_option("--threshold", thresholds, "rotation thresholds")->delimiter(',');
    opt["rob"] = app->add_option("--rob", robs, "ROB sizes")->delimiter(',');
    opt["width"] = app->add_option("--width", widths, "widths")->delimiter(',');
    opt["seed"] = app->add_option("--seed", seeds, "seeds")->delimiter(',');
    app->add_option("--jobs", jobs, "parallel workers")->check(CLI::PositiveNumber);
  }
};

struct SweepPoint {
  RunConfig run;
};

template <typename T, typename U>
std::vector<T> axis(const SweepFlags& sf, const char* name, const std::vector<U>& values, T base) {
  if (sf.opt.at(name)->count() == 0) return {base};
  if (values.empty()) throw ConfigError(std::string("--") + name + ": empty range");
  return std::vector<T>(values.begin(), values.end());
}

int cmd_sweep(const CommonFlags& flags, const SweepFlags& sf, const WorkloadFlags& wl, std::ostream& out) {
  Settings base = flags.resolve();
  if (!flags.given("format") && flags.config.empty()) base.run.format = Format::Csv;
  const MachineConfig& bm = base.run.machine;

  std::vector<PolicyKind> policies;
  if (sf.opt.at("policy")->count()) {
    if (sf.policies.empty()) throw ConfigError("--policy: empty range");
    for (const auto& p : sf.policies) policies.push_back(policy_or_throw(p));
  } else {
    policies.push_back(bm.policy);
  }
  const auto bits = axis(sf, "bits", sf.bits, bm.filters.bits);
  const auto hashes = axis(sf, "hashes", sf.hashes, bm.filters.hashes);
  const auto filters = axis(sf, "filters", sf.filters, bm.filters.count);
  const auto thresholds = axis(sf, "threshold", sf.thresholds, bm.filters.threshold);
  const auto robs = axis(sf, "rob", sf.robs, bm.rob_size);
  const auto widths = axis(sf, "width", sf.widths, bm.width);
  const auto seeds = axis(sf, "seed", sf.seeds, base.run.seed);

  std::vector<RunConfig> points;
  for (auto seed : seeds)
    for (auto p : policies)
      for (auto b : bits)
        for (auto h : hashes)
          for (auto f : filters)
            for (auto t : thresholds)
              for (auto r : robs)
                for (auto w : widths) {
                  RunConfig rc = base.run;
                  rc.seed = seed;
                  rc.machine.policy = p;
                  rc.machine.filters.bits = b;
                  rc.machine.filters.hashes = h;
                  rc.machine.filters.count = f;
                  rc.machine.filters.threshold = t;
                  rc.machine.filters.salt = seed;
                  rc.machine.rob_size = r;
                  rc.machine.width = w;
                  rc.machine.validate();
                  points.push_back(rc);
                }

  // Traces depend only on the seed; build each once.
  std::map<std::uint64_t, Trace> traces;
  for (auto seed : seeds) traces.emplace(seed, wl.load(seed));

  std::vector<Metrics> results(points.size());
  const std::size_t jobs = std::max(1u, sf.jobs);
  for (std::size_t start = 0; start < points.size(); start += jobs) {
    std::vector<std::future<Metrics>> batch;
    for (std::size_t i = start; i < std::min(points.size(), start + jobs); ++i) {
      batch.push_back(std::async(std::launch::async, [&, i] {
        return Pipeline(traces.at(points[i].seed), points[i].machine).run();
      }));
    }
    for (std::size_t k = 0; k < batch.size(); ++k) results[start + k] = batch[k].get();
  }

  std::vector<Row> rows;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const MachineConfig& m = points[i].machine;
    Row row{{"point", std::to_string(i)},
            {"seed", std::to_string(points[i].seed)},
            {"bits", std::to_string(m.filters.bits)},
            {"hashes", std::to_string(m.filters.hashes)},
            {"filters", std::to_string(m.filters.count)},
            {"threshold", std::to_string(m.filters.saturation_threshold())},
            {"rob", std::to_string(m.rob_size)},
            {"width", std::to_string(m.width)}};
    for (auto& kv : metrics_row(results[i], fp_measured(m))) row.push_back(std::move(kv));
    rows.push_back(std::move(row));
  }
  write_rows(out, rows, base.run.format);
  return kExitOk;
}

struct GenFlags {
  std::size_t body = 128, iterations = 125;
  double squash_rate = 0.05;
  std::uint64_t seed = 1;
  std::string out;
};

}  // namespace

std::optional<Format> parse_format(const std::string& name) {
  if (name == "table") return Format::Table;
  if (name == "csv") return Format::Csv;
  if (name == "json-lines") return Format::JsonLines;
  return std::nullopt;
}

Row metrics_row(const Metrics& m, bool measured) {
  const auto rate = fp_rate(m);
  return {{"trace", m.trace_name.empty() ? "-" : m.trace_name},
          {"fingerprint", hex(m.trace_fingerprint)},
          {"policy", std::string(to_string(m.policy))},
          {"cycles", std::to_string(m.cycles)},
          {"dynamic_executed", std::to_string(m.dynamic_executed)},
          {"committed", std::to_string(m.committed)},
          {"squashes", std::to_string(m.squashes)},
          {"squashed_issued", std::to_string(m.squashed_issued)},
          {"delayed_issues", std::to_string(m.delayed_issues)},
          {"fp_count", measured ? std::to_string(m.fp_count) : "-"},
          {"fp_rate", measured && rate ? fixed(*rate) : "-"},
          {"filter_clears", std::to_string(m.filter_clears)},
          {"rotations", std::to_string(m.rotations)}};
}

Row attack_row(const ScenarioParams& params, const AttackReport& r) {
  std::string per_pc;
  for (const auto& [pc, n] : r.spec_executions_of_S) {
    if (!per_pc.empty()) per_pc += ' ';
    char buf[48];
    std::snprintf(buf, sizeof buf, "0x%llx:%llu", static_cast<unsigned long long>(pc),
                  static_cast<unsigned long long>(n));
    per_pc += buf;
  }
  return {{"policy", std::string(to_string(r.policy))},
          {"pattern", std::string(to_string(r.pattern))},
          {"handles", std::to_string(params.handles)},
          {"replays", params.unbounded ? "unbounded" : std::to_string(params.replays)},
          {"s_issues", std::to_string(r.total_s_issues)},
          {"s_issues_per_pc", per_pc},
          {"squashes", std::to_string(r.squashes)},
          {"cycles", std::to_string(r.cycles)},
          {"committed", std::to_string(r.committed)},
          {"trace_length", std::to_string(r.trace_length)},
          {"sustained_replay", r.sustained_replay ? "true" : "false"}};
}

void write_rows(std::ostream& out, const std::vector<Row>& rows, Format format) {
  if (rows.empty()) return;
  const Row& head = rows.front();
  switch (format) {
    case Format::Table: {
      std::vector<std::size_t> w(head.size());
      for (std::size_t c = 0; c < head.size(); ++c) {
        w[c] = head[c].first.size();
        for (const auto& r : rows) w[c] = std::max(w[c], r[c].second.size());
      }
      auto line = [&](auto get) {
        std::string s;
        for (std::size_t c = 0; c < head.size(); ++c) {
          std::string cell = get(c);
          if (c + 1 < head.size()) cell.resize(w[c] + 2, ' ');
          s += cell;
        }
        out << s << "\n";
      };
      line([&](std::size_t c) { return head[c].first; });
      for (const auto& r : rows) line([&](std::size_t c) { return r[c].second; });
      break;
    }
    case Format::Csv:
      for (std::size_t c = 0; c < head.size(); ++c) out << (c ? "," : "") << csv_field(head[c].first);
      out << "\n";
      for (const auto& r : rows) {
        for (std::size_t c = 0; c < r.size(); ++c) out << (c ? "," : "") << csv_field(r[c].second);
        out << "\n";
      }
      break;
    case Format::JsonLines:
      for (const auto& r : rows) {
        json j = json::object();
        for (const auto& [k, v] : r) j[k] = json_value(v);
        out << j.dump() << "\n";
      }
      break;
  }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Out-of-order speculation simulator with Delay-on-Squash replay defense", "dossim"};
  app.require_subcommand(1);

  CommonFlags sim_flags;
  WorkloadFlags sim_wl;
  bool golden = false;
  auto* sim = app.add_subcommand("simulate", "run one workload under one policy");
  sim_flags.add(sim, true);
  sim_wl.add(sim);
  sim->add_flag("--golden", golden, "run the scripted six-step handle-tracking example");

  CommonFlags atk_flags;
  AttackFlags atk;
  auto* attack = app.add_subcommand("attack", "run a replay attack scenario (all policies unless --policy)");
  atk_flags.add(attack, true);
  atk.add(attack);

  CommonFlags sw_flags;
  SweepFlags sw;
  WorkloadFlags sw_wl;
  auto* sweep = app.add_subcommand("sweep", "cartesian parameter sweep, one row per point");
  sw.add(sweep, sw_flags);
  sw_wl.add(sweep);

  GenFlags gen;
  auto* gen_cmd = app.add_subcommand("gen-trace", "write a generated loop trace");
  gen_cmd->add_option("--body", gen.body, "loop body length")->capture_default_str();
  gen_cmd->add_option("--iterations", gen.iterations, "iterations")->capture_default_str();
  gen_cmd->add_option("--squash-rate", gen.squash_rate, "misspeculation probability")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "generator seed")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "output path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*sim) return cmd_simulate(sim_flags, sim_wl, golden, out);
    if (*attack) return cmd_attack(atk_flags, atk, out, err);
    if (*sweep) return cmd_sweep(sw_flags, sw, sw_wl, out);
    if (*gen_cmd) {
      const Trace t = gen_loop_trace(gen.body, gen.iterations, gen.squash_rate, gen.seed);
      if (gen.out.empty()) out << serialize_trace(t);
      else save_trace_file(t, gen.out);
      return kExitOk;
    }
  } catch (const LivelockError& e) {
    err << "error: " << e.what() << "\n";
    return kExitLivelock;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}

}  // namespace dossim::cli
