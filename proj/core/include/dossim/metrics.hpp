#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "dossim/policy.hpp"
#include "dossim/types.hpp"

namespace dossim {

struct Metrics {
  std::string trace_name;
  std::uint64_t trace_fingerprint = 0;
  PolicyKind policy = PolicyKind::Baseline;

  Cycle cycles = 0;
  std::uint64_t dynamic_executed = 0;  // issue events, squashed ones included
  std::uint64_t committed = 0;
  std::uint64_t squashes = 0;
  std::uint64_t squashed_issued = 0;   // issued instructions later squashed
  std::uint64_t delayed_issues = 0;    // one per delayed issue decision
  std::uint64_t fp_count = 0;
  std::uint64_t filter_clears = 0;
  std::uint64_t rotations = 0;
  std::map<Pc, std::uint64_t> per_pc_spec_issues;

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

// fp_count / dynamic_executed; empty when nothing executed.
std::optional<double> fp_rate(const Metrics& m) noexcept;

// cycles(b) / cycles(a). Throws ConfigError unless both runs used the same trace.
double perf_proxy(const Metrics& a, const Metrics& b);

}  // namespace dossim
