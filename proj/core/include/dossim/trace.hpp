#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dossim/instruction.hpp"

namespace dossim {

// A committed-path instruction stream. Loops are stored expanded, so a loop
// body contributes the same PCs once per iteration.
struct Trace {
  std::string name;
  std::uint64_t seed = 0;
  std::vector<Instruction> instructions;

  std::size_t size() const noexcept { return instructions.size(); }
  bool empty() const noexcept { return instructions.empty(); }

  friend bool operator==(const Trace&, const Trace&) = default;
};

inline constexpr Pc kLoopBasePc = 0x400000;

// Loop workload: `iterations` copies of a `body_len` slot body whose kinds
// cycle through Plain, Load(M), Plain, Branch(C), Store(D), Load(M), Plain,
// Branch(C). Each shadow-casting instance draws u = (mt19937_64() >> 11) *
// 2^-53 in program order and misspeculates when u < squash_rate.
Trace gen_loop_trace(std::size_t body_len, std::size_t iterations, double squash_rate,
                     std::uint64_t seed);

// Text format, one instruction per line:
//   <seq> <pc-hex> <KIND> <SHADOW|-> <exec_latency> <resolve_latency> [MISS]
// `#` starts a comment. A leading `# trace <name> seed <n>` line carries the
// metadata and is what serialize_trace emits.
Trace parse_trace(std::string_view text);
std::string serialize_trace(const Trace& trace);

Trace load_trace_file(const std::string& path);
void save_trace_file(const Trace& trace, const std::string& path);

// Stable 64-bit identity of a trace (name, seed, and every field).
std::uint64_t trace_fingerprint(const Trace& trace) noexcept;

}  // namespace dossim
