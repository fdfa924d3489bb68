#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "dossim/hashing.hpp"
#include "dossim/instruction.hpp"
#include "dossim/types.hpp"

namespace dossim {

enum class RobState : std::uint8_t { Dispatched, Issued, Executed, Squashed };

inline constexpr std::size_t kNoTraceSlot = std::numeric_limits<std::size_t>::max();
inline constexpr std::uint32_t kUnboundedMisses = std::numeric_limits<std::uint32_t>::max();

struct RobEntry {
  Instruction instr;
  RobState state = RobState::Dispatched;
  std::optional<Cycle> issue_cycle;
  std::optional<Cycle> exec_done_cycle;
  BloomHashes hashes;  // fixed at dispatch

  // handle bookkeeping
  std::size_t trace_slot = kNoTraceSlot;
  std::uint32_t misses_remaining = 0;
  bool resolved = false;
  Cycle armed_at = 0;  // resolution countdown start (issue, or last misspeculation)
};

struct SquashRecord {
  Seq cause_seq = 0;
  std::vector<Pc> squashed_issued_pcs;            // sorted, unique
  std::vector<BloomHashes> squashed_issued_hashes;  // parallel to squashed_issued_pcs
  std::optional<Seq> youngest_handle;
};

}  // namespace dossim
