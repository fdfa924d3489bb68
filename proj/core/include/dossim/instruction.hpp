#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include "dossim/types.hpp"

namespace dossim {

enum class InstrKind : std::uint8_t { Plain, Load, Store, Branch, SideChannelTransmit };

// Speculative shadow cast by a potential replay handle.
//   E: exceptions (page faults), C: control flow, D: stores with unknown
//   address, M: memory-model reordering.
enum class ShadowKind : std::uint8_t { E, C, D, M };

struct Instruction {
  Seq seq = 0;
  Pc pc = 0;
  InstrKind kind = InstrKind::Plain;
  std::optional<ShadowKind> shadow;  // set iff the instruction can squash
  std::uint32_t exec_latency = 1;
  std::uint32_t resolve_latency = 1;
  bool misspeculates = false;  // pre-scheduled misspeculation (MISS)

  bool is_handle() const noexcept { return shadow.has_value(); }

  friend bool operator==(const Instruction&, const Instruction&) = default;
};

std::string_view to_string(InstrKind kind) noexcept;
std::string_view to_string(ShadowKind kind) noexcept;
std::optional<InstrKind> parse_instr_kind(std::string_view token) noexcept;
std::optional<ShadowKind> parse_shadow_kind(std::string_view token) noexcept;

// Throws ConfigError when the instruction breaks a model invariant.
void validate(const Instruction& instr);

}  // namespace dossim
