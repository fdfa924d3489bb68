#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dossim/types.hpp"

namespace dossim {

// Scripted six-step walk through handle tracking with two 8-bit filters:
// H1, X, H2, S, H3, X dispatched; H2 squashes; the re-executed path delays S
// and H3 but allows Y; H1 squashes into the second filter; nothing clears
// while H1 is live; H1 resolving drains the queue and clears both filters.

inline constexpr Pc kGoldenH1 = 0x100;
inline constexpr Pc kGoldenXa = 0x104;
inline constexpr Pc kGoldenH2 = 0x108;
inline constexpr Pc kGoldenS = 0x10c;
inline constexpr Pc kGoldenH3 = 0x110;
inline constexpr Pc kGoldenXb = 0x114;
inline constexpr Pc kGoldenY = 0x118;

// Hash salt pinned for the example; golden_salt_ok() re-checks it.
inline constexpr std::uint64_t kGoldenSalt = 1;

// True when, under `salt`, the first filter ends up at least half full and Y
// does not collide with it or with X/H2 in a way that would change a decision.
bool golden_salt_ok(std::uint64_t salt);

struct GoldenStep {
  int index = 0;
  std::string title;
  bool passed = true;
  std::vector<std::string> diffs;  // "what: expected E, got G"
};

struct GoldenResult {
  std::uint64_t salt = 0;
  std::vector<GoldenStep> steps;

  bool passed() const noexcept;
};

GoldenResult run_golden(std::uint64_t salt = kGoldenSalt);
std::string render_golden(const GoldenResult& result);

}  // namespace dossim
