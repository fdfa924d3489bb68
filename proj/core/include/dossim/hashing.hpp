#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "dossim/types.hpp"

namespace dossim {

inline constexpr std::size_t kMaxHashes = 8;

// The k Bloom indices of one PC, computed once at dispatch.
struct BloomHashes {
  std::array<std::uint32_t, kMaxHashes> index{};
  std::uint8_t count = 0;

  std::span<const std::uint32_t> view() const noexcept { return {index.data(), count}; }

  friend bool operator==(const BloomHashes&, const BloomHashes&) = default;
};

// Multiply-xorshift mixer number `which` (< kMaxHashes) over pc ^ salt.
std::uint64_t mix_pc(std::size_t which, Pc pc, std::uint64_t salt) noexcept;

// k indices in [0, bits); `bits` must be a power of two, 1 <= k <= kMaxHashes.
BloomHashes compute_hashes(Pc pc, std::uint32_t bits, std::uint32_t k, std::uint64_t salt = 0);

constexpr bool is_power_of_two(std::uint64_t v) noexcept { return v != 0 && (v & (v - 1)) == 0; }

}  // namespace dossim
