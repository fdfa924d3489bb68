#include "dossim/hashing.hpp"

#include <bit>

#include "dossim/error.hpp"

namespace dossim {

namespace {

constexpr std::array<std::uint64_t, kMaxHashes> kOffset{
    0x9E3779B97F4A7C15ull, 0xC2B2AE3D27D4EB4Full, 0x165667B19E3779F9ull, 0x27D4EB2F165667C5ull,
    0x85EBCA77C2B2AE63ull, 0xFF51AFD7ED558CCDull, 0xC4CEB9FE1A85EC53ull, 0xD6E8FEB86659FD93ull};
constexpr std::array<std::uint64_t, kMaxHashes> kMulA{
    0xBF58476D1CE4E5B9ull, 0xFF51AFD7ED558CCDull, 0x94D049BB133111EBull, 0xC4CEB9FE1A85EC53ull,
    0xD6E8FEB86659FD93ull, 0xA0761D6478BD642Full, 0xE7037ED1A0B428DBull, 0x8EBC6AF09C88C6E3ull};
constexpr std::array<std::uint64_t, kMaxHashes> kMulB{
    0x94D049BB133111EBull, 0xC4CEB9FE1A85EC53ull, 0xBF58476D1CE4E5B9ull, 0xFF51AFD7ED558CCDull,
    0x589965CC75374CC3ull, 0x1D8E4E27C47D124Full, 0xD6E8FEB86659FD93ull, 0xA0761D6478BD642Full};

}  // namespace

std::uint64_t mix_pc(std::size_t which, Pc pc, std::uint64_t salt) noexcept {
  std::uint64_t x = pc ^ kOffset[which] ^ salt;
  x ^= x >> 33;
  x *= kMulA[which];
  x ^= x >> 29;
  x *= kMulB[which];
  x ^= x >> 32;
  return x;
}

BloomHashes compute_hashes(Pc pc, std::uint32_t bits, std::uint32_t k, std::uint64_t salt) {
  if (!is_power_of_two(bits)) throw ConfigError("Bloom filter size must be a power of two");
  if (k < 1 || k > kMaxHashes) throw ConfigError("hash count must be in [1, 8]");
  const int width = std::countr_zero(bits);
  BloomHashes out;
  out.count = static_cast<std::uint8_t>(k);
  for (std::uint32_t i = 0; i < k; ++i) {
    out.index[i] = width == 0 ? 0u : static_cast<std::uint32_t>(mix_pc(i, pc, salt) >> (64 - width));
  }
  return out;
}

}  // namespace dossim
