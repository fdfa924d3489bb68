#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dossim/hashing.hpp"
#include "dossim/types.hpp"

namespace dossim {

// Binary Bloom filter over a power-of-two bit array. Bits are only ever
// cleared all at once.
class BloomFilter {
 public:
  explicit BloomFilter(std::uint32_t bits = 64);

  void insert(const BloomHashes& hashes) noexcept;
  bool contains(const BloomHashes& hashes) const noexcept;
  void clear() noexcept;

  bool test(std::uint32_t bit) const noexcept { return (words_[bit >> 6] >> (bit & 63)) & 1u; }
  std::uint32_t size() const noexcept { return bits_; }
  std::uint32_t set_count() const noexcept { return set_count_; }
  bool empty() const noexcept { return set_count_ == 0; }

  // Little-endian packing: bit i lives in byte i / 8 at position i % 8.
  std::vector<std::uint8_t> to_bytes() const;
  static BloomFilter from_bytes(std::uint32_t bits, std::span<const std::uint8_t> bytes);

  friend bool operator==(const BloomFilter&, const BloomFilter&) = default;

 private:
  std::uint32_t bits_;
  std::uint32_t set_count_ = 0;
  std::vector<std::uint64_t> words_;
};

struct FilterConfig {
  std::uint32_t bits = 64;      // m
  std::uint32_t hashes = 2;     // k
  std::uint32_t count = 2;      // filters in the rolling ring
  std::uint32_t threshold = 0;  // set bits that trigger rotation; 0 means bits / 2
  std::uint64_t salt = 0;       // hash salt

  std::uint32_t saturation_threshold() const noexcept { return threshold ? threshold : bits / 2; }
  void validate() const;

  friend bool operator==(const FilterConfig&, const FilterConfig&) = default;
};

struct FilterEvents {
  std::uint32_t clears = 0;
  std::uint32_t rotations = 0;

  FilterEvents& operator+=(const FilterEvents& o) noexcept {
    clears += o.clears;
    rotations += o.rotations;
    return *this;
  }
};

// Ring of Bloom filters (two by default): one active filter receives the PCs
// of squashed instructions, the others wait to be bulk-cleared once the
// handle they are associated with has left the window of speculation.
// Deadlines are counted in retired instructions, which squash/refill churn
// cannot advance.
class RollingFilters {
 public:
  struct Slot {
    BloomFilter filter;
    std::optional<Seq> assoc_handle;
    std::optional<std::uint64_t> clear_deadline;

    friend bool operator==(const Slot&, const Slot&) = default;
  };

  RollingFilters(const FilterConfig& config, std::uint64_t window_len);

  BloomHashes hashes_for(Pc pc) const {
    return compute_hashes(pc, config_.bits, config_.hashes, config_.salt);
  }

  // Hit iff some filter in the ring has all k indices set.
  bool query(const BloomHashes& hashes) const noexcept;

  // Inserts into the active filter, re-associates it with `youngest_handle`
  // (dropping any pending clear), then evaluates rotation. With no handle in
  // flight the filter is instead scheduled for clearing one window from `now`.
  FilterEvents record_squash(std::span<const BloomHashes> squashed,
                             std::optional<Seq> youngest_handle, std::uint64_t now);

  // Rotates when the active filter holds at least `threshold` ones and the
  // next filter in the ring is already empty.
  bool maybe_rotate() noexcept;

  // `safe_seq` just left the handle queue; every filter associated with it or
  // an older handle becomes eligible for clearing at now + window_len.
  FilterEvents on_handle_safe(Seq safe_seq, std::uint64_t now);

  // Clears every filter whose deadline has passed.
  FilterEvents tick(std::uint64_t now);

  const FilterConfig& config() const noexcept { return config_; }
  std::uint64_t window_len() const noexcept { return window_len_; }
  std::size_t active_index() const noexcept { return active_; }
  const std::vector<Slot>& slots() const noexcept { return slots_; }
  const Slot& active() const noexcept { return slots_[active_]; }

  // Restores raw state (context reload). Throws InvariantError on mismatch.
  void restore(std::size_t active_index, std::vector<Slot> slots);

  friend bool operator==(const RollingFilters&, const RollingFilters&) = default;

 private:
  FilterConfig config_;
  std::uint64_t window_len_;
  std::size_t active_ = 0;
  std::vector<Slot> slots_;
};

}  // namespace dossim
