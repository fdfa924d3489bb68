#include "dossim/bloom_filter.hpp"

#include <algorithm>
#include <bit>

#include "dossim/error.hpp"

namespace dossim {

BloomFilter::BloomFilter(std::uint32_t bits) : bits_(bits), words_((bits + 63) / 64, 0) {
  if (!is_power_of_two(bits)) throw ConfigError("Bloom filter size must be a power of two");
}

void BloomFilter::insert(const BloomHashes& hashes) noexcept {
  for (std::uint32_t idx : hashes.view()) {
    std::uint64_t& w = words_[idx >> 6];
    const std::uint64_t mask = std::uint64_t{1} << (idx & 63);
    if (!(w & mask)) {
      w |= mask;
      ++set_count_;
    }
  }
}

bool BloomFilter::contains(const BloomHashes& hashes) const noexcept {
  return std::all_of(hashes.view().begin(), hashes.view().end(),
                     [this](std::uint32_t idx) { return test(idx); });
}

void BloomFilter::clear() noexcept {
  std::fill(words_.begin(), words_.end(), 0);
  set_count_ = 0;
}

std::vector<std::uint8_t> BloomFilter::to_bytes() const {
  std::vector<std::uint8_t> out((bits_ + 7) / 8, 0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(words_[i / 8] >> (8 * (i % 8)));
  }
  return out;
}

BloomFilter BloomFilter::from_bytes(std::uint32_t bits, std::span<const std::uint8_t> bytes) {
  BloomFilter f(bits);
  if (bytes.size() != (bits + 7) / 8) throw InvariantError("Bloom filter byte length mismatch");
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    f.words_[i / 8] |= std::uint64_t{bytes[i]} << (8 * (i % 8));
  }
  if (bits < 8 && (bytes[0] >> bits) != 0) throw InvariantError("Bloom filter padding bits set");
  std::uint32_t pop = 0;
  for (auto w : f.words_) pop += static_cast<std::uint32_t>(std::popcount(w));
  f.set_count_ = pop;
  return f;
}

void FilterConfig::validate() const {
  if (!is_power_of_two(bits)) throw ConfigError("--bits must be a power of two");
  if (hashes < 1 || hashes > kMaxHashes) throw ConfigError("--hashes must be in [1, 8]");
  if (count < 1) throw ConfigError("--filters must be >= 1");
  if (threshold > bits) throw ConfigError("--threshold cannot exceed --bits");
}

RollingFilters::RollingFilters(const FilterConfig& config, std::uint64_t window_len)
    : config_(config), window_len_(window_len) {
  config_.validate();
  slots_.assign(config_.count, Slot{BloomFilter(config_.bits), std::nullopt, std::nullopt});
}

bool RollingFilters::query(const BloomHashes& hashes) const noexcept {
  return std::any_of(slots_.begin(), slots_.end(),
                     [&](const Slot& s) { return s.filter.contains(hashes); });
}

FilterEvents RollingFilters::record_squash(std::span<const BloomHashes> squashed,
                                           std::optional<Seq> youngest_handle,
                                           std::uint64_t now) {
  Slot& slot = slots_[active_];
  for (const auto& h : squashed) slot.filter.insert(h);
  slot.assoc_handle = youngest_handle;
  slot.clear_deadline.reset();
  if (!youngest_handle) slot.clear_deadline = now + window_len_;

  FilterEvents ev;
  if (maybe_rotate()) ev.rotations = 1;
  ev += tick(now);
  return ev;
}

bool RollingFilters::maybe_rotate() noexcept {
  if (slots_.size() < 2) return false;
  const std::size_t next = (active_ + 1) % slots_.size();
  if (slots_[active_].filter.set_count() >= config_.saturation_threshold() &&
      slots_[active_].filter.set_count() > 0 && slots_[next].filter.empty() &&
      !slots_[next].assoc_handle && !slots_[next].clear_deadline) {
    active_ = next;
    return true;
  }
  return false;
}

FilterEvents RollingFilters::on_handle_safe(Seq safe_seq, std::uint64_t now) {
  for (auto& s : slots_) {
    if (s.assoc_handle && *s.assoc_handle <= safe_seq && !s.clear_deadline) {
      s.clear_deadline = now + window_len_;
    }
  }
  return tick(now);
}

FilterEvents RollingFilters::tick(std::uint64_t now) {
  FilterEvents ev;
  for (auto& s : slots_) {
    if (s.clear_deadline && *s.clear_deadline <= now) {
      s.filter.clear();
      s.assoc_handle.reset();
      s.clear_deadline.reset();
      ++ev.clears;
    }
  }
  if (ev.clears && maybe_rotate()) ++ev.rotations;
  return ev;
}

void RollingFilters::restore(std::size_t active_index, std::vector<Slot> slots) {
  if (slots.size() != config_.count || active_index >= slots.size()) {
    throw InvariantError("rolling filter state does not match configuration");
  }
  for (const auto& s : slots) {
    if (s.filter.size() != config_.bits) throw InvariantError("filter size mismatch");
  }
  active_ = active_index;
  slots_ = std::move(slots);
}

}  // namespace dossim
