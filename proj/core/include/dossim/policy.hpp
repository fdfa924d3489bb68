#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "dossim/bloom_filter.hpp"
#include "dossim/handle_queue.hpp"
#include "dossim/perfect_filter.hpp"
#include "dossim/rob.hpp"

namespace dossim {

enum class PolicyKind : std::uint8_t { Baseline, DelayAll, DosPerfect, DosBloom };

std::string_view to_string(PolicyKind kind) noexcept;  // baseline, delay-all, dos-perfect, dos-bloom
std::optional<PolicyKind> parse_policy(std::string_view name) noexcept;

enum class DelayReason : std::uint8_t { None, UnsafeOlderHandle, SquashedPcHit };

struct Decision {
  bool delay = false;
  DelayReason reason = DelayReason::None;
  bool perfect_hit = false;     // valid when the perfect filter is present
  bool false_positive = false;  // Bloom hit that the lockstep perfect filter misses

  static Decision allow() noexcept { return {}; }
};

struct DefenseConfig {
  PolicyKind policy = PolicyKind::Baseline;
  FilterConfig filters;
  bool fp_oracle = false;  // DosBloom: run the perfect filter in lockstep
  std::size_t hq_capacity = 0;
  std::uint64_t window_len = 0;

  friend bool operator==(const DefenseConfig&, const DefenseConfig&) = default;
};

// Per-context defense state. Baseline holds nothing, DelayAll only the handle
// queue, the Delay-on-Squash variants the queue plus their filters.
class PolicyState {
 public:
  PolicyState(const DefenseConfig& config, ContextId context_id);

  PolicyKind kind() const noexcept { return config_.policy; }
  ContextId context_id() const noexcept { return context_id_; }
  const DefenseConfig& config() const noexcept { return config_; }

  HandleQueue* handle_queue() noexcept { return hq_ ? &*hq_ : nullptr; }
  const HandleQueue* handle_queue() const noexcept { return hq_ ? &*hq_ : nullptr; }
  const RollingFilters* bloom() const noexcept { return bloom_ ? &*bloom_ : nullptr; }
  const PerfectFilter* perfect() const noexcept { return perfect_ ? &*perfect_ : nullptr; }

  BloomHashes hashes_for(Pc pc) const;

  // True when a shadow-casting instruction cannot be dispatched right now.
  bool handle_queue_full() const noexcept { return hq_ && hq_->full(); }
  void on_dispatch(const RobEntry& entry);

  // DelayAll delays anything behind an unsafe handle. The Delay-on-Squash
  // variants delay a filter hit only while it is still speculative (some
  // older handle unsafe); past that point it can no longer be squashed.
  Decision issue_decision(const RobEntry& entry) const;
  bool speculative(const RobEntry& entry) const noexcept;

  FilterEvents on_squash(const SquashRecord& record, std::uint64_t now);
  void mark_resolved(Seq seq);

  // Pops the safe prefix of the handle queue and notifies the filters.
  FilterEvents release_safe_handles(std::uint64_t now, std::vector<Seq>* popped = nullptr);
  FilterEvents tick(std::uint64_t now);

  friend bool operator==(const PolicyState&, const PolicyState&) = default;

 private:
  friend class ContextCodec;

  DefenseConfig config_;
  ContextId context_id_;
  std::optional<HandleQueue> hq_;
  std::optional<RollingFilters> bloom_;
  std::optional<PerfectFilter> perfect_;
};

// Opaque serialized defense state of one execution context.
struct ContextBlob {
  ContextId context_id = 0;
  std::vector<std::uint8_t> bytes;

  friend bool operator==(const ContextBlob&, const ContextBlob&) = default;
};

// Byte layout (little-endian), version 1:
//   "DOSC" u16 version, u8 policy, u8 flags(bit0 fp_oracle), u64 context_id
//   u64 hq_capacity, u64 window_len
//   u32 bits, u32 hashes, u32 count, u32 threshold, u64 salt
//   'Q' u32 n, n x { u64 seq, u8 kind, u8 flags(bit0 resolved, bit1 squashed) }
//   'B' u32 active, count x { u8 has_assoc, u64 assoc, u8 has_deadline,
//       u64 deadline, u32 set_count, ceil(bits/8) bytes of bits }
//   'P' (perfect filter present) u32 n, n x { u8 has_assoc, u64 assoc,
//       u8 has_deadline, u64 deadline, u32 npcs, npcs x u64 pc }
//   'E' u32 FNV-1a of every preceding byte
// Each section is present only when the state holds that structure.
ContextBlob save_context(const PolicyState& state);

// Throws BlobError on a corrupt blob or when the blob belongs to a different
// context than `expected`.
PolicyState restore_context(const ContextBlob& blob, ContextId expected);

}  // namespace dossim
