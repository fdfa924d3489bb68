#include "dossim/policy.hpp"

#include <array>

namespace dossim {

namespace {
constexpr std::array<std::string_view, 4> kPolicyNames{"baseline", "delay-all", "dos-perfect",
                                                       "dos-bloom"};
}

std::string_view to_string(PolicyKind kind) noexcept {
  return kPolicyNames[static_cast<std::size_t>(kind)];
}

std::optional<PolicyKind> parse_policy(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kPolicyNames.size(); ++i) {
    if (name == kPolicyNames[i]) return static_cast<PolicyKind>(i);
  }
  return std::nullopt;
}

PolicyState::PolicyState(const DefenseConfig& config, ContextId context_id)
    : config_(config), context_id_(context_id) {
  config_.filters.validate();
  if (config_.policy != PolicyKind::DosBloom) config_.fp_oracle = false;
  if (config_.policy != PolicyKind::Baseline) hq_.emplace(config_.hq_capacity);
  if (config_.policy == PolicyKind::DosBloom) bloom_.emplace(config_.filters, config_.window_len);
  if (config_.policy == PolicyKind::DosPerfect || config_.fp_oracle) {
    perfect_.emplace(config_.window_len);
  }
}

BloomHashes PolicyState::hashes_for(Pc pc) const {
  return compute_hashes(pc, config_.filters.bits, config_.filters.hashes, config_.filters.salt);
}

void PolicyState::on_dispatch(const RobEntry& entry) {
  if (hq_ && entry.instr.shadow) hq_->push_handle(entry.instr.seq, *entry.instr.shadow);
}

bool PolicyState::speculative(const RobEntry& entry) const noexcept {
  const auto oldest = hq_->oldest_handle();
  return oldest && *oldest < entry.instr.seq;
}

Decision PolicyState::issue_decision(const RobEntry& entry) const {
  Decision d;
  switch (config_.policy) {
    case PolicyKind::Baseline:
      break;
    case PolicyKind::DelayAll:
      if (speculative(entry)) {
        d.delay = true;
        d.reason = DelayReason::UnsafeOlderHandle;
      }
      break;
    case PolicyKind::DosPerfect:
      d.perfect_hit = perfect_->query(entry.instr.pc);
      if (d.perfect_hit && speculative(entry)) {
        d.delay = true;
        d.reason = DelayReason::SquashedPcHit;
      }
      break;
    case PolicyKind::DosBloom:
      if (bloom_->query(entry.hashes) && speculative(entry)) {
        d.delay = true;
        d.reason = DelayReason::SquashedPcHit;
      }
      if (perfect_) {
        d.perfect_hit = perfect_->query(entry.instr.pc);
        d.false_positive = d.delay && !d.perfect_hit;
      }
      break;
  }
  return d;
}

FilterEvents PolicyState::on_squash(const SquashRecord& record, std::uint64_t now) {
  if (!hq_) return {};
  if (hq_->contains(record.cause_seq)) {
    hq_->mark_squashed_after(record.cause_seq);
  } else {
    hq_->flag_younger_than(record.cause_seq);
  }
  FilterEvents ev;
  if (bloom_) ev += bloom_->record_squash(record.squashed_issued_hashes, record.youngest_handle, now);
  if (perfect_) {
    perfect_->record(record.squashed_issued_pcs, record.youngest_handle, now);
  }
  return ev;
}

void PolicyState::mark_resolved(Seq seq) {
  if (hq_ && hq_->contains(seq)) hq_->mark_resolved(seq);
}

FilterEvents PolicyState::release_safe_handles(std::uint64_t now, std::vector<Seq>* popped) {
  if (!hq_) return {};
  const auto safe = hq_->pop_safe();
  if (popped) popped->insert(popped->end(), safe.begin(), safe.end());
  if (safe.empty()) return {};
  FilterEvents ev;
  // every filter associated with a popped handle is associated with one <= the last popped
  if (bloom_) ev += bloom_->on_handle_safe(safe.back(), now);
  if (perfect_) {
    const auto pe = perfect_->on_handle_safe(safe.back(), now);
    if (!bloom_) ev += pe;
  }
  return ev;
}

FilterEvents PolicyState::tick(std::uint64_t now) {
  FilterEvents ev;
  if (bloom_) ev += bloom_->tick(now);
  if (perfect_) {
    const auto pe = perfect_->tick(now);
    if (!bloom_) ev += pe;
  }
  return ev;
}

}  // namespace dossim
