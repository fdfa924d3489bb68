#include "dossim/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <string>

#include "dossim/error.hpp"

namespace dossim {

DefenseConfig MachineConfig::defense() const {
  DefenseConfig d;
  d.policy = policy;
  d.filters = filters;
  d.fp_oracle = fp_oracle && policy == PolicyKind::DosBloom;
  d.hq_capacity = rob_size;
  d.window_len = effective_window();
  return d;
}

void MachineConfig::validate() const {
  if (rob_size < 1) throw ConfigError("rob_size must be >= 1");
  if (width < 1) throw ConfigError("width must be >= 1");
  filters.validate();
}

Pipeline::Pipeline(const MachineConfig& config) : config_(config) {
  config_.validate();
  policy_.emplace(config_.defense(), config_.context_id);
  metrics_.policy = config_.policy;
}

Pipeline::Pipeline(const Trace& trace, const MachineConfig& config, MissPlan plan)
    : Pipeline(config) {
  for (const auto& in : trace.instructions) validate(in);
  trace_ = trace;
  plan_ = std::move(plan);
  slot_misses_.resize(trace.size());
  for (std::size_t i = 0; i < trace.size(); ++i) {
    slot_misses_[i] = trace.instructions[i].misspeculates ? 1 : 0;
  }
  for (const auto& [slot, times] : plan_) {
    if (slot >= trace.size() || !trace.instructions[slot].shadow) {
      throw ConfigError("miss plan slot " + std::to_string(slot) + " is not a shadow-casting instruction");
    }
  }
  metrics_.trace_name = trace.name;
  metrics_.trace_fingerprint = trace_fingerprint(trace);
}

const RobEntry* Pipeline::find(Seq seq) const noexcept {
  auto it = std::lower_bound(rob_.begin(), rob_.end(), seq,
                             [](const RobEntry& e, Seq s) { return e.instr.seq < s; });
  return it != rob_.end() && it->instr.seq == seq ? &*it : nullptr;
}

void Pipeline::log(SimEvent ev) {
  if (config_.record_events) events_.push_back(std::move(ev));
}

void Pipeline::apply(const FilterEvents& ev) noexcept {
  metrics_.filter_clears += ev.clears;
  metrics_.rotations += ev.rotations;
}

bool Pipeline::dispatch_entry(RobEntry entry) {
  if (rob_.size() >= config_.rob_size) return false;
  if (entry.instr.shadow && policy_->handle_queue_full()) return false;
  if (have_seq_ && entry.instr.seq <= next_seq_ - 1) {
    throw InvariantError("dispatch out of program order: seq " + std::to_string(entry.instr.seq));
  }
  entry.state = RobState::Dispatched;
  entry.hashes = policy_->hashes_for(entry.instr.pc);
  rob_.push_back(entry);
  policy_->on_dispatch(rob_.back());
  next_seq_ = entry.instr.seq + 1;
  have_seq_ = true;
  ++dispatched_;
  log({SimEvent::Type::Dispatch, cycle_, entry.instr.seq, entry.instr.pc, {}, {}});
  return true;
}

std::optional<std::size_t> Pipeline::dispatch(const Instruction& instr) {
  validate(instr);
  RobEntry e;
  e.instr = instr;
  e.misses_remaining = instr.misspeculates ? 1 : 0;
  if (!dispatch_entry(e)) return std::nullopt;
  return rob_.size() - 1;
}

void Pipeline::dispatch_from_trace(StepStats& st) {
  if (!trace_ || cycle_ < fetch_stall_until_) return;
  for (std::size_t n = 0; n < config_.width && fetch_index_ < trace_->size(); ++n) {
    RobEntry e;
    e.instr = trace_->instructions[fetch_index_];
    e.instr.seq = next_seq_;
    e.trace_slot = fetch_index_;
    if (auto it = plan_.find(fetch_index_); it != plan_.end()) {
      e.misses_remaining = it->second;
    } else {
      e.misses_remaining = slot_misses_[fetch_index_];
    }
    e.instr.misspeculates = e.misses_remaining > 0;
    if (!dispatch_entry(e)) break;
    ++fetch_index_;
    st.progress = true;
  }
}

std::size_t Pipeline::issue(Cycle cycle, StepStats& st, std::vector<Seq>* issued) {
  std::size_t count = 0;
  for (std::size_t pos = 0; pos < rob_.size() && count < config_.width; ++pos) {
    RobEntry& e = rob_[pos];
    if (e.state != RobState::Dispatched) continue;
    // the ROB head is never delayed
    const Decision d = pos == 0 ? Decision::allow() : policy_->issue_decision(e);
    if (pos != 0 && observer_) observer_({cycle, e.instr.seq, e.instr.pc, d});
    if (d.delay) {
      ++st.delayed;
      ++metrics_.delayed_issues;
      if (d.false_positive) {
        ++st.fp;
        ++metrics_.fp_count;
      }
      continue;
    }
    e.state = RobState::Issued;
    e.issue_cycle = cycle;
    e.armed_at = cycle;
    ++metrics_.dynamic_executed;
    ++metrics_.per_pc_spec_issues[e.instr.pc];
    log({SimEvent::Type::Issue, cycle, e.instr.seq, e.instr.pc, {}, {}});
    if (issued) issued->push_back(e.instr.seq);
    ++count;
  }
  if (count) st.progress = true;
  return count;
}

std::vector<Seq> Pipeline::try_issue(Cycle cycle) {
  StepStats st;
  std::vector<Seq> issued;
  issue(cycle, st, &issued);
  return issued;
}

std::size_t Pipeline::complete_execution() {
  std::size_t n = 0;
  for (auto& e : rob_) {
    if (e.state == RobState::Issued && cycle_ >= *e.issue_cycle + e.instr.exec_latency) {
      e.state = RobState::Executed;
      e.exec_done_cycle = cycle_;
      ++n;
    }
  }
  return n;
}

bool Pipeline::resolution_due(const RobEntry& e, std::size_t pos, Cycle now) const noexcept {
  if (!e.instr.shadow || e.resolved) return false;
  if (e.state != RobState::Issued && e.state != RobState::Executed) return false;
  if (now < e.armed_at + e.instr.resolve_latency) return false;
  // faults are only taken at the ROB head
  if (*e.instr.shadow == ShadowKind::E) return pos == 0 && e.state == RobState::Executed;
  return true;
}

bool Pipeline::resolve_handles() {
  bool progress = false;
  for (std::size_t pos = 0; pos < rob_.size(); ++pos) {
    RobEntry& e = rob_[pos];
    if (!resolution_due(e, pos, cycle_)) continue;
    progress = true;
    if (e.misses_remaining > 0) {
      if (e.misses_remaining != kUnboundedMisses) --e.misses_remaining;
      if (e.trace_slot != kNoTraceSlot && !plan_.contains(e.trace_slot) &&
          slot_misses_[e.trace_slot] > 0) {
        --slot_misses_[e.trace_slot];
      }
      e.armed_at = cycle_;
      // a mispredicted C/D/M outcome is known once detected; a fault re-executes
      if (e.misses_remaining == 0 && *e.instr.shadow != ShadowKind::E) {
        e.resolved = true;
        policy_->mark_resolved(e.instr.seq);
      }
      const Seq seq = e.instr.seq;
      log({SimEvent::Type::Misspeculate, cycle_, seq, e.instr.pc, {}, {}});
      squash_from(seq);
      break;  // everything younger is gone
    }
    e.resolved = true;
    policy_->mark_resolved(e.instr.seq);
    log({SimEvent::Type::Resolve, cycle_, e.instr.seq, e.instr.pc, {}, {}});
  }
  return progress;
}

SquashRecord Pipeline::squash_from(Seq cause_seq) {
  auto it = std::lower_bound(rob_.begin(), rob_.end(), cause_seq,
                             [](const RobEntry& e, Seq s) { return e.instr.seq < s; });
  if (it == rob_.end() || it->instr.seq != cause_seq) {
    throw InvariantError("squash_from: seq " + std::to_string(cause_seq) + " not in ROB");
  }
  const std::size_t cause_pos = static_cast<std::size_t>(it - rob_.begin());
  const std::size_t cause_slot = it->trace_slot;

  SquashRecord rec;
  rec.cause_seq = cause_seq;
  std::vector<std::pair<Pc, BloomHashes>> issued;
  SimEvent ev{SimEvent::Type::Squash, cycle_, cause_seq, rob_[cause_pos].instr.pc, {}, {}};
  for (std::size_t pos = cause_pos + 1; pos < rob_.size(); ++pos) {
    RobEntry& e = rob_[pos];
    if (e.state == RobState::Issued || e.state == RobState::Executed) {
      issued.emplace_back(e.instr.pc, e.hashes);
      ++metrics_.squashed_issued;
      if (config_.record_events) ev.squashed_issued.push_back(e.instr.seq);
    }
    e.state = RobState::Squashed;
  }
  rob_.erase(rob_.begin() + static_cast<std::ptrdiff_t>(cause_pos + 1), rob_.end());

  std::sort(issued.begin(), issued.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [pc, h] : issued) {
    if (!rec.squashed_issued_pcs.empty() && rec.squashed_issued_pcs.back() == pc) continue;
    rec.squashed_issued_pcs.push_back(pc);
    rec.squashed_issued_hashes.push_back(h);
  }
  if (const HandleQueue* hq = policy_->handle_queue()) {
    rec.youngest_handle = hq->youngest_handle();
    if (config_.record_events) {
      for (const auto& h : hq->entries()) ev.handles_in_flight.push_back(h.seq);
    }
  }
  ++metrics_.squashes;
  apply(policy_->on_squash(rec, metrics_.committed));
  log(std::move(ev));

  if (trace_ && cause_slot != kNoTraceSlot) {
    fetch_index_ = cause_slot + 1;
    fetch_stall_until_ = cycle_ + config_.recovery_latency;
  }
  return rec;
}

void Pipeline::release_safe(StepStats& st) {
  std::vector<Seq> popped;
  const FilterEvents ev = policy_->release_safe_handles(metrics_.committed, &popped);
  apply(ev);
  if (!popped.empty() || ev.clears) st.progress = true;
  for (Seq s : popped) log({SimEvent::Type::HandleSafe, cycle_, s, 0, {}, {}});
}

std::size_t Pipeline::commit(Cycle cycle) {
  std::size_t n = 0;
  while (n < config_.width && !rob_.empty()) {
    const RobEntry& e = rob_.front();
    if (e.state != RobState::Executed) break;
    if (e.instr.shadow && !e.resolved) break;
    ++metrics_.committed;
    log({SimEvent::Type::Commit, cycle, e.instr.seq, e.instr.pc, {}, {}});
    rob_.pop_front();
    ++n;
  }
  if (n) last_commit_cycle_ = cycle;
  return n;
}

Pipeline::StepStats Pipeline::step_once() {
  if (!policy_) throw InvariantError("pipeline stepped without a restored context");
  StepStats st;
  if (commit(cycle_)) st.progress = true;
  if (resolve_handles()) st.progress = true;
  release_safe(st);
  if (complete_execution()) st.progress = true;
  issue(cycle_, st, nullptr);
  dispatch_from_trace(st);
  const FilterEvents ev = policy_->tick(metrics_.committed);
  apply(ev);
  if (ev.clears) st.progress = true;
  ++cycle_;
  return st;
}

std::optional<Cycle> Pipeline::next_event_cycle() const {
  std::optional<Cycle> best;
  auto consider = [&](Cycle c) {
    c = std::max(c, cycle_);
    if (!best || c < *best) best = c;
  };
  for (std::size_t pos = 0; pos < rob_.size(); ++pos) {
    const RobEntry& e = rob_[pos];
    if (e.state == RobState::Issued) consider(*e.issue_cycle + e.instr.exec_latency);
    if (e.instr.shadow && !e.resolved &&
        (e.state == RobState::Issued || e.state == RobState::Executed)) {
      if (*e.instr.shadow != ShadowKind::E || (pos == 0 && e.state == RobState::Executed)) {
        consider(e.armed_at + e.instr.resolve_latency);
      }
    }
  }
  if (trace_ && fetch_index_ < trace_->size() && fetch_stall_until_ >= cycle_) {
    consider(fetch_stall_until_);
  }
  return best;
}

void Pipeline::check_livelock() {
  const Cycle budget = config_.effective_livelock_budget();
  if (cycle_ - last_commit_cycle_ > budget) {
    const RobEntry* head = rob_.empty() ? nullptr : &rob_.front();
    std::string msg = "livelock: no commit for " + std::to_string(cycle_ - last_commit_cycle_) +
                      " cycles (budget " + std::to_string(budget) + ") at cycle " +
                      std::to_string(cycle_);
    if (head) {
      msg += "; ROB head seq " + std::to_string(head->instr.seq) + " pc 0x";
      char buf[32];
      std::snprintf(buf, sizeof buf, "%llx", static_cast<unsigned long long>(head->instr.pc));
      msg += buf;
    }
    metrics_.cycles = cycle_;
    throw LivelockError(cycle_, cycle_ - last_commit_cycle_, msg);
  }
}

bool Pipeline::done() const noexcept {
  return rob_.empty() && (!trace_ || fetch_index_ >= trace_->size());
}

bool Pipeline::step() {
  if (done()) return false;
  const StepStats st = step_once();
  if (!st.progress && config_.fast_forward && !done()) {
    const Cycle limit = last_commit_cycle_ + config_.effective_livelock_budget() + 1;
    Cycle target = next_event_cycle().value_or(limit);
    target = std::min(target, std::max(limit, cycle_));
    if (target > cycle_) {
      const Cycle skipped = target - cycle_;
      metrics_.delayed_issues += st.delayed * skipped;
      metrics_.fp_count += st.fp * skipped;
      cycle_ = target;
    }
  }
  check_livelock();
  metrics_.cycles = cycle_;
  return !done();
}

Metrics Pipeline::run() {
  while (step()) {
  }
  metrics_.cycles = cycle_;
  return metrics_;
}

ContextBlob Pipeline::save_context() const {
  if (!policy_) throw InvariantError("save_context: no context loaded");
  return dossim::save_context(*policy_);
}

void Pipeline::evict_context() { policy_.reset(); }

void Pipeline::restore_context(const ContextBlob& blob) {
  PolicyState restored = dossim::restore_context(blob, config_.context_id);
  if (!(restored.config() == config_.defense())) {
    throw BlobError("context blob: defense configuration differs from this engine");
  }
  policy_ = std::move(restored);
}

}  // namespace dossim
