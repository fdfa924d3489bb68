#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <unordered_map>
#include <vector>

#include "dossim/metrics.hpp"
#include "dossim/policy.hpp"
#include "dossim/rob.hpp"
#include "dossim/trace.hpp"

namespace dossim {

struct MachineConfig {
  std::size_t rob_size = 128;
  std::size_t width = 8;  // issue and commit width
  PolicyKind policy = PolicyKind::Baseline;
  FilterConfig filters;   // filters.salt seeds the Bloom hashes
  bool fp_oracle = false;
  std::uint64_t window_len = 0;       // 0: rob_size
  std::uint64_t livelock_budget = 0;  // cycles without a commit; 0: 100 * rob_size
  std::uint32_t recovery_latency = 0; // extra front-end stall after a squash
  ContextId context_id = 0;
  bool record_events = false;
  bool fast_forward = true;  // skip idle cycles (results are identical)

  std::uint64_t effective_window() const noexcept { return window_len ? window_len : rob_size; }
  std::uint64_t effective_livelock_budget() const noexcept {
    return livelock_budget ? livelock_budget : 100 * static_cast<std::uint64_t>(rob_size);
  }
  DefenseConfig defense() const;
  void validate() const;
};

// Per trace slot, how often every dynamic instance of that slot misspeculates
// before resolving correctly (kUnboundedMisses: never resolves). Slots without
// an entry follow the trace's MISS marks, which are consumed once.
using MissPlan = std::unordered_map<std::size_t, std::uint32_t>;

struct SimEvent {
  enum class Type : std::uint8_t { Dispatch, Issue, Misspeculate, Resolve, Squash, HandleSafe, Commit };

  Type type;
  Cycle cycle = 0;
  Seq seq = 0;
  Pc pc = 0;
  std::vector<Seq> handles_in_flight;  // Squash: every handle queued at the squash
  std::vector<Seq> squashed_issued;    // Squash: issued instructions removed
};

struct DecisionEvent {
  Cycle cycle;
  Seq seq;
  Pc pc;
  Decision decision;
};

class Pipeline {
 public:
  // Manually driven engine: feed it with dispatch().
  explicit Pipeline(const MachineConfig& config);
  // Trace-driven engine: step()/run() fetch from the trace.
  Pipeline(const Trace& trace, const MachineConfig& config, MissPlan plan = {});

  // Returns the ROB position, or nullopt when the ROB (or handle queue) is full.
  std::optional<std::size_t> dispatch(const Instruction& instr);
  std::vector<Seq> try_issue(Cycle cycle);
  SquashRecord squash_from(Seq cause_seq);
  std::size_t commit(Cycle cycle);

  // Advances one cycle. Returns false once the trace has fully committed.
  bool step();
  // Runs to completion; throws LivelockError when the no-commit budget runs out.
  Metrics run();
  bool done() const noexcept;

  Cycle cycle() const noexcept { return cycle_; }
  std::uint64_t dispatched() const noexcept { return dispatched_; }
  const std::deque<RobEntry>& rob() const noexcept { return rob_; }
  const RobEntry* find(Seq seq) const noexcept;
  const MachineConfig& config() const noexcept { return config_; }
  const Metrics& metrics() const noexcept { return metrics_; }
  const std::vector<SimEvent>& events() const noexcept { return events_; }

  PolicyState& policy() noexcept { return *policy_; }
  const PolicyState& policy() const noexcept { return *policy_; }

  // Context switch support: the defense state leaves the engine as a blob and
  // must be restored (for the same context) before the next step.
  ContextBlob save_context() const;
  void evict_context();
  void restore_context(const ContextBlob& blob);
  bool has_context() const noexcept { return policy_.has_value(); }

  void set_decision_observer(std::function<void(const DecisionEvent&)> observer) {
    observer_ = std::move(observer);
  }

 private:
  struct StepStats {
    bool progress = false;
    std::uint64_t delayed = 0;
    std::uint64_t fp = 0;
  };

  StepStats step_once();
  bool dispatch_entry(RobEntry entry);
  void dispatch_from_trace(StepStats& st);
  std::size_t complete_execution();
  bool resolve_handles();
  void release_safe(StepStats& st);
  std::size_t issue(Cycle cycle, StepStats& st, std::vector<Seq>* issued);
  std::optional<Cycle> next_event_cycle() const;
  bool resolution_due(const RobEntry& e, std::size_t pos, Cycle now) const noexcept;
  void apply(const FilterEvents& ev) noexcept;
  void log(SimEvent ev);
  void check_livelock();

  MachineConfig config_;
  std::optional<PolicyState> policy_;

  std::optional<Trace> trace_;
  MissPlan plan_;
  std::vector<std::uint32_t> slot_misses_;  // unconsumed MISS marks per slot
  std::size_t fetch_index_ = 0;
  Cycle fetch_stall_until_ = 0;

  std::deque<RobEntry> rob_;
  Cycle cycle_ = 0;
  Cycle last_commit_cycle_ = 0;
  Seq next_seq_ = 0;
  bool have_seq_ = false;
  std::uint64_t dispatched_ = 0;

  Metrics metrics_;
  std::vector<SimEvent> events_;
  std::function<void(const DecisionEvent&)> observer_;
};

}  // namespace dossim
