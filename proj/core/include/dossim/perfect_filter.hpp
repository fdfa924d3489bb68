#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "dossim/bloom_filter.hpp"
#include "dossim/types.hpp"

namespace dossim {

// Exact record of squashed PCs, one record per squash, each tied to the
// youngest handle present at that squash. Expiry follows the same deferral
// rule as RollingFilters so both can run in lockstep.
class PerfectFilter {
 public:
  struct Record {
    std::vector<Pc> pcs;  // sorted, unique
    std::optional<Seq> assoc_handle;
    std::optional<std::uint64_t> clear_deadline;

    friend bool operator==(const Record&, const Record&) = default;
  };

  explicit PerfectFilter(std::uint64_t window_len) : window_len_(window_len) {}

  void record(std::span<const Pc> squashed_pcs, std::optional<Seq> youngest_handle,
              std::uint64_t now);
  bool query(Pc pc) const noexcept;
  FilterEvents on_handle_safe(Seq safe_seq, std::uint64_t now);
  FilterEvents tick(std::uint64_t now);

  std::uint64_t window_len() const noexcept { return window_len_; }
  const std::vector<Record>& records() const noexcept { return records_; }
  void restore(std::vector<Record> records);

  friend bool operator==(const PerfectFilter& a, const PerfectFilter& b) {
    return a.window_len_ == b.window_len_ && a.records_ == b.records_;
  }

 private:
  void add_live(const Record& r);
  void drop_live(const Record& r);

  std::uint64_t window_len_;
  std::vector<Record> records_;
  std::unordered_map<Pc, std::uint32_t> live_;  // pc -> number of live records holding it
};

}  // namespace dossim
