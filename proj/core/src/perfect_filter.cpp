#include "dossim/perfect_filter.hpp"

#include <algorithm>

namespace dossim {

void PerfectFilter::record(std::span<const Pc> squashed_pcs, std::optional<Seq> youngest_handle,
                           std::uint64_t now) {
  Record r;
  r.pcs.assign(squashed_pcs.begin(), squashed_pcs.end());
  std::sort(r.pcs.begin(), r.pcs.end());
  r.pcs.erase(std::unique(r.pcs.begin(), r.pcs.end()), r.pcs.end());
  if (!r.pcs.empty()) {
    r.assoc_handle = youngest_handle;
    if (!youngest_handle) r.clear_deadline = now + window_len_;
    add_live(r);
    records_.push_back(std::move(r));
  }
  tick(now);
}

bool PerfectFilter::query(Pc pc) const noexcept { return live_.contains(pc); }

FilterEvents PerfectFilter::on_handle_safe(Seq safe_seq, std::uint64_t now) {
  for (auto& r : records_) {
    if (r.assoc_handle && *r.assoc_handle <= safe_seq && !r.clear_deadline) {
      r.clear_deadline = now + window_len_;
    }
  }
  return tick(now);
}

FilterEvents PerfectFilter::tick(std::uint64_t now) {
  FilterEvents ev;
  auto expired = [now](const Record& r) { return r.clear_deadline && *r.clear_deadline <= now; };
  for (const auto& r : records_) {
    if (expired(r)) {
      drop_live(r);
      ++ev.clears;
    }
  }
  std::erase_if(records_, expired);
  return ev;
}

void PerfectFilter::restore(std::vector<Record> records) {
  records_ = std::move(records);
  live_.clear();
  for (const auto& r : records_) add_live(r);
}

void PerfectFilter::add_live(const Record& r) {
  for (Pc pc : r.pcs) ++live_[pc];
}

void PerfectFilter::drop_live(const Record& r) {
  for (Pc pc : r.pcs) {
    auto it = live_.find(pc);
    if (--it->second == 0) live_.erase(it);
  }
}

}  // namespace dossim
