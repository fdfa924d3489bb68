#include "dossim/handle_queue.hpp"

#include <algorithm>
#include <string>
#include <utility>

#include "dossim/error.hpp"

namespace dossim {

void HandleQueue::push_handle(Seq seq, ShadowKind kind) {
  if (!entries_.empty() && seq <= entries_.back().seq) {
    throw InvariantError("handle queue push out of order: seq " + std::to_string(seq) +
                         " after tail " + std::to_string(entries_.back().seq));
  }
  if (full()) throw InvariantError("handle queue full");
  entries_.push_back(Entry{seq, kind, false, false});
}

std::optional<Seq> HandleQueue::youngest_handle() const noexcept {
  if (entries_.empty()) return std::nullopt;
  return entries_.back().seq;
}

std::optional<Seq> HandleQueue::oldest_handle() const noexcept {
  if (entries_.empty()) return std::nullopt;
  return entries_.front().seq;
}

void HandleQueue::mark_resolved(Seq seq) {
  Entry* e = find_mut(seq);
  if (!e) throw InvariantError("mark_resolved: seq " + std::to_string(seq) + " not in handle queue");
  e->resolved = true;
}

void HandleQueue::mark_squashed_after(Seq seq) {
  if (!contains(seq)) {
    throw InvariantError("mark_squashed_after: seq " + std::to_string(seq) + " not in handle queue");
  }
  flag_younger_than(seq);
}

void HandleQueue::flag_younger_than(Seq seq) noexcept {
  // entries are seq-ordered, so the squashed region is a suffix
  for (auto it = entries_.rbegin(); it != entries_.rend() && it->seq > seq; ++it) {
    it->squashed = true;
  }
}

std::vector<Seq> HandleQueue::pop_safe() {
  std::vector<Seq> popped;
  while (!entries_.empty() && (entries_.front().resolved || entries_.front().squashed)) {
    popped.push_back(entries_.front().seq);
    entries_.pop_front();
  }
  return popped;
}

bool HandleQueue::contains(Seq seq) const noexcept { return find(seq) != nullptr; }

const HandleQueue::Entry* HandleQueue::find(Seq seq) const noexcept {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), seq,
                             [](const Entry& e, Seq s) { return e.seq < s; });
  return it != entries_.end() && it->seq == seq ? &*it : nullptr;
}

HandleQueue::Entry* HandleQueue::find_mut(Seq seq) noexcept {
  return const_cast<Entry*>(std::as_const(*this).find(seq));
}

void HandleQueue::restore(std::deque<Entry> entries) {
  for (std::size_t i = 1; i < entries.size(); ++i) {
    if (entries[i].seq <= entries[i - 1].seq) throw InvariantError("restored handle queue out of order");
  }
  if (capacity_ != 0 && entries.size() > capacity_) throw InvariantError("restored handle queue over capacity");
  entries_ = std::move(entries);
}

}  // namespace dossim
