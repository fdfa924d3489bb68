#pragma once

#include <cstddef>
#include <deque>
#include <optional>
#include <vector>

#include "dossim/instruction.hpp"
#include "dossim/types.hpp"

namespace dossim {

// FIFO of in-flight potential replay handles. An entry leaves only from the
// head, once it is resolved or was squashed; anything behind an unresolved
// entry is still shadowed by it and stays.
class HandleQueue {
 public:
  struct Entry {
    Seq seq = 0;
    ShadowKind kind = ShadowKind::C;
    bool resolved = false;
    bool squashed = false;

    friend bool operator==(const Entry&, const Entry&) = default;
  };

  explicit HandleQueue(std::size_t capacity = 0) : capacity_(capacity) {}

  // Throws InvariantError unless seq is younger than the current tail, or
  // when the queue is at capacity.
  void push_handle(Seq seq, ShadowKind kind);

  std::optional<Seq> youngest_handle() const noexcept;
  std::optional<Seq> oldest_handle() const noexcept;

  void mark_resolved(Seq seq);
  // Flags every entry younger than `seq`, which must be queued.
  void mark_squashed_after(Seq seq);
  // Same, for a squash caused by a non-handle; `seq` need not be queued.
  void flag_younger_than(Seq seq) noexcept;

  // Removes the resolved/squashed prefix and returns the removed seqs in order.
  std::vector<Seq> pop_safe();

  bool contains(Seq seq) const noexcept;
  const Entry* find(Seq seq) const noexcept;
  bool full() const noexcept { return capacity_ != 0 && entries_.size() >= capacity_; }
  bool empty() const noexcept { return entries_.empty(); }
  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  const std::deque<Entry>& entries() const noexcept { return entries_; }

  void restore(std::deque<Entry> entries);

  friend bool operator==(const HandleQueue&, const HandleQueue&) = default;

 private:
  Entry* find_mut(Seq seq) noexcept;

  std::size_t capacity_;
  std::deque<Entry> entries_;
};

}  // namespace dossim
