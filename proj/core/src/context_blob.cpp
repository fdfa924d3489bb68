#include <cstring>
#include <string>

#include "dossim/error.hpp"
#include "dossim/policy.hpp"

namespace dossim {

namespace {

constexpr std::uint16_t kBlobVersion = 1;
constexpr char kMagic[4] = {'D', 'O', 'S', 'C'};

std::uint32_t fnv1a32(const std::uint8_t* data, std::size_t n) noexcept {
  std::uint32_t h = 0x811c9dc5u;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x01000193u;
  }
  return h;
}

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void opt(const std::optional<std::uint64_t>& v) {
    u8(v ? 1 : 0);
    u64(v.value_or(0));
  }
  void raw(const std::vector<std::uint8_t>& bytes) { out_.insert(out_.end(), bytes.begin(), bytes.end()); }
  std::vector<std::uint8_t>& bytes() { return out_; }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : b_(b) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  std::optional<std::uint64_t> opt() {
    const auto has = u8();
    const auto v = u64();
    if (has > 1) throw BlobError("context blob: bad presence flag");
    return has ? std::optional<std::uint64_t>(v) : std::nullopt;
  }
  std::vector<std::uint8_t> raw(std::size_t n) {
    need(n);
    std::vector<std::uint8_t> out(b_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                  b_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return out;
  }
  void expect_tag(char tag) {
    if (u8() != static_cast<std::uint8_t>(tag)) {
      throw BlobError(std::string("context blob: missing section '") + tag + "'");
    }
  }
  std::size_t pos() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return b_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) throw BlobError("context blob: truncated");
  }
  std::uint64_t le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= std::uint64_t{b_[pos_ + static_cast<std::size_t>(i)]} << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  const std::vector<std::uint8_t>& b_;
  std::size_t pos_ = 0;
};

}  // namespace

class ContextCodec {
 public:
  static ContextBlob save(const PolicyState& s) {
    Writer w;
    for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
    w.u16(kBlobVersion);
    w.u8(static_cast<std::uint8_t>(s.config_.policy));
    w.u8(s.config_.fp_oracle ? 1 : 0);
    w.u64(s.context_id_);
    w.u64(s.config_.hq_capacity);
    w.u64(s.config_.window_len);
    // filter geometry travels even without filters so the restored config is complete
    const FilterConfig& fc = s.config_.filters;
    w.u32(fc.bits);
    w.u32(fc.hashes);
    w.u32(fc.count);
    w.u32(fc.threshold);
    w.u64(fc.salt);

    if (s.hq_) {
      w.u8('Q');
      w.u32(static_cast<std::uint32_t>(s.hq_->size()));
      for (const auto& e : s.hq_->entries()) {
        w.u64(e.seq);
        w.u8(static_cast<std::uint8_t>(e.kind));
        w.u8(static_cast<std::uint8_t>((e.resolved ? 1 : 0) | (e.squashed ? 2 : 0)));
      }
    }
    if (s.bloom_) {
      w.u8('B');
      w.u32(static_cast<std::uint32_t>(s.bloom_->active_index()));
      for (const auto& slot : s.bloom_->slots()) {
        w.opt(slot.assoc_handle);
        w.opt(slot.clear_deadline);
        w.u32(slot.filter.set_count());
        w.raw(slot.filter.to_bytes());
      }
    }
    if (s.perfect_) {
      w.u8('P');
      w.u32(static_cast<std::uint32_t>(s.perfect_->records().size()));
      for (const auto& r : s.perfect_->records()) {
        w.opt(r.assoc_handle);
        w.opt(r.clear_deadline);
        w.u32(static_cast<std::uint32_t>(r.pcs.size()));
        for (Pc pc : r.pcs) w.u64(pc);
      }
    }
    w.u8('E');
    w.u32(fnv1a32(w.bytes().data(), w.bytes().size()));
    return ContextBlob{s.context_id_, std::move(w.bytes())};
  }

  static PolicyState restore(const ContextBlob& blob, ContextId expected) {
    const auto& b = blob.bytes;
    if (b.size() < 5 || std::memcmp(b.data(), kMagic, 4) != 0) throw BlobError("context blob: bad magic");
    const std::size_t body = b.size() - 4;
    std::uint32_t stored = 0;
    for (int i = 0; i < 4; ++i) stored |= std::uint32_t{b[body + static_cast<std::size_t>(i)]} << (8 * i);
    if (stored != fnv1a32(b.data(), body)) throw BlobError("context blob: checksum mismatch");

    Reader r(b);
    r.raw(4);
    if (r.u16() != kBlobVersion) throw BlobError("context blob: unsupported version");
    const auto policy_raw = r.u8();
    if (policy_raw > static_cast<std::uint8_t>(PolicyKind::DosBloom)) throw BlobError("context blob: bad policy");
    const auto flags = r.u8();
    const ContextId id = r.u64();
    if (id != blob.context_id) throw BlobError("context blob: header/context id mismatch");
    if (id != expected) {
      throw BlobError("context blob belongs to context " + std::to_string(id) + ", not " +
                      std::to_string(expected));
    }

    DefenseConfig cfg;
    cfg.policy = static_cast<PolicyKind>(policy_raw);
    cfg.fp_oracle = flags & 1;
    cfg.hq_capacity = r.u64();
    cfg.window_len = r.u64();
    cfg.filters.bits = r.u32();
    cfg.filters.hashes = r.u32();
    cfg.filters.count = r.u32();
    cfg.filters.threshold = r.u32();
    cfg.filters.salt = r.u64();

    PolicyState s = [&] {
      try {
        return PolicyState(cfg, id);
      } catch (const Error& e) {
        throw BlobError(std::string("context blob: bad configuration: ") + e.what());
      }
    }();

    try {
      if (s.hq_) {
        r.expect_tag('Q');
        const auto n = r.u32();
        std::deque<HandleQueue::Entry> entries;
        for (std::uint32_t i = 0; i < n; ++i) {
          HandleQueue::Entry e;
          e.seq = r.u64();
          const auto kind = r.u8();
          const auto f = r.u8();
          if (kind > static_cast<std::uint8_t>(ShadowKind::M) || f > 3) throw BlobError("context blob: bad handle entry");
          e.kind = static_cast<ShadowKind>(kind);
          e.resolved = f & 1;
          e.squashed = f & 2;
          entries.push_back(e);
        }
        s.hq_->restore(std::move(entries));
      }
      if (s.bloom_) {
        r.expect_tag('B');
        const auto active = r.u32();
        std::vector<RollingFilters::Slot> slots;
        for (std::uint32_t i = 0; i < cfg.filters.count; ++i) {
          RollingFilters::Slot slot;
          slot.assoc_handle = r.opt();
          slot.clear_deadline = r.opt();
          const auto set_count = r.u32();
          slot.filter = BloomFilter::from_bytes(cfg.filters.bits, r.raw((cfg.filters.bits + 7) / 8));
          if (slot.filter.set_count() != set_count) throw BlobError("context blob: filter population mismatch");
          slots.push_back(std::move(slot));
        }
        s.bloom_->restore(active, std::move(slots));
      }
      if (s.perfect_) {
        r.expect_tag('P');
        const auto n = r.u32();
        std::vector<PerfectFilter::Record> records;
        for (std::uint32_t i = 0; i < n; ++i) {
          PerfectFilter::Record rec;
          rec.assoc_handle = r.opt();
          rec.clear_deadline = r.opt();
          const auto npcs = r.u32();
          if (npcs > r.remaining() / 8) throw BlobError("context blob: truncated");
          for (std::uint32_t j = 0; j < npcs; ++j) rec.pcs.push_back(r.u64());
          records.push_back(std::move(rec));
        }
        s.perfect_->restore(std::move(records));
      }
    } catch (const InvariantError& e) {
      throw BlobError(std::string("context blob: ") + e.what());
    }
    r.expect_tag('E');
    if (r.remaining() != 4) throw BlobError("context blob: trailing bytes");
    return s;
  }
};

ContextBlob save_context(const PolicyState& state) { return ContextCodec::save(state); }

PolicyState restore_context(const ContextBlob& blob, ContextId expected) {
  return ContextCodec::restore(blob, expected);
}

}  // namespace dossim
