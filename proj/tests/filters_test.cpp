#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "dossim/bloom_filter.hpp"
#include "dossim/error.hpp"
#include "dossim/perfect_filter.hpp"

using namespace dossim;

namespace {

BloomHashes h(Pc pc, std::uint32_t m = 64, std::uint32_t k = 2) { return compute_hashes(pc, m, k); }

std::uint32_t popcount(const BloomFilter& f) {
  std::uint32_t n = 0;
  for (std::uint32_t b = 0; b < f.size(); ++b) n += f.test(b);
  return n;
}

}  // namespace

TEST(BloomFilter, InsertThenQueryHits) {
  BloomFilter f(64);
  EXPECT_FALSE(f.contains(h(0x40)));
  f.insert(h(0x40));
  EXPECT_TRUE(f.contains(h(0x40)));
  EXPECT_EQ(f.set_count(), popcount(f));
}

TEST(BloomFilter, FullFilterIsIdempotent) {
  BloomFilter f(8);
  for (Pc pc = 0; f.set_count() < 8; pc += 4) f.insert(h(pc, 8));
  f.insert(h(0x999, 8));
  EXPECT_EQ(f.set_count(), 8u);
  EXPECT_TRUE(f.contains(h(0x12345, 8)));
}

TEST(BloomFilter, ClearIsBulk) {
  BloomFilter f(64);
  for (Pc pc = 0; pc < 40; pc += 4) f.insert(h(pc));
  f.clear();
  EXPECT_TRUE(f.empty());
  EXPECT_EQ(popcount(f), 0u);
}

TEST(BloomFilter, BytesRoundTrip) {
  BloomFilter f(128);
  for (Pc pc = 0; pc < 100; pc += 12) f.insert(h(pc, 128, 3));
  EXPECT_EQ(BloomFilter::from_bytes(128, f.to_bytes()), f);
}

TEST(BloomFilter, SetCountTracksPopcount) {
  std::mt19937_64 rng(5);
  BloomFilter f(256);
  for (int i = 0; i < 300; ++i) {
    f.insert(compute_hashes(rng(), 256, 3));
    ASSERT_EQ(f.set_count(), popcount(f));
  }
}

// Empirical FP rate of fresh PCs should follow (set_count / m)^k.
TEST(BloomFilter, FalsePositiveRateMatchesFillRatio) {
  constexpr std::uint32_t m = 256, k = 2;
  std::mt19937_64 rng(77);
  for (int n : {16, 48, 96}) {
    BloomFilter f(m);
    for (int i = 0; i < n; ++i) f.insert(compute_hashes(rng(), m, k));
    const double expected = std::pow(double(f.set_count()) / m, k);
    int hits = 0;
    constexpr int trials = 40000;
    for (int i = 0; i < trials; ++i) hits += f.contains(compute_hashes(rng(), m, k));
    const double got = double(hits) / trials;
    EXPECT_NEAR(got, expected, 0.15 * expected + 0.003) << "n=" << n;
  }
}

TEST(FilterConfig, Validation) {
  FilterConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.saturation_threshold(), 32u);
  c.bits = 48;
  EXPECT_THROW(c.validate(), ConfigError);
  c = FilterConfig{};
  c.count = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = FilterConfig{};
  c.hashes = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = FilterConfig{};
  c.threshold = 65;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(RollingFilters, QueryChecksEveryFilter) {
  FilterConfig c;
  c.bits = 8;
  c.threshold = 1;
  RollingFilters rf(c, 4);
  EXPECT_FALSE(rf.query(rf.hashes_for(0x10)));
  const BloomHashes a[] = {rf.hashes_for(0x10)};
  const auto ev = rf.record_squash(a, Seq{3}, 0);
  EXPECT_EQ(ev.rotations, 1u);
  EXPECT_EQ(rf.active_index(), 1u);
  EXPECT_TRUE(rf.slots()[1].filter.empty());
  EXPECT_TRUE(rf.query(rf.hashes_for(0x10)));  // lives in the inactive filter
}

TEST(RollingFilters, RotationRules) {
  FilterConfig c;
  c.bits = 16;
  c.threshold = 8;
  RollingFilters rf(c, 4);
  // empty record: association only, no rotation
  EXPECT_EQ(rf.record_squash({}, Seq{1}, 0).rotations, 0u);
  EXPECT_EQ(rf.slots()[0].assoc_handle, Seq{1});
  EXPECT_FALSE(rf.maybe_rotate());

  std::vector<BloomHashes> many;
  for (Pc pc = 0; pc < 64; pc += 4) many.push_back(rf.hashes_for(pc));
  rf.record_squash(many, Seq{2}, 0);
  ASSERT_EQ(rf.active_index(), 1u);
  // slot 0 is still waiting to be cleared; saturating slot 1 cannot rotate back
  rf.record_squash(many, Seq{5}, 0);
  EXPECT_EQ(rf.active_index(), 1u);
  EXPECT_GE(rf.active().filter.set_count(), 8u);
  EXPECT_FALSE(rf.maybe_rotate());
}

TEST(RollingFilters, ClearWaitsForAssociatedHandle) {
  FilterConfig c;
  c.bits = 64;
  RollingFilters rf(c, 10);
  const BloomHashes a[] = {rf.hashes_for(0x20)};
  rf.record_squash(a, Seq{7}, 0);
  EXPECT_EQ(rf.on_handle_safe(6, 5).clears, 0u);
  EXPECT_FALSE(rf.slots()[0].clear_deadline);
  EXPECT_EQ(rf.on_handle_safe(7, 5).clears, 0u);
  EXPECT_EQ(rf.slots()[0].clear_deadline, std::uint64_t{15});
  EXPECT_EQ(rf.tick(14).clears, 0u);
  EXPECT_TRUE(rf.query(rf.hashes_for(0x20)));
  EXPECT_EQ(rf.tick(15).clears, 1u);
  EXPECT_FALSE(rf.query(rf.hashes_for(0x20)));
  EXPECT_FALSE(rf.slots()[0].assoc_handle);
}

TEST(RollingFilters, ReassociationCancelsPendingClear) {
  RollingFilters rf(FilterConfig{}, 10);
  const BloomHashes a[] = {rf.hashes_for(0x20)};
  rf.record_squash(a, Seq{7}, 0);
  rf.on_handle_safe(7, 0);
  ASSERT_TRUE(rf.slots()[0].clear_deadline);
  rf.record_squash(a, Seq{9}, 3);
  EXPECT_FALSE(rf.slots()[0].clear_deadline);
  EXPECT_EQ(rf.tick(100).clears, 0u);
}

TEST(RollingFilters, ZeroWindowClearsImmediately) {
  RollingFilters rf(FilterConfig{}, 0);
  const BloomHashes a[] = {rf.hashes_for(0x20)};
  rf.record_squash(a, Seq{7}, 0);
  EXPECT_EQ(rf.on_handle_safe(7, 0).clears, 1u);
  EXPECT_TRUE(rf.active().filter.empty());
}

TEST(RollingFilters, EmptyQueueSquashDefersOneWindow) {
  RollingFilters rf(FilterConfig{}, 8);
  const BloomHashes a[] = {rf.hashes_for(0x20)};
  rf.record_squash(a, std::nullopt, 4);
  EXPECT_EQ(rf.slots()[0].clear_deadline, std::uint64_t{12});
  EXPECT_EQ(rf.tick(11).clears, 0u);
  EXPECT_EQ(rf.tick(12).clears, 1u);
}

TEST(RollingFilters, ThreeFilterRing) {
  FilterConfig c;
  c.bits = 8;
  c.count = 3;
  c.threshold = 1;
  RollingFilters rf(c, 0);
  for (Seq s = 1; s <= 3; ++s) {
    const BloomHashes a[] = {rf.hashes_for(s * 4)};
    rf.record_squash(a, s, 0);
  }
  // slots 0 and 1 are waiting; slot 2 is active and cannot rotate into slot 0
  EXPECT_EQ(rf.active_index(), 2u);
  const auto ev = rf.on_handle_safe(1, 0);
  EXPECT_EQ(ev.clears, 1u);
  EXPECT_EQ(ev.rotations, 1u);
  EXPECT_EQ(rf.active_index(), 0u);
}

TEST(PerfectFilter, ExactMembership) {
  PerfectFilter pf(4);
  const Pc a[] = {0x10, 0x20};
  pf.record(a, Seq{3}, 0);
  EXPECT_TRUE(pf.query(0x10));
  EXPECT_FALSE(pf.query(0x30));
  pf.on_handle_safe(3, 1);
  EXPECT_TRUE(pf.query(0x10));
  EXPECT_EQ(pf.tick(5).clears, 1u);
  EXPECT_FALSE(pf.query(0x10));
  EXPECT_TRUE(pf.records().empty());
}

TEST(PerfectFilter, OverlappingRecordsExpireIndependently) {
  PerfectFilter pf(0);
  const Pc a[] = {0x10, 0x20};
  const Pc b[] = {0x20};
  pf.record(a, Seq{3}, 0);
  pf.record(b, Seq{8}, 0);
  pf.on_handle_safe(3, 0);
  EXPECT_FALSE(pf.query(0x10));
  EXPECT_TRUE(pf.query(0x20));
  pf.on_handle_safe(8, 0);
  EXPECT_FALSE(pf.query(0x20));
}

// Lockstep: on an identical squash/safe history a perfect hit implies a Bloom hit.
TEST(Filters, PerfectHitsAreBloomHits) {
  std::mt19937_64 rng(2024);
  FilterConfig c;
  c.bits = 32;
  RollingFilters rf(c, 6);
  PerfectFilter pf(6);
  std::uint64_t now = 0;
  Seq next_handle = 1, oldest_live = 1;
  for (int step = 0; step < 20000; ++step) {
    now += rng() % 3;
    switch (rng() % 3) {
      case 0: {
        std::set<Pc> pcs;
        for (int i = 0, n = int(rng() % 6); i < n; ++i) pcs.insert(0x1000 + 4 * (rng() % 40));
        std::vector<Pc> v(pcs.begin(), pcs.end());
        std::vector<BloomHashes> hs;
        for (Pc pc : v) hs.push_back(rf.hashes_for(pc));
        // the youngest queued handle never moves backwards; none means all are safe
        std::optional<Seq> youngest;
        if (rng() % 5) youngest = next_handle++;
        else if (oldest_live < next_handle) youngest = next_handle - 1;
        rf.record_squash(hs, youngest, now);
        pf.record(v, youngest, now);
        break;
      }
      case 1:
        if (oldest_live < next_handle) {
          rf.on_handle_safe(oldest_live, now);
          pf.on_handle_safe(oldest_live, now);
          ++oldest_live;
        }
        break;
      default:
        rf.tick(now);
        pf.tick(now);
    }
    for (Pc pc = 0x1000; pc < 0x1000 + 160; pc += 4) {
      if (pf.query(pc)) {
        ASSERT_TRUE(rf.query(rf.hashes_for(pc))) << "step " << step;
      }
    }
  }
}
