#include <gtest/gtest.h>

#include "dossim/error.hpp"
#include "dossim/policy.hpp"
#include "support.hpp"

using namespace dossim;
using namespace dossim::testing;

namespace {

DefenseConfig defense(PolicyKind p, bool oracle = false) {
  DefenseConfig d;
  d.policy = p;
  d.hq_capacity = 16;
  d.window_len = 8;
  d.fp_oracle = oracle;
  return d;
}

RobEntry entry(const PolicyState& ps, Instruction in) {
  RobEntry e;
  e.instr = in;
  e.hashes = ps.hashes_for(in.pc);
  return e;
}

SquashRecord squash(const PolicyState& ps, Seq cause, std::vector<Pc> pcs) {
  SquashRecord r;
  r.cause_seq = cause;
  for (Pc pc : pcs) {
    r.squashed_issued_pcs.push_back(pc);
    r.squashed_issued_hashes.push_back(ps.hashes_for(pc));
  }
  r.youngest_handle = ps.handle_queue()->youngest_handle();
  return r;
}

}  // namespace

TEST(Policy, Names) {
  for (PolicyKind p : kPolicies) EXPECT_EQ(parse_policy(to_string(p)), p);
  EXPECT_FALSE(parse_policy("dos"));
  EXPECT_EQ(to_string(PolicyKind::DosBloom), "dos-bloom");
}

TEST(Policy, StateShapePerVariant) {
  const PolicyState base(defense(PolicyKind::Baseline), 0);
  EXPECT_FALSE(base.handle_queue());
  EXPECT_FALSE(base.bloom());
  EXPECT_FALSE(base.perfect());
  const PolicyState all(defense(PolicyKind::DelayAll), 0);
  EXPECT_TRUE(all.handle_queue());
  EXPECT_FALSE(all.bloom());
  const PolicyState perfect(defense(PolicyKind::DosPerfect), 0);
  EXPECT_TRUE(perfect.perfect());
  EXPECT_FALSE(perfect.bloom());
  const PolicyState bloom(defense(PolicyKind::DosBloom, true), 0);
  EXPECT_TRUE(bloom.bloom());
  EXPECT_TRUE(bloom.perfect());
}

TEST(Policy, BaselineAlwaysAllows) {
  PolicyState ps(defense(PolicyKind::Baseline), 0);
  EXPECT_FALSE(ps.issue_decision(entry(ps, plain(5, 0x40))).delay);
}

TEST(Policy, DelayAllWaitsForOlderHandles) {
  PolicyState ps(defense(PolicyKind::DelayAll), 0);
  ps.on_dispatch(entry(ps, handle(2, 0x10)));
  const Decision d = ps.issue_decision(entry(ps, plain(3, 0x14)));
  EXPECT_TRUE(d.delay);
  EXPECT_EQ(d.reason, DelayReason::UnsafeOlderHandle);
  EXPECT_FALSE(ps.issue_decision(entry(ps, plain(1, 0x0c))).delay);
  ps.mark_resolved(2);
  ps.release_safe_handles(0);
  EXPECT_FALSE(ps.issue_decision(entry(ps, plain(3, 0x14))).delay);
}

TEST(Policy, DosBloomDelaysSquashedPcsWhileShadowed) {
  PolicyState ps(defense(PolicyKind::DosBloom, true), 0);
  EXPECT_FALSE(ps.issue_decision(entry(ps, plain(3, 0x14))).delay);  // empty filters
  ps.on_dispatch(entry(ps, handle(2, 0x10)));
  ps.on_dispatch(entry(ps, handle(4, 0x18)));
  ps.on_squash(squash(ps, 2, {0x14, 0x18}), 0);
  EXPECT_TRUE(ps.handle_queue()->find(4)->squashed);
  const Decision d = ps.issue_decision(entry(ps, plain(7, 0x14)));
  EXPECT_TRUE(d.delay);
  EXPECT_EQ(d.reason, DelayReason::SquashedPcHit);
  EXPECT_TRUE(d.perfect_hit);
  EXPECT_FALSE(d.false_positive);
  EXPECT_FALSE(ps.issue_decision(entry(ps, plain(8, 0x7000))).delay);
}

TEST(Policy, NonSpeculativeHitIsAllowed) {
  PolicyState ps(defense(PolicyKind::DosPerfect), 0);
  ps.on_dispatch(entry(ps, handle(2, 0x10)));
  ps.on_squash(squash(ps, 2, {0x14}), 0);
  // older than every queued handle: cannot be squashed any more
  EXPECT_FALSE(ps.issue_decision(entry(ps, plain(1, 0x14))).delay);
  EXPECT_TRUE(ps.issue_decision(entry(ps, plain(3, 0x14))).delay);
}

TEST(Policy, BaselineAndDelayAllLeaveFiltersAlone) {
  PolicyState ps(defense(PolicyKind::DelayAll), 0);
  ps.on_dispatch(entry(ps, handle(2, 0x10)));
  const auto ev = ps.on_squash(squash(ps, 2, {0x14}), 0);
  EXPECT_EQ(ev.clears + ev.rotations, 0u);
  EXPECT_FALSE(ps.bloom());
}

TEST(Policy, SafeHandlesReleaseFilters) {
  PolicyState ps(defense(PolicyKind::DosPerfect), 0);
  ps.on_dispatch(entry(ps, handle(2, 0x10)));
  ps.on_squash(squash(ps, 2, {0x14}), 0);
  ps.mark_resolved(2);
  std::vector<Seq> popped;
  ps.release_safe_handles(10, &popped);
  EXPECT_EQ(popped, (std::vector<Seq>{2}));
  EXPECT_TRUE(ps.perfect()->query(0x14));  // deferred by one window
  EXPECT_EQ(ps.tick(18).clears, 1u);
  EXPECT_FALSE(ps.perfect()->query(0x14));
}

class ContextBlobTest : public ::testing::TestWithParam<PolicyKind> {};

TEST_P(ContextBlobTest, RoundTripPreservesState) {
  PolicyState ps(defense(GetParam(), true), 42);
  if (ps.handle_queue()) {
    ps.on_dispatch(entry(ps, handle(2, 0x10)));
    ps.on_dispatch(entry(ps, handle(5, 0x1c, ShadowKind::E)));
    ps.on_squash(squash(ps, 2, {0x14, 0x18, 0x1c}), 3);
    ps.on_dispatch(entry(ps, handle(9, 0x10)));
    ps.mark_resolved(9);
  }
  const ContextBlob blob = save_context(ps);
  EXPECT_EQ(blob.context_id, 42u);
  const PolicyState back = restore_context(blob, 42);
  EXPECT_EQ(back, ps);
  EXPECT_EQ(save_context(back), blob);
  for (Pc pc : {0x10, 0x14, 0x18, 0x1c, 0x20}) {
    const RobEntry e = entry(ps, plain(10, pc));
    EXPECT_EQ(back.issue_decision(e).delay, ps.issue_decision(e).delay);
  }
}

TEST_P(ContextBlobTest, WrongContextIsRejected) {
  const PolicyState ps(defense(GetParam()), 1);
  EXPECT_THROW(restore_context(save_context(ps), 2), BlobError);
}

TEST_P(ContextBlobTest, CorruptionIsDetected) {
  PolicyState ps(defense(GetParam()), 1);
  ContextBlob blob = save_context(ps);
  for (std::size_t i = 0; i < blob.bytes.size(); ++i) {
    ContextBlob bad = blob;
    bad.bytes[i] ^= 0x20;
    EXPECT_THROW(restore_context(bad, 1), BlobError) << "byte " << i;
  }
  ContextBlob cut = blob;
  cut.bytes.pop_back();
  EXPECT_THROW(restore_context(cut, 1), BlobError);
  EXPECT_THROW(restore_context(ContextBlob{1, {}}, 1), BlobError);
}

INSTANTIATE_TEST_SUITE_P(AllPolicies, ContextBlobTest, ::testing::ValuesIn(kPolicies),
                         [](const auto& info) {
                           std::string n(to_string(info.param));
                           std::erase(n, '-');
                           return n;
                         });

TEST(ContextBlob, BaselineBlobIsMinimal) {
  const PolicyState ps(defense(PolicyKind::Baseline), 0);
  const ContextBlob blob = save_context(ps);
  EXPECT_LE(blob.bytes.size(), 64u);
  EXPECT_EQ(restore_context(blob, 0).kind(), PolicyKind::Baseline);
}

TEST(ContextBlob, HeaderLayout) {
  const PolicyState ps(defense(PolicyKind::DosBloom), 0x0102030405060708ull);
  const auto b = save_context(ps).bytes;
  ASSERT_GE(b.size(), 20u);
  EXPECT_EQ(std::string(b.begin(), b.begin() + 4), "DOSC");
  EXPECT_EQ(b[4], 1);  // version, little-endian
  EXPECT_EQ(b[5], 0);
  EXPECT_EQ(b[6], static_cast<std::uint8_t>(PolicyKind::DosBloom));
  EXPECT_EQ(b[8], 0x08);  // context id, little-endian
  EXPECT_EQ(b[15], 0x01);
}
