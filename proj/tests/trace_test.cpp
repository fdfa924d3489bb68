#include <gtest/gtest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>

#include "dossim/error.hpp"
#include "dossim/trace.hpp"

using namespace dossim;

namespace {

std::size_t misses(const Trace& t) {
  return static_cast<std::size_t>(std::count_if(t.instructions.begin(), t.instructions.end(),
                                                [](const Instruction& i) { return i.misspeculates; }));
}

std::size_t shadows(const Trace& t) {
  return static_cast<std::size_t>(std::count_if(t.instructions.begin(), t.instructions.end(),
                                                [](const Instruction& i) { return i.shadow.has_value(); }));
}

}  // namespace

// Expected counts come from tests/oracles/loop_selection.py.
TEST(LoopTrace, SelectionMatchesOracle) {
  EXPECT_EQ(misses(gen_loop_trace(8, 100, 0.1, 7)), 55u);
  EXPECT_EQ(misses(gen_loop_trace(4, 3, 1.0, 1)), 6u);
  EXPECT_EQ(misses(gen_loop_trace(4, 3, 0.0, 1)), 0u);
  EXPECT_EQ(misses(gen_loop_trace(8, 50, 0.25, 42)), 61u);
  EXPECT_EQ(shadows(gen_loop_trace(8, 100, 0.1, 7)), 500u);
}

TEST(LoopTrace, Shape) {
  const Trace t = gen_loop_trace(8, 3, 0.0, 1);
  ASSERT_EQ(t.size(), 24u);
  for (std::size_t i = 0; i < t.size(); ++i) {
    EXPECT_EQ(t.instructions[i].seq, i);
    EXPECT_EQ(t.instructions[i].pc, kLoopBasePc + 4 * (i % 8));
  }
  EXPECT_EQ(t.instructions[1].kind, InstrKind::Load);
  EXPECT_EQ(t.instructions[1].shadow, ShadowKind::M);
  EXPECT_EQ(t.instructions[3].shadow, ShadowKind::C);
  EXPECT_EQ(t.instructions[4].shadow, ShadowKind::D);
  EXPECT_FALSE(t.instructions[0].shadow);
}

TEST(LoopTrace, Deterministic) {
  EXPECT_EQ(gen_loop_trace(16, 40, 0.2, 9), gen_loop_trace(16, 40, 0.2, 9));
  EXPECT_NE(gen_loop_trace(16, 40, 0.2, 9), gen_loop_trace(16, 40, 0.2, 10));
}

TEST(TraceText, RoundTrip) {
  const Trace t = gen_loop_trace(8, 20, 0.3, 3);
  const Trace back = parse_trace(serialize_trace(t));
  EXPECT_EQ(back, t);
  EXPECT_EQ(trace_fingerprint(back), trace_fingerprint(t));
}

TEST(TraceText, FileRoundTrip) {
  const Trace t = gen_loop_trace(8, 5, 0.5, 2);
  const auto path = std::filesystem::temp_directory_path() / "dossim_trace_test.tr";
  save_trace_file(t, path.string());
  EXPECT_EQ(load_trace_file(path.string()), t);
  std::filesystem::remove(path);
}

TEST(TraceText, CommentsAndBlankLines) {
  const Trace t = parse_trace("# a comment\n\n0 0x10 PLAIN - 1 1\n1 0x14 BRANCH C 1 3 MISS # trailing\n");
  ASSERT_EQ(t.size(), 2u);
  EXPECT_TRUE(t.instructions[1].misspeculates);
  EXPECT_EQ(t.instructions[1].resolve_latency, 3u);
}

TEST(TraceText, ErrorsNameLineAndField) {
  auto field_of = [](const char* text) {
    try {
      parse_trace(text);
    } catch (const ParseError& e) {
      return std::to_string(e.line()) + ":" + e.field();
    }
    return std::string("no error");
  };
  EXPECT_EQ(field_of("0 0x10 PLAIN - 1 1\n1 zz PLAIN - 1 1\n"), "2:pc");
  EXPECT_EQ(field_of("0 0x10 JUMP - 1 1\n"), "1:kind");
  EXPECT_EQ(field_of("0 0x10 LOAD Q 1 1\n"), "1:shadow");
  EXPECT_EQ(field_of("0 0x10 PLAIN - 0 1\n"), "1:instruction");
  EXPECT_EQ(field_of("0 0x10 PLAIN - 1 1\n0 0x14 PLAIN - 1 1\n"), "2:seq");
  EXPECT_EQ(field_of("0 0x10 PLAIN - 1 1 MISS\n"), "1:instruction");
  EXPECT_EQ(field_of("0 0x10 PLAIN - 1 1 WHAT\n"), "1:flag");
  EXPECT_EQ(field_of("0 0x10 PLAIN -\n"), "1:line");
}

TEST(Instruction, Validate) {
  Instruction in;
  EXPECT_NO_THROW(validate(in));
  in.kind = InstrKind::SideChannelTransmit;
  in.shadow = ShadowKind::C;
  EXPECT_THROW(validate(in), ConfigError);
  in = Instruction{};
  in.misspeculates = true;
  EXPECT_THROW(validate(in), ConfigError);
  in = Instruction{};
  in.exec_latency = 0;
  EXPECT_THROW(validate(in), ConfigError);
}
