#include <benchmark/benchmark.h>

#include "dossim/bloom_filter.hpp"
#include "dossim/hashing.hpp"
#include "dossim/pipeline.hpp"
#include "dossim/policy.hpp"
#include "dossim/trace.hpp"

using namespace dossim;

static void BM_ComputeHashes(benchmark::State& state) {
  Pc pc = 0x400000;
  for (auto _ : state) {
    benchmark::DoNotOptimize(compute_hashes(pc, 64, static_cast<std::uint32_t>(state.range(0)), 1));
    pc += 4;
  }
}
BENCHMARK(BM_ComputeHashes)->Arg(2)->Arg(4)->Arg(8);

static void BM_BloomInsertQuery(benchmark::State& state) {
  const auto bits = static_cast<std::uint32_t>(state.range(0));
  BloomFilter f(bits);
  Pc pc = 0x400000;
  for (auto _ : state) {
    const BloomHashes h = compute_hashes(pc, bits, 2, 1);
    if (f.set_count() > bits / 2) f.clear();
    f.insert(h);
    benchmark::DoNotOptimize(f.contains(compute_hashes(pc + 64, bits, 2, 1)));
    pc += 4;
  }
}
BENCHMARK(BM_BloomInsertQuery)->Arg(64)->Arg(1024);

static void BM_PipelineRun(benchmark::State& state) {
  const Trace t = gen_loop_trace(128, 40, 0.05, 1);
  MachineConfig m;
  m.policy = static_cast<PolicyKind>(state.range(0));
  m.filters.salt = 1;
  for (auto _ : state) benchmark::DoNotOptimize(Pipeline(t, m).run().cycles);
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * t.size()));
  state.SetLabel(std::string(to_string(m.policy)));
}
BENCHMARK(BM_PipelineRun)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);

static void BM_ContextBlobRoundTrip(benchmark::State& state) {
  const Trace t = gen_loop_trace(64, 4, 0.3, 2);
  MachineConfig m;
  m.policy = PolicyKind::DosBloom;
  m.fp_oracle = true;
  Pipeline p(t, m);
  for (int i = 0; i < 40 && p.step(); ++i) {
  }
  for (auto _ : state) {
    const ContextBlob blob = p.save_context();
    benchmark::DoNotOptimize(restore_context(blob, blob.context_id));
  }
}
BENCHMARK(BM_ContextBlobRoundTrip);

BENCHMARK_MAIN();
