#include <benchmark/benchmark.h>

#include "evomem/attention.hpp"
#include "evomem/attention_tiled.hpp"
#include "evomem/rng.hpp"

namespace {

using namespace evomem;

AttentionProblem make_problem(std::int64_t B, std::int64_t L, NumericFormat fmt) {
  SeededRng rng(42);
  Tensor q = random_uniform({B, L, 2, 8}, fmt, rng);
  Tensor k = random_uniform({B, L, 2, 8}, fmt, rng);
  Tensor v = random_uniform({B, L, 2, 8}, fmt, rng);
  Tensor bias = random_uniform({2, L, L}, fmt, rng);
  return AttentionProblem::make(AttentionVariant::MsaRowWise, std::move(q), std::move(k),
                                std::move(v), std::move(bias));
}

void BM_forward_reference(benchmark::State& state) {
  const AttentionProblem p = make_problem(state.range(0), state.range(1), NumericFormat::F32);
  for (auto _ : state) {
    ForwardResult r = attn_forward_ref(p);
    benchmark::DoNotOptimize(r.output);
  }
}
BENCHMARK(BM_forward_reference)->Args({2, 128})->Args({4, 256});

void BM_forward_tiled(benchmark::State& state) {
  const AttentionProblem p = make_problem(state.range(0), state.range(1), NumericFormat::F32);
  const TileConfig tc;
  for (auto _ : state) {
    AllocationLedger ledger;
    TiledForwardResult r = attn_forward_tiled(p, tc, ledger);
    benchmark::DoNotOptimize(r.output);
    ledger.record_free("tiled/stats", r.stats.logsumexp.emulated_bytes());
  }
}
BENCHMARK(BM_forward_tiled)->Args({2, 128})->Args({4, 256});

void BM_round_bf16(benchmark::State& state) {
  double x = 1.234567;
  for (auto _ : state) {
    x = round_to_format(x + 1e-3, NumericFormat::BF16);
    benchmark::DoNotOptimize(x);
  }
}
BENCHMARK(BM_round_bf16);

void BM_policy_accumulator(benchmark::State& state) {
  for (auto _ : state) {
    PolicyAccumulator acc(AccumPolicy{AccumMode::UpcastF32, true}, NumericFormat::BF16);
    for (int i = 0; i < 4096; ++i) acc.add(1e-3);
    benchmark::DoNotOptimize(acc.value());
  }
}
BENCHMARK(BM_policy_accumulator);

}  // namespace

BENCHMARK_MAIN();
