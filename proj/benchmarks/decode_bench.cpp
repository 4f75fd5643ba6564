#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "speedbias/decode.hpp"
#include "speedbias/quantize.hpp"
#include "speedbias/transformer.hpp"

namespace {

using namespace speedbias;

nmt::ModelConfig bench_config(int encoder_layers, int decoder_layers, bool aan) {
  nmt::ModelConfig cfg;
  cfg.encoder_layers = encoder_layers;
  cfg.decoder_layers = decoder_layers;
  cfg.model_dim = 64;
  cfg.attention_heads = 4;
  cfg.ffn_dim = 128;
  cfg.use_aan = aan;
  cfg.source_vocab = 200;
  cfg.target_vocab = 200;
  cfg.init_seed = 17;
  return cfg;
}

std::vector<int> bench_source(int length) {
  std::mt19937_64 rng(99);
  std::vector<int> ids;
  for (int i = 0; i < length; ++i)
    ids.push_back(3 + static_cast<int>(rng() % 190));
  return ids;
}

// One full greedy decode per iteration; decoder depth and the AAN/standard
// split are the levers the harness measures.
void decode_steps(benchmark::State& state, bool aan) {
  auto params = nmt::init_params(
      bench_config(static_cast<int>(state.range(0)),
                   static_cast<int>(state.range(1)), aan));
  auto source = bench_source(16);
  for (auto _ : state) {
    nmt::DecodeResult res = nmt::decode_greedy(params, source, 24);
    benchmark::DoNotOptimize(res.tokens.data());
  }
}

void BM_greedy_standard(benchmark::State& state) { decode_steps(state, false); }
void BM_greedy_aan(benchmark::State& state) { decode_steps(state, true); }

void BM_beam5(benchmark::State& state) {
  auto params = nmt::init_params(bench_config(6, 6, false));
  auto source = bench_source(16);
  for (auto _ : state) {
    nmt::DecodeResult res = nmt::decode_beam(params, source, 5, 24);
    benchmark::DoNotOptimize(res.tokens.data());
  }
}

void BM_quantize_params(benchmark::State& state) {
  auto params = nmt::init_params(bench_config(6, 6, false));
  for (auto _ : state) {
    nmt::Params q = nmt::quantize_params(params);
    benchmark::DoNotOptimize(q.flat.data());
  }
}

}  // namespace

BENCHMARK(BM_greedy_standard)
    ->Args({6, 6})
    ->Args({10, 2})
    ->Args({6, 1})
    ->Unit(benchmark::kMillisecond);
BENCHMARK(BM_greedy_aan)
    ->Args({6, 6})
    ->Args({10, 2})
    ->Args({6, 1})
    ->Unit(benchmark::kMillisecond);
BENCHMARK(BM_beam5)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_quantize_params)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
