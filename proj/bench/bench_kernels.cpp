// Parallel kernels against their serial references, plus one full training
// step of the toy model.
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "vpp/kernels.hpp"
#include "vpp/sweep.hpp"

namespace {

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

template <bool Parallel>
void BM_Gemm(benchmark::State& st) {
  const int n = int(st.range(0)), k = int(st.range(1)), m = int(st.range(2));
  const auto a = noise(std::size_t(n) * k, 1), b = noise(std::size_t(k) * m, 2);
  std::vector<double> c(std::size_t(n) * m);
  for (auto _ : st) {
    if constexpr (Parallel) vpp::kernels::gemm_nn(a.data(), b.data(), c.data(), n, k, m, false);
    else vpp::reference::gemm_nn(a.data(), b.data(), c.data(), n, k, m, false);
    benchmark::DoNotOptimize(c.data());
  }
  st.SetItemsProcessed(st.iterations() * long(n) * k * m);
}

template <bool Parallel>
void BM_Resize(benchmark::State& st) {
  const int in = int(st.range(0)), out = int(st.range(1));
  const auto src = noise(std::size_t(in) * in * 3, 3);
  std::vector<double> dst(std::size_t(out) * out * 3);
  for (auto _ : st) {
    if constexpr (Parallel) vpp::kernels::resize_bilinear(src.data(), in, in, 3, dst.data(), out, out);
    else vpp::reference::resize_bilinear(src.data(), in, in, 3, dst.data(), out, out);
    benchmark::DoNotOptimize(dst.data());
  }
}

template <bool Parallel>
void BM_Blend(benchmark::State& st) {
  const std::size_t px = std::size_t(st.range(0)) * st.range(0);
  const auto x = noise(px * 3, 4), p = noise(px * 3, 5);
  std::vector<unsigned char> mask(px, 1);
  std::vector<double> out(px * 3);
  for (auto _ : st) {
    if constexpr (Parallel) vpp::kernels::overlay_blend(x.data(), p.data(), mask.data(), px, 3, 0.95, out.data());
    else vpp::reference::overlay_blend(x.data(), p.data(), mask.data(), px, 3, 0.95, out.data());
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_TrainSample(benchmark::State& st) {
  vpp::ExperimentConfig e = vpp::toy_experiment();
  e.n_train = 16;
  e.n_test = 2;
  const vpp::PreparedCorpus pc = vpp::prepare_corpus(e);
  const vpp::MiniMLLM model(e.model, pc.vocab);
  const vpp::ModelParams params = model.init_params();
  vpp::Gradients g;
  std::size_t i = 0;
  for (auto _ : st) {
    benchmark::DoNotOptimize(model.loss_and_grad(params, pc.train[i++ % pc.train.size()], g));
  }
}

}  // namespace

BENCHMARK(BM_Gemm<true>)->Args({64, 192, 32})->Args({128, 32, 128})->Args({336, 336, 64});
BENCHMARK(BM_Gemm<false>)->Args({64, 192, 32})->Args({128, 32, 128})->Args({336, 336, 64});
BENCHMARK(BM_Resize<true>)->Args({336, 64})->Args({336, 672});
BENCHMARK(BM_Resize<false>)->Args({336, 64})->Args({336, 672});
BENCHMARK(BM_Blend<true>)->Arg(336);
BENCHMARK(BM_Blend<false>)->Arg(336);
BENCHMARK(BM_TrainSample)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
