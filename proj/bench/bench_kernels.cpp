// Serial reference kernels against their OpenMP counterparts. The `threads`
// argument caps the worker count of the parallel variant.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "histo/kernels/kernels.hpp"

namespace kern = histo::kern;

namespace {

std::vector<std::uint8_t> random_bytes(std::size_t n, std::uint8_t mod = 0) {
  std::mt19937 gen(17);
  std::vector<std::uint8_t> v(n);
  for (auto& b : v) b = static_cast<std::uint8_t>(mod ? gen() % mod : gen());
  return v;
}

template <bool Parallel>
void BM_ResampleBilinear(benchmark::State& state) {
  kern::set_thread_limit(static_cast<int>(state.range(0)));
  const int w = 2048, h = 1536;
  const auto src = random_bytes(static_cast<std::size_t>(w) * h * 3);
  std::vector<std::uint8_t> dst(455 * 341 * 3);
  const kern::ImageView in{src.data(), w, h, 3};
  const kern::MutableImageView out{dst.data(), 455, 341, 3};
  for (auto _ : state) {
    if constexpr (Parallel)
      kern::parallel::resample_bilinear(in, out);
    else
      kern::reference::resample_bilinear(in, out);
    benchmark::DoNotOptimize(dst.data());
  }
  kern::set_thread_limit(0);
}

template <bool Parallel>
void BM_MedianLabels(benchmark::State& state) {
  kern::set_thread_limit(static_cast<int>(state.range(0)));
  const int n = 512;
  const auto labels = random_bytes(static_cast<std::size_t>(n) * n, 4);
  std::vector<std::uint8_t> out(labels.size());
  const kern::LabelGridView in{labels.data(), n, n};
  for (auto _ : state) {
    if constexpr (Parallel)
      kern::parallel::median_filter_labels(in, 5, kern::MedianMode::kOrdinal, out.data());
    else
      kern::reference::median_filter_labels(in, 5, kern::MedianMode::kOrdinal, out.data());
    benchmark::DoNotOptimize(out.data());
  }
  kern::set_thread_limit(0);
}

template <bool Parallel>
void BM_Conv3x3(benchmark::State& state) {
  kern::set_thread_limit(static_cast<int>(state.range(0)));
  const int batch = 8, size = 32, cin = 64, cout = 32;
  std::mt19937 gen(3);
  std::uniform_real_distribution<float> u(-1.f, 1.f);
  std::vector<float> x(static_cast<std::size_t>(batch) * size * size * cin), y(static_cast<std::size_t>(batch) * size * size * cout);
  std::vector<float> w(static_cast<std::size_t>(cout) * 9 * cin), b(cout);
  for (auto* v : {&x, &w, &b})
    for (auto& e : *v) e = u(gen);
  const kern::FeatureMap<const float> in{x.data(), batch, size, size, cin, 0, cin};
  const kern::FeatureMap<float> out{y.data(), batch, size, size, cout, 0, cout};
  const kern::ConvGeometry g{3, 1, 1};
  for (auto _ : state) {
    if constexpr (Parallel)
      kern::parallel::conv2d_forward<float>(in, w.data(), b.data(), out, g);
    else
      kern::reference::conv2d_forward<float>(in, w.data(), b.data(), out, g);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * batch);
  kern::set_thread_limit(0);
}

}  // namespace

BENCHMARK(BM_ResampleBilinear<false>)->Name("resample_bilinear/reference")->Arg(1);
BENCHMARK(BM_ResampleBilinear<true>)->Name("resample_bilinear/parallel")->Arg(1)->Arg(0);
BENCHMARK(BM_MedianLabels<false>)->Name("median5/reference")->Arg(1);
BENCHMARK(BM_MedianLabels<true>)->Name("median5/parallel")->Arg(1)->Arg(0);
BENCHMARK(BM_Conv3x3<false>)->Name("conv3x3/reference")->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Conv3x3<true>)->Name("conv3x3/parallel")->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
