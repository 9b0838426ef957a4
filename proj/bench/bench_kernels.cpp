// Serial reference kernels against their OpenMP versions.

#include <benchmark/benchmark.h>

#include <array>
#include <random>
#include <vector>

#include "compstyle/kernels.hpp"

using namespace compstyle;
namespace k = compstyle::kernels;

namespace {

ImageBuffer image(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  ImageBuffer img(n, n);
  for (auto& v : img.values) v = u(rng);
  return img;
}

BinaryMask mask(int n) {
  BinaryMask m(n, n);
  for (std::size_t i = 0; i < m.bits.size(); ++i) m.bits[i] = (i / 7) % 2;
  return m;
}

k::ConvLayer layer(int in, int out) {
  std::mt19937_64 rng(3);
  std::normal_distribution<float> g(0.0f, 0.1f);
  k::ConvLayer l;
  l.in_channels = in;
  l.out_channels = out;
  l.stride = 2;
  l.weights.resize(static_cast<std::size_t>(in) * out * 9);
  for (auto& w : l.weights) w = g(rng);
  l.bias.assign(out, 0.01f);
  return l;
}

const std::array<std::array<double, 3>, 5> kPalette{{{0.9, 0.72, 0.2}, {0.12, 0.28, 0.85}, {0.9, 0.9, 0.9},
                                                      {0.8, 0.18, 0.12}, {0.2, 0.75, 0.3}}};

template <bool Parallel>
void BM_sobel(benchmark::State& state) {
  const auto img = image(static_cast<int>(state.range(0)), 1);
  for (auto _ : state) {
    auto e = Parallel ? k::parallel::sobel_magnitude(img) : k::serial::sobel_magnitude(img);
    benchmark::DoNotOptimize(e.values.data());
  }
}

template <bool Parallel>
void BM_compose(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto a = image(n, 1), b = image(n, 2);
  const auto m = mask(n);
  for (auto _ : state) {
    auto c = Parallel ? k::parallel::compose_foreground(a, b, m) : k::serial::compose_foreground(a, b, m);
    benchmark::DoNotOptimize(c.values.data());
  }
}

template <bool Parallel>
void BM_conv(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  k::Tensor3 x(16, n, n);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (auto& v : x.values) v = u(rng);
  const auto l = layer(16, 32);
  for (auto _ : state) {
    auto y = Parallel ? k::parallel::conv3x3_relu(x, l) : k::serial::conv3x3_relu(x, l);
    benchmark::DoNotOptimize(y.values.data());
  }
}

template <bool Parallel>
void BM_poly_kernel(benchmark::State& state) {
  const int rows = static_cast<int>(state.range(0)), dim = 112;
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  std::vector<double> a(static_cast<std::size_t>(rows) * dim), b(a.size());
  for (auto& v : a) v = g(rng);
  for (auto& v : b) v = g(rng);
  for (auto _ : state) {
    const double s = Parallel ? k::parallel::poly_kernel_sum(a, b, rows, rows, dim, false)
                              : k::serial::poly_kernel_sum(a, b, rows, rows, dim, false);
    benchmark::DoNotOptimize(s);
  }
}

template <bool Parallel>
void BM_palette(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto img = image(n, 4);
  const auto m = mask(n);
  for (auto _ : state) {
    auto c = Parallel ? k::parallel::classify_palette(img, m, kPalette) : k::serial::classify_palette(img, m, kPalette);
    benchmark::DoNotOptimize(c.labels.data());
  }
}

}  // namespace

BENCHMARK(BM_sobel<false>)->Arg(128)->Arg(512);
BENCHMARK(BM_sobel<true>)->Arg(128)->Arg(512);
BENCHMARK(BM_compose<false>)->Arg(128)->Arg(512);
BENCHMARK(BM_compose<true>)->Arg(128)->Arg(512);
BENCHMARK(BM_conv<false>)->Arg(64)->Arg(128);
BENCHMARK(BM_conv<true>)->Arg(64)->Arg(128);
BENCHMARK(BM_poly_kernel<false>)->Arg(100)->Arg(400);
BENCHMARK(BM_poly_kernel<true>)->Arg(100)->Arg(400);
BENCHMARK(BM_palette<false>)->Arg(128)->Arg(512);
BENCHMARK(BM_palette<true>)->Arg(128)->Arg(512);

BENCHMARK_MAIN();
