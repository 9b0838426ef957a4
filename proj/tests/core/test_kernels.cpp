#include <doctest.h>

#include <omp.h>

#include <cmath>
#include <random>

#include "compstyle/kernels.hpp"
#include "../test_util.hpp"

using namespace compstyle;
namespace k = compstyle::kernels;

namespace {

k::ConvLayer random_layer(int in, int out, int stride, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n(0.0f, 0.3f);
  k::ConvLayer l;
  l.in_channels = in;
  l.out_channels = out;
  l.stride = stride;
  l.weights.resize(static_cast<std::size_t>(out) * in * 9);
  l.bias.resize(out);
  for (auto& w : l.weights) w = n(rng);
  for (auto& b : l.bias) b = n(rng);
  return l;
}

struct ThreadCount {
  explicit ThreadCount(int n) : saved(omp_get_max_threads()) { omp_set_num_threads(n); }
  ~ThreadCount() { omp_set_num_threads(saved); }
  int saved;
};

}  // namespace

TEST_CASE("Sobel on a constant image is zero") {
  const ImageBuffer img(7, 9, 0.4f);
  const auto e = k::serial::sobel_magnitude(img);
  for (double v : e.values) CHECK(v == 0.0);
}

TEST_CASE("Sobel on a vertical step, hand convolved") {
  // 5x5, columns 0-1 black, 2-4 white; gray = 1 on the right
  ImageBuffer img(5, 5);
  for (int y = 0; y < 5; ++y)
    for (int x = 2; x < 5; ++x)
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = 1.0f;
  const auto e = k::serial::sobel_magnitude(img);
  const double luma = k::kLumaR + k::kLumaG + k::kLumaB;
  // Gx kernel column weights (1,2,1) sum to 4; Gy is 0 along a vertical step
  for (int y = 0; y < 5; ++y) {
    CHECK(e.at(y, 0) == doctest::Approx(0.0));
    CHECK(e.at(y, 1) == doctest::Approx(4.0 * luma));
    CHECK(e.at(y, 2) == doctest::Approx(4.0 * luma));
    CHECK(e.at(y, 3) == doctest::Approx(0.0));
  }
}

TEST_CASE("Sobel transposes with the image") {
  const auto img = testutil::random_image(6, 8, 4);
  ImageBuffer t(8, 6);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 8; ++x)
      for (int c = 0; c < 3; ++c) t.at(x, y, c) = img.at(y, x, c);
  const auto a = k::serial::sobel_magnitude(img);
  const auto b = k::serial::sobel_magnitude(t);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 8; ++x) CHECK(a.at(y, x) == doctest::Approx(b.at(x, y)).epsilon(1e-12));
}

TEST_CASE("compose_foreground matches a per-pixel loop") {
  const auto a = testutil::random_image(9, 10, 1);
  const auto b = testutil::random_image(9, 10, 2);
  const auto m = testutil::random_binary(9, 10, 3);
  const auto out = k::serial::compose_foreground(a, b, m);
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 10; ++x)
      for (int c = 0; c < 3; ++c) CHECK(out.at(y, x, c) == (m.bits[y * 10 + x] ? a.at(y, x, c) : b.at(y, x, c)));
}

TEST_CASE("poly kernel sum matches a direct double loop") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  const int ra = 4, rb = 3, d = 2;
  std::vector<double> a(ra * d), b(rb * d);
  for (auto& v : a) v = n(rng);
  for (auto& v : b) v = n(rng);
  double full = 0, diag_free = 0;
  for (int i = 0; i < ra; ++i)
    for (int j = 0; j < rb; ++j) full += std::pow((a[i * d] * b[j * d] + a[i * d + 1] * b[j * d + 1]) / d + 1.0, 3);
  for (int i = 0; i < ra; ++i)
    for (int j = 0; j < ra; ++j)
      if (i != j) diag_free += std::pow((a[i * d] * a[j * d] + a[i * d + 1] * a[j * d + 1]) / d + 1.0, 3);
  CHECK(k::serial::poly_kernel_sum(a, b, ra, rb, d, false) == doctest::Approx(full).epsilon(1e-14));
  CHECK(k::serial::poly_kernel_sum(a, a, ra, ra, d, true) == doctest::Approx(diag_free).epsilon(1e-14));
}

TEST_CASE("classify_palette picks the closest direction") {
  const std::vector<std::array<double, 3>> palette{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  ImageBuffer img(1, 4);
  const float px[4][3] = {{0.9f, 0.1f, 0.0f}, {0.1f, 0.5f, 0.1f}, {0.0f, 0.1f, 0.2f}, {0.3f, 0.3f, 0.9f}};
  for (int x = 0; x < 4; ++x)
    for (int c = 0; c < 3; ++c) img.at(0, x, c) = px[x][c];
  BinaryMask m(1, 4, 1);
  m.bits[3] = 0;
  const auto out = k::serial::classify_palette(img, m, palette);
  CHECK(out.labels == std::vector<Label>{1, 2, 3, 0});
}

TEST_CASE("serial and parallel kernels agree") {
  for (int threads : {1, 4}) {
    ThreadCount guard(threads);
    CAPTURE(threads);
    const auto img = testutil::random_image(37, 29, 11);
    const auto other = testutil::random_image(37, 29, 12);
    const auto mask = testutil::random_binary(37, 29, 13);

    CHECK(k::serial::luminance(img).values == k::parallel::luminance(img).values);
    const auto es = k::serial::sobel_magnitude(img);
    const auto ep = k::parallel::sobel_magnitude(img);
    CHECK(es.values == ep.values);
    const auto eo = k::serial::sobel_magnitude(other);
    CHECK(k::serial::masked_abs_mean(es, eo, mask, 1e-6) ==
          doctest::Approx(k::parallel::masked_abs_mean(ep, eo, mask, 1e-6)).epsilon(1e-12));
    CHECK(k::serial::compose_foreground(img, other, mask) == k::parallel::compose_foreground(img, other, mask));

    k::Tensor3 x(3, 19, 23);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<float> u(-1, 1);
    for (auto& v : x.values) v = u(rng);
    for (int stride : {1, 2}) {
      const auto layer = random_layer(3, 5, stride, 7);
      CHECK(k::serial::conv3x3_relu(x, layer).values == k::parallel::conv3x3_relu(x, layer).values);
    }

    std::vector<double> a(40 * 6), b(30 * 6);
    std::normal_distribution<double> n;
    for (auto& v : a) v = n(rng);
    for (auto& v : b) v = n(rng);
    CHECK(k::serial::poly_kernel_sum(a, b, 40, 30, 6, false) ==
          doctest::Approx(k::parallel::poly_kernel_sum(a, b, 40, 30, 6, false)).epsilon(1e-12));
    CHECK(k::serial::poly_kernel_sum(a, a, 40, 40, 6, true) ==
          doctest::Approx(k::parallel::poly_kernel_sum(a, a, 40, 40, 6, true)).epsilon(1e-12));

    const std::vector<std::array<double, 3>> palette{{0.9, 0.7, 0.2}, {0.1, 0.3, 0.9}, {0.9, 0.9, 0.9}};
    CHECK(k::serial::classify_palette(img, mask, palette) == k::parallel::classify_palette(img, mask, palette));
  }
}

TEST_CASE("parallel reductions do not depend on the thread count") {
  const auto a = k::serial::sobel_magnitude(testutil::random_image(64, 64, 1));
  const auto b = k::serial::sobel_magnitude(testutil::random_image(64, 64, 2));
  const auto mask = testutil::random_binary(64, 64, 3);
  double one, four;
  {
    ThreadCount g(1);
    one = k::parallel::masked_abs_mean(a, b, mask, 1e-6);
  }
  {
    ThreadCount g(4);
    four = k::parallel::masked_abs_mean(a, b, mask, 1e-6);
  }
  CHECK(one == four);
}
