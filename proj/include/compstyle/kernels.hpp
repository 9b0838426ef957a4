#pragma once

// Data-parallel image and feature kernels.
//
// Each kernel exists twice: `serial::` is the plain reference loop kept for
// testing, `parallel::` is the OpenMP version used by the pipeline. Per-pixel
// kernels agree bitwise. Parallel reductions sum per-row partials in row order,
// so they are independent of the thread count and agree with the serial sums to
// rounding.

#include <array>
#include <span>
#include <vector>

#include "compstyle/domain.hpp"

namespace compstyle::kernels {

/// Row-major H x W plane of doubles.
struct Plane {
  int height = 0;
  int width = 0;
  std::vector<double> values;

  Plane() = default;
  Plane(int h, int w, double fill = 0.0) : height(h), width(w), values(static_cast<std::size_t>(h) * w, fill) {}
  double& at(int y, int x) { return values[static_cast<std::size_t>(y) * width + x]; }
  double at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

/// Channel-major C x H x W tensor used by the embedding network.
struct Tensor3 {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> values;

  Tensor3() = default;
  Tensor3(int c, int h, int w) : channels(c), height(h), width(w), values(static_cast<std::size_t>(c) * h * w, 0.0f) {}
  float& at(int c, int y, int x) { return values[(static_cast<std::size_t>(c) * height + y) * width + x]; }
  float at(int c, int y, int x) const { return values[(static_cast<std::size_t>(c) * height + y) * width + x]; }
};

/// 3x3 convolution weights laid out [out][in][ky][kx], zero padding of 1.
struct ConvLayer {
  int in_channels = 0;
  int out_channels = 0;
  int stride = 1;
  std::vector<float> weights;
  std::vector<float> bias;
};

inline constexpr double kLumaR = 0.299;
inline constexpr double kLumaG = 0.587;
inline constexpr double kLumaB = 0.114;

namespace serial {

Plane luminance(const ImageBuffer& image);
/// sqrt(Gx^2 + Gy^2) of the 3x3 Sobel operator on luminance, replicate padding.
Plane sobel_magnitude(const ImageBuffer& image);
/// sum_{mask} |a - b| / (count(mask) + eps)
double masked_abs_mean(const Plane& a, const Plane& b, const BinaryMask& mask, double eps);
ImageBuffer compose_foreground(const ImageBuffer& translated, const ImageBuffer& source, const BinaryMask& mask);
Tensor3 conv3x3_relu(const Tensor3& input, const ConvLayer& layer);
/// Sum of (x.y / dim + 1)^3 over all (i, j) pairs; `skip_diagonal` drops i == j.
double poly_kernel_sum(std::span<const double> a, std::span<const double> b, int rows_a, int rows_b, int dim,
                       bool skip_diagonal);
/// Label of the palette entry with the largest cosine similarity, inside `mask`; 0 elsewhere.
ComponentMask classify_palette(const ImageBuffer& image, const BinaryMask& mask,
                               std::span<const std::array<double, 3>> palette);

}  // namespace serial

namespace parallel {

Plane luminance(const ImageBuffer& image);
Plane sobel_magnitude(const ImageBuffer& image);
double masked_abs_mean(const Plane& a, const Plane& b, const BinaryMask& mask, double eps);
ImageBuffer compose_foreground(const ImageBuffer& translated, const ImageBuffer& source, const BinaryMask& mask);
Tensor3 conv3x3_relu(const Tensor3& input, const ConvLayer& layer);
double poly_kernel_sum(std::span<const double> a, std::span<const double> b, int rows_a, int rows_b, int dim,
                       bool skip_diagonal);
ComponentMask classify_palette(const ImageBuffer& image, const BinaryMask& mask,
                               std::span<const std::array<double, 3>> palette);

}  // namespace parallel

}  // namespace compstyle::kernels
