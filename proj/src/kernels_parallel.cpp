#include <omp.h>

#include <algorithm>
#include <cmath>

#include "compstyle/error.hpp"
#include "compstyle/kernels.hpp"

namespace compstyle::kernels::parallel {

Plane luminance(const ImageBuffer& image) {
  Plane out(image.height, image.width);
  const auto n = static_cast<std::ptrdiff_t>(image.pixels());
  const float* v = image.values.data();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < n; ++p) {
    out.values[p] = kLumaR * v[p * 3] + kLumaG * v[p * 3 + 1] + kLumaB * v[p * 3 + 2];
  }
  return out;
}

Plane sobel_magnitude(const ImageBuffer& image) {
  const Plane lum = luminance(image);
  const int h = image.height;
  const int w = image.width;
  Plane out(h, w);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    const double* up = &lum.values[static_cast<std::size_t>(std::max(y - 1, 0)) * w];
    const double* mid = &lum.values[static_cast<std::size_t>(y) * w];
    const double* down = &lum.values[static_cast<std::size_t>(std::min(y + 1, h - 1)) * w];
    double* dst = &out.values[static_cast<std::size_t>(y) * w];
    for (int x = 0; x < w; ++x) {
      const int l = std::max(x - 1, 0);
      const int r = std::min(x + 1, w - 1);
      const double gx = (up[r] + 2.0 * mid[r] + down[r]) - (up[l] + 2.0 * mid[l] + down[l]);
      const double gy = (down[l] + 2.0 * down[x] + down[r]) - (up[l] + 2.0 * up[x] + up[r]);
      dst[x] = std::sqrt(gx * gx + gy * gy);
    }
  }
  return out;
}

double masked_abs_mean(const Plane& a, const Plane& b, const BinaryMask& mask, double eps) {
  if (a.values.size() != b.values.size() || a.values.size() != mask.bits.size() || a.width != mask.width) {
    throw ValidationError("masked_abs_mean: shape mismatch");
  }
  const int h = a.height;
  const int w = a.width;
  std::vector<double> sums(h, 0.0);
  std::vector<double> counts(h, 0.0);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    double s = 0.0, c = 0.0;
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      if (mask.bits[i]) {
        s += std::abs(a.values[i] - b.values[i]);
        c += 1.0;
      }
    }
    sums[y] = s;
    counts[y] = c;
  }
  double sum = 0.0, count = 0.0;
  for (int y = 0; y < h; ++y) {
    sum += sums[y];
    count += counts[y];
  }
  return sum / (count + eps);
}

ImageBuffer compose_foreground(const ImageBuffer& translated, const ImageBuffer& source, const BinaryMask& mask) {
  if (translated.height != source.height || translated.width != source.width || mask.height != source.height ||
      mask.width != source.width) {
    throw ValidationError("compose_foreground: shape mismatch");
  }
  ImageBuffer out(source.height, source.width);
  const auto n = static_cast<std::ptrdiff_t>(source.pixels());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < n; ++p) {
    const float* src = mask.bits[p] ? &translated.values[p * 3] : &source.values[p * 3];
    out.values[p * 3] = src[0];
    out.values[p * 3 + 1] = src[1];
    out.values[p * 3 + 2] = src[2];
  }
  return out;
}

Tensor3 conv3x3_relu(const Tensor3& input, const ConvLayer& layer) {
  if (input.channels != layer.in_channels) throw ValidationError("conv3x3_relu: channel mismatch");
  const int oh = (input.height - 1) / layer.stride + 1;
  const int ow = (input.width - 1) / layer.stride + 1;
  Tensor3 out(layer.out_channels, oh, ow);
  const int in_c = layer.in_channels;
#pragma omp parallel for collapse(2) schedule(static)
  for (int o = 0; o < layer.out_channels; ++o) {
    for (int y = 0; y < oh; ++y) {
      const float* wo = &layer.weights[static_cast<std::size_t>(o) * in_c * 9];
      for (int x = 0; x < ow; ++x) {
        float acc = layer.bias[o];
        for (int i = 0; i < in_c; ++i) {
          const float* wk = wo + static_cast<std::size_t>(i) * 9;
          for (int ky = 0; ky < 3; ++ky) {
            const int iy = y * layer.stride + ky - 1;
            if (iy < 0 || iy >= input.height) continue;
            const float* row = &input.values[(static_cast<std::size_t>(i) * input.height + iy) * input.width];
            for (int kx = 0; kx < 3; ++kx) {
              const int ix = x * layer.stride + kx - 1;
              if (ix < 0 || ix >= input.width) continue;
              acc += wk[ky * 3 + kx] * row[ix];
            }
          }
        }
        out.at(o, y, x) = acc > 0.0f ? acc : 0.0f;
      }
    }
  }
  return out;
}

double poly_kernel_sum(std::span<const double> a, std::span<const double> b, int rows_a, int rows_b, int dim,
                       bool skip_diagonal) {
  std::vector<double> partial(rows_a, 0.0);
#pragma omp parallel for schedule(dynamic, 4)
  for (int i = 0; i < rows_a; ++i) {
    const double* xi = &a[static_cast<std::size_t>(i) * dim];
    double s = 0.0;
    for (int j = 0; j < rows_b; ++j) {
      if (skip_diagonal && i == j) continue;
      const double* yj = &b[static_cast<std::size_t>(j) * dim];
      double dot = 0.0;
      for (int d = 0; d < dim; ++d) dot += xi[d] * yj[d];
      const double k = dot / dim + 1.0;
      s += k * k * k;
    }
    partial[i] = s;
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

ComponentMask classify_palette(const ImageBuffer& image, const BinaryMask& mask,
                               std::span<const std::array<double, 3>> palette) {
  std::vector<std::array<double, 3>> unit(palette.begin(), palette.end());
  std::vector<double> norms(unit.size());
  for (std::size_t k = 0; k < unit.size(); ++k) {
    norms[k] = std::sqrt(unit[k][0] * unit[k][0] + unit[k][1] * unit[k][1] + unit[k][2] * unit[k][2]);
  }
  ComponentMask out(image.height, image.width);
  const auto n = static_cast<std::ptrdiff_t>(image.pixels());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < n; ++p) {
    if (!mask.bits[p]) continue;
    const double r = image.values[p * 3], g = image.values[p * 3 + 1], b = image.values[p * 3 + 2];
    const double norm = std::sqrt(r * r + g * g + b * b);
    double best = -2.0;
    Label best_label = 1;
    for (std::size_t k = 0; k < unit.size(); ++k) {
      const auto& c = unit[k];
      const double cosine = norm > 0.0 ? (r * c[0] + g * c[1] + b * c[2]) / (norm * norms[k]) : 0.0;
      if (cosine > best) {
        best = cosine;
        best_label = static_cast<Label>(k + 1);
      }
    }
    out.labels[p] = best_label;
  }
  return out;
}

}  // namespace compstyle::kernels::parallel
