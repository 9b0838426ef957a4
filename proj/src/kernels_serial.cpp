#include <algorithm>
#include <cmath>

#include "compstyle/error.hpp"
#include "compstyle/kernels.hpp"

namespace compstyle::kernels::serial {

Plane luminance(const ImageBuffer& image) {
  Plane out(image.height, image.width);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      out.at(y, x) = kLumaR * image.at(y, x, 0) + kLumaG * image.at(y, x, 1) + kLumaB * image.at(y, x, 2);
    }
  }
  return out;
}

Plane sobel_magnitude(const ImageBuffer& image) {
  const Plane lum = luminance(image);
  const int h = image.height;
  const int w = image.width;
  Plane out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      auto L = [&](int dy, int dx) {
        const int yy = std::clamp(y + dy, 0, h - 1);
        const int xx = std::clamp(x + dx, 0, w - 1);
        return lum.at(yy, xx);
      };
      const double gx = (L(-1, 1) + 2.0 * L(0, 1) + L(1, 1)) - (L(-1, -1) + 2.0 * L(0, -1) + L(1, -1));
      const double gy = (L(1, -1) + 2.0 * L(1, 0) + L(1, 1)) - (L(-1, -1) + 2.0 * L(-1, 0) + L(-1, 1));
      out.at(y, x) = std::sqrt(gx * gx + gy * gy);
    }
  }
  return out;
}

double masked_abs_mean(const Plane& a, const Plane& b, const BinaryMask& mask, double eps) {
  if (a.values.size() != b.values.size() || a.values.size() != mask.bits.size()) {
    throw ValidationError("masked_abs_mean: shape mismatch");
  }
  double sum = 0.0;
  double count = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    if (mask.bits[i]) {
      sum += std::abs(a.values[i] - b.values[i]);
      count += 1.0;
    }
  }
  return sum / (count + eps);
}

ImageBuffer compose_foreground(const ImageBuffer& translated, const ImageBuffer& source, const BinaryMask& mask) {
  if (translated.height != source.height || translated.width != source.width || mask.height != source.height ||
      mask.width != source.width) {
    throw ValidationError("compose_foreground: shape mismatch");
  }
  ImageBuffer out = source;
  for (std::size_t p = 0; p < source.pixels(); ++p) {
    if (mask.bits[p]) {
      for (int c = 0; c < 3; ++c) out.values[p * 3 + c] = translated.values[p * 3 + c];
    }
  }
  return out;
}

Tensor3 conv3x3_relu(const Tensor3& input, const ConvLayer& layer) {
  if (input.channels != layer.in_channels) throw ValidationError("conv3x3_relu: channel mismatch");
  const int oh = (input.height - 1) / layer.stride + 1;
  const int ow = (input.width - 1) / layer.stride + 1;
  Tensor3 out(layer.out_channels, oh, ow);
  for (int o = 0; o < layer.out_channels; ++o) {
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        float acc = layer.bias[o];
        for (int i = 0; i < layer.in_channels; ++i) {
          for (int ky = 0; ky < 3; ++ky) {
            const int iy = y * layer.stride + ky - 1;
            if (iy < 0 || iy >= input.height) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const int ix = x * layer.stride + kx - 1;
              if (ix < 0 || ix >= input.width) continue;
              acc += layer.weights[((static_cast<std::size_t>(o) * layer.in_channels + i) * 3 + ky) * 3 + kx] *
                     input.at(i, iy, ix);
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
  double total = 0.0;
  for (int i = 0; i < rows_a; ++i) {
    for (int j = 0; j < rows_b; ++j) {
      if (skip_diagonal && i == j) continue;
      double dot = 0.0;
      for (int d = 0; d < dim; ++d) dot += a[static_cast<std::size_t>(i) * dim + d] * b[static_cast<std::size_t>(j) * dim + d];
      const double k = dot / dim + 1.0;
      total += k * k * k;
    }
  }
  return total;
}

ComponentMask classify_palette(const ImageBuffer& image, const BinaryMask& mask,
                               std::span<const std::array<double, 3>> palette) {
  ComponentMask out(image.height, image.width);
  for (std::size_t p = 0; p < image.pixels(); ++p) {
    if (!mask.bits[p]) continue;
    const double r = image.values[p * 3], g = image.values[p * 3 + 1], b = image.values[p * 3 + 2];
    const double norm = std::sqrt(r * r + g * g + b * b);
    double best = -2.0;
    Label best_label = 1;
    for (std::size_t k = 0; k < palette.size(); ++k) {
      const auto& c = palette[k];
      const double cn = std::sqrt(c[0] * c[0] + c[1] * c[1] + c[2] * c[2]);
      const double cosine = norm > 0.0 ? (r * c[0] + g * c[1] + b * c[2]) / (norm * cn) : 0.0;
      if (cosine > best) {
        best = cosine;
        best_label = static_cast<Label>(k + 1);
      }
    }
    out.labels[p] = best_label;
  }
  return out;
}

}  // namespace compstyle::kernels::serial
