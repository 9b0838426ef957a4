#pragma once

#include <cstdint>
#include <filesystem>

#include "compstyle/domain.hpp"

namespace compstyle {

/// 8-bit quantization used for every image written to disk.
inline std::uint8_t quantize(float v) {
  const float c = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
  return static_cast<std::uint8_t>(c * 255.0f + 0.5f);
}

inline float dequantize(std::uint8_t v) { return static_cast<float>(v) / 255.0f; }

ImageBuffer read_rgb_png(const std::filesystem::path& path);
void write_rgb_png(const std::filesystem::path& path, const ImageBuffer& image);

/// Single-channel PNG where the pixel value is the taxonomy index.
ComponentMask read_mask_png(const std::filesystem::path& path);
void write_mask_png(const std::filesystem::path& path, const ComponentMask& mask);

/// Round-trips an image through 8-bit storage without touching disk.
ImageBuffer quantize_image(const ImageBuffer& image);

}  // namespace compstyle
