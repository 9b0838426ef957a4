#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "compstyle/domain.hpp"

namespace testutil {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / ("compstyle_" + tag + "_" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

inline compstyle::ImageBuffer random_image(int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  compstyle::ImageBuffer img(h, w);
  for (auto& v : img.values) v = u(rng);
  return img;
}

inline compstyle::ComponentMask random_mask(int h, int w, int max_label, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> u(0, max_label);
  compstyle::ComponentMask m(h, w);
  for (auto& l : m.labels) l = static_cast<compstyle::Label>(u(rng));
  return m;
}

inline compstyle::BinaryMask random_binary(int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution b(0.5);
  compstyle::BinaryMask m(h, w);
  for (auto& v : m.bits) v = b(rng) ? 1 : 0;
  return m;
}

}  // namespace testutil
