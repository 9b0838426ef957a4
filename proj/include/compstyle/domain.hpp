#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace compstyle {

using Label = std::uint8_t;

inline constexpr Label kBackground = 0;

/// Ordered component labels. Index 0 is always background; the remaining
/// entries are the style regions routed by the generator.
class ComponentTaxonomy {
 public:
  struct Entry {
    Label index;
    std::string name;
  };

  /// Throws ValidationError unless indices run 0..n-1 and entry 0 is background.
  explicit ComponentTaxonomy(std::vector<Entry> entries);

  /// background, main_body, solar_panel, antenna, nozzle, other
  static ComponentTaxonomy standard();

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  /// Number of non-background regions.
  int regions() const { return static_cast<int>(entries_.size()) - 1; }
  bool contains(int label) const { return label >= 0 && label < static_cast<int>(entries_.size()); }
  const std::string& name(Label label) const;
  /// Returns -1 when the name is unknown.
  int index_of(std::string_view name) const;

  bool operator==(const ComponentTaxonomy&) const;

 private:
  std::vector<Entry> entries_;
};

bool operator==(const ComponentTaxonomy::Entry& a, const ComponentTaxonomy::Entry& b);

/// RGB image, row-major HWC, values in [0,1].
struct ImageBuffer {
  int height = 0;
  int width = 0;
  std::vector<float> values;

  ImageBuffer() = default;
  ImageBuffer(int h, int w, float fill = 0.0f)
      : height(h), width(w), values(static_cast<std::size_t>(h) * w * 3, fill) {}

  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
  float& at(int y, int x, int c) { return values[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  float at(int y, int x, int c) const { return values[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  bool operator==(const ImageBuffer&) const = default;
};

/// Per-pixel taxonomy labels.
struct ComponentMask {
  int height = 0;
  int width = 0;
  std::vector<Label> labels;

  ComponentMask() = default;
  ComponentMask(int h, int w, Label fill = kBackground)
      : height(h), width(w), labels(static_cast<std::size_t>(h) * w, fill) {}

  std::size_t pixels() const { return labels.size(); }
  Label& at(int y, int x) { return labels[static_cast<std::size_t>(y) * width + x]; }
  Label at(int y, int x) const { return labels[static_cast<std::size_t>(y) * width + x]; }
  std::set<Label> label_set() const;
  bool operator==(const ComponentMask&) const = default;
};

/// 0/1 per pixel.
struct BinaryMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> bits;

  BinaryMask() = default;
  BinaryMask(int h, int w, std::uint8_t fill = 0)
      : height(h), width(w), bits(static_cast<std::size_t>(h) * w, fill) {}

  std::size_t pixels() const { return bits.size(); }
  std::size_t count() const;
  bool operator==(const BinaryMask&) const = default;
};

/// Object pose in the camera frame: x_cam = R x_obj + t (meters).
struct PoseRecord {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();

  /// Throws ValidationError if R is not a proper rotation within `tol`.
  void validate(double tol = 1e-6) const;
  bool is_valid(double tol = 1e-6) const;
  PoseRecord inverse() const;
  /// this ∘ other
  PoseRecord compose(const PoseRecord& other) const;
  bool operator==(const PoseRecord& o) const { return R == o.R && t == o.t; }
};

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  void validate() const;
  static CameraIntrinsics for_resolution(int width, int height, double focal_scale = 0.9);
  bool operator==(const CameraIntrinsics&) const = default;
};

enum class DomainTag { synthetic, real };

std::string to_string(DomainTag tag);
DomainTag domain_tag_from_string(std::string_view s);

struct AnnotatedSample {
  std::string id;
  ImageBuffer image;
  ComponentMask mask;
  PoseRecord pose;
  CameraIntrinsics intrinsics;
  DomainTag domain = DomainTag::synthetic;

  void validate() const;
};

struct MaskReport {
  bool valid = true;
  std::set<int> out_of_range;
  std::map<int, std::size_t> counts;
};

MaskReport validate_mask(const ComponentMask& mask, const ComponentTaxonomy& taxonomy);

/// 1 where label != background.
BinaryMask object_mask(const ComponentMask& mask);

/// Corner-aligned nearest-neighbour source index for each of `out` targets.
std::vector<int> nearest_indices(int in, int out);

/// Nearest-neighbour label resampling; never interpolates labels.
ComponentMask resize_mask(const ComponentMask& mask, int height, int width);

/// Collapses every component to label 1 (single global region).
ComponentMask collapse_to_object(const ComponentMask& mask);

}  // namespace compstyle
