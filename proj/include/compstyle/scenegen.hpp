#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "compstyle/dataset.hpp"
#include "compstyle/domain.hpp"

namespace compstyle::scenegen {

using Rgb = std::array<double, 3>;

enum class Pattern { stripes, grid, rings, plain };

/// Surface look of one component.
struct ComponentLook {
  Rgb color{0.5, 0.5, 0.5};
  Pattern pattern = Pattern::plain;
  double stripe_frequency = 0.0;  // cycles per meter
  double specular_gain = 0.0;
  double noise_amplitude = 0.0;
};

/// Toy satellite in its own frame (meters). Looks are indexed by label - 1
/// (main_body, solar_panel, antenna, nozzle, other).
struct ToySatelliteSpec {
  Eigen::Vector3d body_half_extents{0.4, 0.4, 0.5};
  double panel_gap = 0.05;
  double panel_length = 1.0;
  double panel_height = 0.6;
  Eigen::Vector3d antenna_base{0.0, 0.0, 0.5};
  Eigen::Vector3d antenna_tip{0.0, 0.0, 1.1};
  double antenna_width = 0.08;
  Eigen::Vector3d nozzle_center{0.0, 0.0, -0.52};
  double nozzle_radius = 0.22;
  Eigen::Vector3d box_center{0.0, 0.5, 0.15};
  Eigen::Vector3d box_half_extents{0.15, 0.1, 0.15};
  std::array<ComponentLook, 5> looks = default_looks();

  void validate() const;
  static std::array<ComponentLook, 5> default_looks();
};

struct DomainAppearance {
  std::array<Rgb, 5> palette_shift{};  // added to each component's base color
  double gain = 1.0;
  double noise_sigma = 0.0;
  std::uint64_t background_seed = 1;
  Rgb background_tint{0.02, 0.02, 0.05};
  double star_density = 0.004;

  void validate() const;
  /// Per-component colors after the shift, before gain.
  std::array<Rgb, 5> palette(const ToySatelliteSpec& spec) const;

  static DomainAppearance synthetic();
  /// Pseudo-real domain: shifted palettes, dimmer light, sensor noise, other sky.
  static DomainAppearance pseudo_real(const ToySatelliteSpec& spec);
};

/// Camera placement on a viewpoint sphere around the object.
struct PoseSamplerConfig {
  double min_distance = 3.0;
  double max_distance = 5.0;
  double min_elevation_deg = -60.0;
  double max_elevation_deg = 60.0;
  double aim_jitter = 0.1;  // meters, std-dev of the look-at point
  int resolution = 128;
  double focal_scale = 0.9;

  void validate() const;
};

/// Renders the sample. Throws DegenerateSampleError when t_z <= 0 or the object
/// covers no pixel. Deterministic in all inputs.
AnnotatedSample render_scene(const ToySatelliteSpec& spec, const PoseRecord& pose, const CameraIntrinsics& k,
                             const DomainAppearance& appearance, std::uint64_t seed);

/// Renders only the given component (label 1..5) with no background; used to
/// check mask footprints.
ComponentMask render_component_footprint(const ToySatelliteSpec& spec, const PoseRecord& pose,
                                         const CameraIntrinsics& k, Label component);

/// Camera-in-world poses sampled on the viewpoint sphere.
std::vector<PoseRecord> sample_camera_poses(const PoseSamplerConfig& cfg, int n, std::uint64_t seed);

/// Object pose in the camera frame for a camera-in-world pose (object at the world origin).
PoseRecord object_pose_from_camera(const PoseRecord& camera_in_world);

struct GenerateOptions {
  int count = 1;
  std::uint64_t seed = 42;
  DomainTag domain = DomainTag::synthetic;
  std::string id_prefix = "syn_";
};

/// Writes a dataset (layout of `Dataset`) plus `views.jsonl` with the camera
/// poses and an instance count of 1 per view. Manifest lines are in id order.
std::vector<ManifestEntry> generate_dataset(const ToySatelliteSpec& spec, const DomainAppearance& appearance,
                                            const PoseSamplerConfig& sampler, const GenerateOptions& options,
                                            const std::filesystem::path& out);

/// Points sampled uniformly by area over the satellite surfaces.
std::vector<Eigen::Vector3d> sample_model_points(const ToySatelliteSpec& spec, int count, std::uint64_t seed);

/// Deterministic seed for element `index` of a stream rooted at `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace compstyle::scenegen
