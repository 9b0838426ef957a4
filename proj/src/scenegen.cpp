#include "compstyle/scenegen.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "compstyle/error.hpp"

namespace compstyle::scenegen {
namespace {

constexpr std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Uniform in [0, 1) keyed on (seed, a, b).
double hash_uniform(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  const std::uint64_t h = splitmix(splitmix(splitmix(seed) ^ a) ^ (b * 0x632be59bd9b4e019ULL));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double hash_gaussian(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  const double u1 = std::max(hash_uniform(seed, a, 2 * b), 1e-300);
  const double u2 = hash_uniform(seed, a, 2 * b + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

enum class Shape { parallelogram, disk };

/// Planar primitive in camera coordinates. Parallelogram: origin + u*a + v*b,
/// u,v in [0,1]. Disk: origin + u*a + v*b with u^2+v^2 <= 1.
struct Primitive {
  Shape shape;
  Label label;
  Eigen::Vector3d origin;
  Eigen::Vector3d a;
  Eigen::Vector3d b;
};

void add_box(std::vector<Primitive>& out, Label label, const Eigen::Vector3d& c, const Eigen::Vector3d& h) {
  const Eigen::Vector3d ex(2 * h.x(), 0, 0), ey(0, 2 * h.y(), 0), ez(0, 0, 2 * h.z());
  const Eigen::Vector3d lo = c - h;
  out.push_back({Shape::parallelogram, label, lo, ey, ez});                      // -x
  out.push_back({Shape::parallelogram, label, lo + ex, ey, ez});                 // +x
  out.push_back({Shape::parallelogram, label, lo, ex, ez});                      // -y
  out.push_back({Shape::parallelogram, label, lo + ey, ex, ez});                 // +y
  out.push_back({Shape::parallelogram, label, lo, ex, ey});                      // -z
  out.push_back({Shape::parallelogram, label, lo + ez, ex, ey});                 // +z
}

/// Object-frame primitives except the antenna, which is camera-facing.
std::vector<Primitive> object_primitives(const ToySatelliteSpec& s) {
  std::vector<Primitive> prims;
  add_box(prims, 1, Eigen::Vector3d::Zero(), s.body_half_extents);
  const double x0 = s.body_half_extents.x() + s.panel_gap;
  const Eigen::Vector3d len(s.panel_length, 0, 0), height(0, 0, s.panel_height);
  prims.push_back({Shape::parallelogram, 2, Eigen::Vector3d(x0, 0, -0.5 * s.panel_height), len, height});
  prims.push_back({Shape::parallelogram, 2, Eigen::Vector3d(-x0 - s.panel_length, 0, -0.5 * s.panel_height), len, height});
  prims.push_back({Shape::disk, 4, s.nozzle_center, Eigen::Vector3d(s.nozzle_radius, 0, 0),
                   Eigen::Vector3d(0, s.nozzle_radius, 0)});
  add_box(prims, 5, s.box_center, s.box_half_extents);
  return prims;
}

std::vector<Primitive> camera_primitives(const ToySatelliteSpec& s, const PoseRecord& pose) {
  std::vector<Primitive> prims;
  for (const auto& p : object_primitives(s)) {
    prims.push_back({p.shape, p.label, pose.R * p.origin + pose.t, pose.R * p.a, pose.R * p.b});
  }
  const Eigen::Vector3d base = pose.R * s.antenna_base + pose.t;
  const Eigen::Vector3d tip = pose.R * s.antenna_tip + pose.t;
  const Eigen::Vector3d axis = tip - base;
  Eigen::Vector3d side = axis.cross(0.5 * (base + tip));
  if (side.norm() < 1e-12) side = axis.unitOrthogonal();
  side = side.normalized() * s.antenna_width;
  prims.push_back({Shape::parallelogram, 3, base - 0.5 * side, axis, side});
  return prims;
}

struct Hit {
  double depth = std::numeric_limits<double>::infinity();
  int prim = -1;
  double u = 0.0;
  double v = 0.0;
};

Hit trace(const std::vector<Primitive>& prims, const Eigen::Vector3d& dir, int only_label = -1) {
  Hit best;
  for (int i = 0; i < static_cast<int>(prims.size()); ++i) {
    const auto& p = prims[i];
    if (only_label >= 0 && p.label != only_label) continue;
    const Eigen::Vector3d n = p.a.cross(p.b);
    const double denom = n.dot(dir);
    if (std::abs(denom) < 1e-12) continue;
    const double s = n.dot(p.origin) / denom;
    if (s <= 1e-6 || s >= best.depth) continue;
    const Eigen::Vector3d q = s * dir - p.origin;
    const double aa = p.a.dot(p.a), ab = p.a.dot(p.b), bb = p.b.dot(p.b);
    const double qa = q.dot(p.a), qb = q.dot(p.b);
    const double det = aa * bb - ab * ab;
    const double u = (qa * bb - qb * ab) / det;
    const double v = (qb * aa - qa * ab) / det;
    const bool inside = p.shape == Shape::parallelogram ? (u >= 0 && u <= 1 && v >= 0 && v <= 1)
                                                        : (u * u + v * v <= 1.0);
    if (!inside) continue;
    best = {s, i, u, v};
  }
  return best;
}

double pattern_value(const ComponentLook& look, const Primitive& p, double u, double v) {
  const double f = look.stripe_frequency;
  const double su = u * p.a.norm();
  const double sv = v * p.b.norm();
  switch (look.pattern) {
    case Pattern::stripes:
      return 1.0 + 0.12 * std::sin(2.0 * std::numbers::pi * f * su);
    case Pattern::grid: {
      const double fu = su * f - std::floor(su * f);
      const double fv = sv * f - std::floor(sv * f);
      return (fu < 0.1 || fv < 0.1) ? 0.55 : 1.0;
    }
    case Pattern::rings:
      return 1.0 + 0.15 * std::sin(2.0 * std::numbers::pi * f * std::hypot(su, sv));
    case Pattern::plain:
      break;
  }
  return 1.0;
}

Eigen::Vector3d pixel_ray(const CameraIntrinsics& k, int x, int y) {
  return {(x + 0.5 - k.cx) / k.fx, (y + 0.5 - k.cy) / k.fy, 1.0};
}

const Eigen::Vector3d kLightDir = Eigen::Vector3d(-0.45, -0.55, -0.7).normalized();
constexpr double kAmbient = 0.45;
constexpr double kDiffuse = 0.55;
constexpr double kShininess = 24.0;

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) { return splitmix(splitmix(seed) + index); }

std::array<ComponentLook, 5> ToySatelliteSpec::default_looks() {
  return {{
      {{0.72, 0.72, 0.75}, Pattern::stripes, 6.0, 0.20, 0.03},  // main_body
      {{0.22, 0.24, 0.38}, Pattern::grid, 5.0, 0.20, 0.02},     // solar_panel
      {{0.85, 0.85, 0.85}, Pattern::plain, 0.0, 0.10, 0.02},    // antenna
      {{0.30, 0.30, 0.32}, Pattern::rings, 20.0, 0.15, 0.02},   // nozzle
      {{0.55, 0.55, 0.45}, Pattern::stripes, 12.0, 0.10, 0.02}, // other
  }};
}

void ToySatelliteSpec::validate() const {
  auto positive = [](double v) { return v > 0.0; };
  if (!(body_half_extents.array() > 0.0).all() || !(box_half_extents.array() > 0.0).all() ||
      !positive(panel_length) || !positive(panel_height) || !positive(antenna_width) || !positive(nozzle_radius) ||
      panel_gap < 0.0 || (antenna_tip - antenna_base).norm() <= 0.0) {
    throw ValidationError("toy satellite dimensions must be positive");
  }
  for (const auto& look : looks) {
    if (look.stripe_frequency < 0.0 || look.specular_gain < 0.0 || look.noise_amplitude < 0.0) {
      throw ValidationError("component texture parameters must be non-negative");
    }
  }
}

void DomainAppearance::validate() const {
  if (noise_sigma < 0.0) throw ValidationError("noise sigma must be >= 0");
  if (gain < 0.0) throw ValidationError("illumination gain must be >= 0");
  if (star_density < 0.0 || star_density > 1.0) throw ValidationError("star density must be in [0,1]");
}

std::array<Rgb, 5> DomainAppearance::palette(const ToySatelliteSpec& spec) const {
  std::array<Rgb, 5> out{};
  for (int k = 0; k < 5; ++k) {
    for (int c = 0; c < 3; ++c) out[k][c] = spec.looks[k].color[c] + palette_shift[k][c];
  }
  return out;
}

DomainAppearance DomainAppearance::synthetic() { return {}; }

DomainAppearance DomainAppearance::pseudo_real(const ToySatelliteSpec& spec) {
  const std::array<Rgb, 5> target{{
      {0.90, 0.72, 0.20},  // gold foil body
      {0.12, 0.28, 0.85},  // blue cells
      {0.90, 0.90, 0.90},  // white antenna
      {0.80, 0.18, 0.12},  // red nozzle
      {0.20, 0.75, 0.30},  // green fixtures
  }};
  DomainAppearance a;
  for (int k = 0; k < 5; ++k) {
    for (int c = 0; c < 3; ++c) a.palette_shift[k][c] = target[k][c] - spec.looks[k].color[c];
  }
  a.gain = 0.9;
  a.noise_sigma = 0.02;
  a.background_seed = 7;
  a.background_tint = {0.05, 0.04, 0.03};
  a.star_density = 0.008;
  return a;
}

void PoseSamplerConfig::validate() const {
  if (!(min_distance > 0.0) || max_distance < min_distance) throw ValidationError("invalid distance range");
  if (min_elevation_deg < -90.0 || max_elevation_deg > 90.0 || max_elevation_deg < min_elevation_deg) {
    throw ValidationError("invalid elevation range");
  }
  if (aim_jitter < 0.0) throw ValidationError("aim jitter must be >= 0");
  if (resolution < 8) throw ValidationError("resolution must be >= 8");
  if (!(focal_scale > 0.0)) throw ValidationError("focal scale must be > 0");
}

AnnotatedSample render_scene(const ToySatelliteSpec& spec, const PoseRecord& pose, const CameraIntrinsics& k,
                             const DomainAppearance& appearance, std::uint64_t seed) {
  spec.validate();
  appearance.validate();
  pose.validate();
  k.validate();
  if (!(pose.t.z() > 0.0)) throw DegenerateSampleError("object behind the camera (t_z <= 0)");

  const auto prims = camera_primitives(spec, pose);
  const auto palette = appearance.palette(spec);
  const int h = k.height, w = k.width;

  AnnotatedSample sample;
  sample.image = ImageBuffer(h, w);
  sample.mask = ComponentMask(h, w);
  sample.pose = pose;
  sample.intrinsics = k;

  const std::uint64_t bg_seed = derive_seed(appearance.background_seed, seed);
  const std::uint64_t tex_seed = derive_seed(seed, 0x7e57);
  const std::uint64_t noise_seed = derive_seed(seed, 0x5e45);

#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto pix = static_cast<std::uint64_t>(y) * w + x;
      const Eigen::Vector3d dir = pixel_ray(k, x, y);
      const Hit hit = trace(prims, dir);
      std::array<double, 3> rgb{};
      if (hit.prim < 0) {
        const double fade = 1.0 - 0.5 * static_cast<double>(y) / h;
        for (int c = 0; c < 3; ++c) rgb[c] = appearance.background_tint[c] * fade;
        if (hash_uniform(bg_seed, pix, 0) < appearance.star_density) {
          const double star = 0.5 + 0.5 * hash_uniform(bg_seed, pix, 1);
          for (auto& v : rgb) v += star;
        }
      } else {
        const auto& p = prims[hit.prim];
        const auto& look = spec.looks[p.label - 1];
        Eigen::Vector3d n = p.a.cross(p.b).normalized();
        if (n.dot(dir) > 0.0) n = -n;
        const Eigen::Vector3d view = -dir.normalized();
        const double diffuse = std::max(0.0, n.dot(kLightDir));
        const Eigen::Vector3d half = (kLightDir + view).normalized();
        const double specular = look.specular_gain * std::pow(std::max(0.0, n.dot(half)), kShininess);
        const double shade = (kAmbient + kDiffuse * diffuse) * pattern_value(look, p, hit.u, hit.v);
        const double grain = look.noise_amplitude * (2.0 * hash_uniform(tex_seed, pix, 0) - 1.0);
        for (int c = 0; c < 3; ++c) {
          rgb[c] = appearance.gain * (palette[p.label - 1][c] * shade + specular) + grain;
        }
        sample.mask.at(y, x) = p.label;
      }
      if (appearance.noise_sigma > 0.0) {
        for (int c = 0; c < 3; ++c) rgb[c] += appearance.noise_sigma * hash_gaussian(noise_seed, pix, c);
      }
      for (int c = 0; c < 3; ++c) sample.image.at(y, x, c) = static_cast<float>(std::clamp(rgb[c], 0.0, 1.0));
    }
  }

  if (object_mask(sample.mask).count() == 0) throw DegenerateSampleError("object outside the view frustum");
  return sample;
}

ComponentMask render_component_footprint(const ToySatelliteSpec& spec, const PoseRecord& pose,
                                         const CameraIntrinsics& k, Label component) {
  const auto prims = camera_primitives(spec, pose);
  ComponentMask mask(k.height, k.width);
  for (int y = 0; y < k.height; ++y) {
    for (int x = 0; x < k.width; ++x) {
      if (trace(prims, pixel_ray(k, x, y), component).prim >= 0) mask.at(y, x) = component;
    }
  }
  return mask;
}

std::vector<PoseRecord> sample_camera_poses(const PoseSamplerConfig& cfg, int n, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> jitter(0.0, 1.0);
  const double deg = std::numbers::pi / 180.0;
  const double zlo = std::sin(cfg.min_elevation_deg * deg), zhi = std::sin(cfg.max_elevation_deg * deg);

  std::vector<PoseRecord> poses;
  poses.reserve(n);
  for (int i = 0; i < n; ++i) {
    // area-uniform direction within the elevation band
    const double z = zlo + (zhi - zlo) * unit(rng);
    const double phi = 2.0 * std::numbers::pi * unit(rng);
    const double rxy = std::sqrt(std::max(0.0, 1.0 - z * z));
    const Eigen::Vector3d dir(rxy * std::cos(phi), rxy * std::sin(phi), z);
    const double dist = cfg.min_distance + (cfg.max_distance - cfg.min_distance) * unit(rng);
    const Eigen::Vector3d position = dist * dir.normalized();
    const Eigen::Vector3d aim(cfg.aim_jitter * jitter(rng), cfg.aim_jitter * jitter(rng), cfg.aim_jitter * jitter(rng));
    const double roll = 2.0 * std::numbers::pi * unit(rng);

    const Eigen::Vector3d forward = (aim - position).normalized();
    const Eigen::Vector3d helper = std::abs(forward.z()) < 0.95 ? Eigen::Vector3d::UnitZ() : Eigen::Vector3d::UnitX();
    const Eigen::Vector3d right = forward.cross(helper).normalized();
    const Eigen::Vector3d down = forward.cross(right);
    Eigen::Matrix3d basis;
    basis.col(0) = right;
    basis.col(1) = down;
    basis.col(2) = forward;
    const Eigen::Matrix3d rolled = basis * Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitZ()).toRotationMatrix();

    PoseRecord cam;
    cam.R = rolled;
    cam.t = position;
    poses.push_back(cam);
  }
  return poses;
}

PoseRecord object_pose_from_camera(const PoseRecord& camera_in_world) { return camera_in_world.inverse(); }

std::vector<ManifestEntry> generate_dataset(const ToySatelliteSpec& spec, const DomainAppearance& appearance,
                                            const PoseSamplerConfig& sampler, const GenerateOptions& options,
                                            const std::filesystem::path& out) {
  if (options.count < 1) throw ValidationError("dataset size must be >= 1");
  spec.validate();
  appearance.validate();
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec) throw IoError("cannot create " + out.string() + ": " + ec.message());

  const auto cameras = sample_camera_poses(sampler, options.count, options.seed);
  const auto k = CameraIntrinsics::for_resolution(sampler.resolution, sampler.resolution, sampler.focal_scale);
  std::vector<ManifestEntry> entries(options.count);
  std::vector<std::string> errors(options.count);

#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < options.count; ++i) {
    char id[64];
    std::snprintf(id, sizeof id, "%s%05d", options.id_prefix.c_str(), i);
    try {
      auto sample = render_scene(spec, object_pose_from_camera(cameras[i]), k, appearance,
                                 derive_seed(options.seed, static_cast<std::uint64_t>(i)));
      sample.id = id;
      sample.domain = options.domain;
      entries[i] = write_sample(out, sample);
    } catch (const std::exception& e) {
      errors[i] = std::string(id) + ": " + e.what();
    }
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw IoError("generate_dataset failed for " + e);
  }

  write_manifest(out, entries);
  std::vector<nlohmann::json> views;
  for (int i = 0; i < options.count; ++i) {
    auto v = pose_to_json(cameras[i]);
    v["view_id"] = entries[i].id;
    v["n_instances"] = 1;
    views.push_back(std::move(v));
  }
  write_jsonl(out / "views.jsonl", views);
  return entries;
}

std::vector<Eigen::Vector3d> sample_model_points(const ToySatelliteSpec& spec, int count, std::uint64_t seed) {
  if (count < 1) throw ValidationError("model point count must be >= 1");
  auto prims = object_primitives(spec);
  // static antenna strip in the object frame
  const Eigen::Vector3d axis = spec.antenna_tip - spec.antenna_base;
  const Eigen::Vector3d side = axis.unitOrthogonal() * spec.antenna_width;
  prims.push_back({Shape::parallelogram, 3, spec.antenna_base - 0.5 * side, axis, side});

  std::vector<double> area(prims.size());
  for (std::size_t i = 0; i < prims.size(); ++i) {
    const double a = prims[i].a.cross(prims[i].b).norm();
    area[i] = prims[i].shape == Shape::disk ? std::numbers::pi * a : a;
  }
  std::mt19937_64 rng(seed);
  std::discrete_distribution<std::size_t> pick(area.begin(), area.end());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Eigen::Vector3d> pts;
  pts.reserve(count);
  while (static_cast<int>(pts.size()) < count) {
    const auto& p = prims[pick(rng)];
    double u = unit(rng), v = unit(rng);
    if (p.shape == Shape::disk) {
      const double r = std::sqrt(u), th = 2.0 * std::numbers::pi * v;
      u = r * std::cos(th);
      v = r * std::sin(th);
    }
    pts.push_back(p.origin + u * p.a + v * p.b);
  }
  return pts;
}

}  // namespace compstyle::scenegen
