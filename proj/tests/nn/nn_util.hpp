#pragma once

#include <torch/torch.h>

#include <vector>

#include "compstyle/scenegen.hpp"
#include "compstyle/styletransfer.hpp"

namespace testutil {

/// Small network that runs in milliseconds.
inline compstyle::nn::GeneratorConfig tiny_config(int resolution = 16) {
  compstyle::nn::GeneratorConfig c;
  c.resolution = resolution;
  c.depth = 2;
  c.base_width = 4;
  c.max_width = 8;
  c.modulation_layers = 4;
  c.style_dim = 8;
  c.nce_dim = 8;
  c.disc_base_width = 4;
  c.disc_max_width = 8;
  return c;
}

/// Rendered toy satellite views at the given resolution.
inline std::vector<compstyle::AnnotatedSample> toy_samples(int n, int resolution, compstyle::DomainTag domain,
                                                           std::uint64_t seed) {
  using namespace compstyle;
  scenegen::ToySatelliteSpec spec;
  scenegen::PoseSamplerConfig sampler;
  sampler.resolution = resolution;
  sampler.min_distance = 2.5;
  sampler.max_distance = 3.0;
  const auto appearance =
      domain == DomainTag::real ? scenegen::DomainAppearance::pseudo_real(spec) : scenegen::DomainAppearance::synthetic();
  const auto k = CameraIntrinsics::for_resolution(resolution, resolution, sampler.focal_scale);
  std::vector<AnnotatedSample> out;
  std::uint64_t i = 0;
  for (const auto& cam : scenegen::sample_camera_poses(sampler, 4 * n, seed)) {
    if (static_cast<int>(out.size()) == n) break;
    try {
      auto s = scenegen::render_scene(spec, scenegen::object_pose_from_camera(cam), k, appearance,
                                      scenegen::derive_seed(seed, i));
      s.id = (domain == DomainTag::real ? "real_" : "syn_") + std::to_string(i);
      out.push_back(std::move(s));
    } catch (const std::exception&) {
    }
    ++i;
  }
  return out;
}

}  // namespace testutil
