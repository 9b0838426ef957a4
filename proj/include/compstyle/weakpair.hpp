#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "compstyle/domain.hpp"

namespace compstyle::weakpair {

/// One real acquisition view: camera pose in the world frame and the number of
/// target instances detected in it.
struct ViewRecord {
  std::string view_id;
  PoseRecord camera_in_world;
  int n_instances = 1;
};

struct WeakPair {
  std::string view_id;
  std::string real_id;
  std::string synth_id;
  int n_instances = 0;
  int expected = 1;
  bool retained = false;
  /// Empty for a usable pair; "mismatched sample" for filtered views;
  /// "render failed: ..." when the synthetic view could not be produced.
  std::string reason;

  bool usable() const { return retained && reason.empty(); }
};

nlohmann::json to_json(const WeakPair& p);
WeakPair weak_pair_from_json(const nlohmann::json& j);

/// Reads `{"view_id","R","t"[,"n_instances"]}` lines; a missing count means 1.
std::vector<ViewRecord> read_views(const std::filesystem::path& path);

/// m_i = 1 iff n_i == expected, in input order. Throws if expected < 1.
std::vector<std::uint8_t> consistency_filter(std::span<const ViewRecord> views, int expected = 1);

/// Produces the synthetic sample for a view given the object pose in the camera frame.
using RenderFn = std::function<AnnotatedSample(const ViewRecord& view, const PoseRecord& object_pose)>;

struct BuildResult {
  std::vector<WeakPair> records;  // every view, in view order
  std::size_t retained() const;
  std::size_t discarded() const;
  std::vector<WeakPair> usable() const;
};

/// Filters views, renders a synthetic counterpart for every retained view and
/// records the outcome. Render failures mark the pair and do not stop the run.
/// When `out` is non-empty the synthetic samples are written there as a dataset
/// together with `pairs.jsonl`.
BuildResult build_pairs(std::span<const ViewRecord> views, const RenderFn& render, int expected,
                        const std::filesystem::path& out = {});

std::vector<WeakPair> read_pairs(const std::filesystem::path& path);
void write_pairs(const std::filesystem::path& path, std::span<const WeakPair> pairs);

inline std::string synth_id_for(const std::string& view_id) { return view_id + "_syn"; }

}  // namespace compstyle::weakpair
