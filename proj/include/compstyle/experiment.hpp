#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "compstyle/config.hpp"
#include "compstyle/weakpair.hpp"

namespace compstyle::experiment {

namespace fs = std::filesystem;

/// Renders `count` views of the toy satellite in the given domain.
void generate_domain(const config::RunConfig& cfg, DomainTag domain, int count, std::uint64_t seed,
                     const fs::path& out);

/// Renders the synthetic counterpart of every retained view in `views_file`.
weakpair::BuildResult build_pairs(const config::RunConfig& cfg, const fs::path& views_file, const fs::path& out);

/// Directory layout of the toy experiment.
struct DataLayout {
  fs::path real_train;  // pseudo-real references (weak-pair real side)
  fs::path pairs;       // synthetic side of the weak pairs
  fs::path synth_eval;  // held-out synthetic views to translate
  fs::path real_eval;   // pseudo-real renders of the same held-out poses

  static DataLayout under(const fs::path& root);
};

/// Generates all datasets of the layout from `data.seed`. Existing datasets
/// with a matching `data.json` stamp are reused.
DataLayout prepare_data(const config::RunConfig& cfg, const fs::path& root);

/// Palette of the pseudo-real domain; entry k belongs to label k + 1.
std::vector<std::array<double, 3>> reference_palette();

struct ImageReport {
  std::string extractor_id;
  int count = 0;
  double fid_translated = 0, fid_source = 0;
  double kid_translated = 0, kid_source = 0;
  double mask_iou = 0;         // palette-inferred masks of the translated images
  double mask_iou_source = 0;  // same inference on the untranslated images
  double edge_error = 0;       // translated vs source, x100
  std::optional<double> edge_baseline;  // source vs pose-aligned real, x100

  double fid_drop() const { return fid_source > 0 ? 1.0 - fid_translated / fid_source : 0.0; }
  nlohmann::json to_json() const;
};

/// Compares translated images with their synthetic sources and with real
/// images. `real` is treated as pose-aligned when its poses match `source` in order.
ImageReport evaluate_images(const fs::path& translated, const fs::path& source, const fs::path& real,
                            const config::EvalConfig& eval);

struct PoseReport {
  int count = 0;
  double mean_add = 0;
  double pass_rate = 0;
  double auc = 0;
  nlohmann::json to_json() const;
};

/// ADD statistics of `{"id","R","t"}` predictions against a dataset's poses.
PoseReport evaluate_poses(const fs::path& ground_truth, const fs::path& predictions, const config::EvalConfig& eval);

/// Trains on the layout, translates the held-out set and evaluates it. Writes
/// train/, translated/, metrics.json and config.json under `out`.
nlohmann::json run_pipeline(const config::RunConfig& cfg, const DataLayout& data, const fs::path& out);

struct Variant {
  std::string name;
  nlohmann::json overrides;  // merged into the run config
};

/// full, no_mask, no_nce, no_reg, no_edge.
std::vector<Variant> ablation_variants();

/// Runs every variant on shared data and returns {"rows": [...]} with one row per variant.
nlohmann::json run_ablation(const config::RunConfig& cfg, const DataLayout& data, const fs::path& out);

/// Fixed-width text table of an ablation result.
std::string format_ablation(const nlohmann::json& result);

}  // namespace compstyle::experiment
