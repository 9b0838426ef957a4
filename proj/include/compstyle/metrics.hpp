#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "compstyle/domain.hpp"
#include "compstyle/kernels.hpp"

namespace compstyle::metrics {

/// N x D embeddings of a set of images, tagged with the extractor that made them.
struct FeatureSet {
  std::string extractor_id;
  Eigen::MatrixXd features;

  Eigen::Index count() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }
};

/// ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2}) with unbiased covariances.
/// The matrix square root goes through symmetric eigendecompositions; eigenvalues
/// above -1e-8 * max(1, lambda_max) are clamped to zero, anything lower is an error.
double fid(const FeatureSet& a, const FeatureSet& b);

struct KidOptions {
  int subset_size = 100;
  int subsets = 100;
  std::uint64_t seed = 42;
};

/// Unbiased MMD^2 with k(x, y) = (x.y / D + 1)^3 over all rows of both matrices.
double mmd2_unbiased(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y);

/// Mean of `mmd2_unbiased` over random subsets drawn without replacement.
double kid(const FeatureSet& a, const FeatureSet& b, const KidOptions& options = {});

/// Mean Euclidean distance between model points under the two poses (meters).
double add_error(const PoseRecord& gt, const PoseRecord& pred, std::span<const Eigen::Vector3d> points);

/// Fraction of errors strictly below `threshold`.
double pass_rate(std::span<const double> errors, double threshold = 0.02);

/// Area under the pass-rate curve on [0, max_threshold], normalized to [0, 1].
double auc(std::span<const double> errors, double max_threshold = 0.10);

struct IouResult {
  std::map<int, double> per_class;  // classes absent from both masks are skipped
  double mean = 1.0;                // 1.0 when no class is present in either mask
};

IouResult mask_iou(const ComponentMask& inferred, const ComponentMask& reference);

struct EdgeError {
  double raw = 0.0;     // masked mean |E(translated) - E(source)|
  double scaled = 0.0;  // raw * kEdgeErrorScale
};

inline constexpr double kEdgeErrorScale = 100.0;
inline constexpr double kMaskEps = 1e-6;

EdgeError edge_error(const ImageBuffer& source, const ImageBuffer& translated, const BinaryMask& object);

/// Labels foreground pixels by nearest palette colour (cosine similarity);
/// palette[k] belongs to label k + 1. Background stays 0.
ComponentMask infer_mask_by_palette(const ImageBuffer& image, const BinaryMask& object,
                                    std::span<const std::array<double, 3>> palette);

/// Fixed, seeded random convolutional embedding: three stride-2 3x3 conv+ReLU
/// layers (16, 32, 64 channels); the embedding is the concatenated per-channel
/// spatial means of all three layers.
class DeskExtractor {
 public:
  explicit DeskExtractor(std::uint64_t seed = 2024);

  const std::string& id() const { return id_; }
  int dim() const;
  Eigen::VectorXd embed(const ImageBuffer& image) const;
  FeatureSet embed_all(std::span<const ImageBuffer> images) const;

 private:
  std::string id_;
  std::vector<kernels::ConvLayer> layers_;
};

std::map<std::string, PoseRecord> read_predictions(const std::filesystem::path& path);

}  // namespace compstyle::metrics
