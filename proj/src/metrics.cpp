#include "compstyle/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "compstyle/dataset.hpp"
#include "compstyle/error.hpp"

namespace compstyle::metrics {
namespace {

void check_compatible(const FeatureSet& a, const FeatureSet& b) {
  if (a.extractor_id != b.extractor_id) {
    throw ValidationError("feature sets come from different extractors ('" + a.extractor_id + "' vs '" +
                          b.extractor_id + "')");
  }
  if (a.dim() != b.dim()) throw ValidationError("feature dimensions differ");
  if (!a.features.allFinite() || !b.features.allFinite()) throw ValidationError("non-finite features");
}

Eigen::MatrixXd covariance(const Eigen::MatrixXd& x, const Eigen::RowVectorXd& mean) {
  const Eigen::MatrixXd centered = x.rowwise() - mean;
  return (centered.transpose() * centered) / static_cast<double>(x.rows() - 1);
}

/// Eigenvalues of a symmetric PSD matrix, clamping tiny negatives.
Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> psd_eigen(const Eigen::MatrixXd& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
  if (solver.info() != Eigen::Success) {
    throw NumericalError(std::string("eigendecomposition of ") + what + " did not converge");
  }
  const auto& ev = solver.eigenvalues();
  const double top = std::max(1.0, ev.maxCoeff());
  if (ev.minCoeff() < -1e-8 * top) {
    std::ostringstream os;
    os << what << " is not positive semi-definite: min eigenvalue " << ev.minCoeff() << ", max " << ev.maxCoeff()
       << ", condition " << std::abs(ev.maxCoeff() / ev.minCoeff());
    throw NumericalError(os.str());
  }
  return solver;
}

}  // namespace

double fid(const FeatureSet& a, const FeatureSet& b) {
  check_compatible(a, b);
  if (a.count() < 2 || b.count() < 2) throw ValidationError("FID needs at least two samples per set");
  const Eigen::RowVectorXd mu_a = a.features.colwise().mean();
  const Eigen::RowVectorXd mu_b = b.features.colwise().mean();
  const Eigen::MatrixXd cov_a = covariance(a.features, mu_a);
  const Eigen::MatrixXd cov_b = covariance(b.features, mu_b);

  // Tr (S_a S_b)^{1/2} = Tr (S_a^{1/2} S_b S_a^{1/2})^{1/2}
  const auto ea = psd_eigen(cov_a, "covariance A");
  const Eigen::VectorXd root_vals = ea.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd root_a = ea.eigenvectors() * root_vals.asDiagonal() * ea.eigenvectors().transpose();
  Eigen::MatrixXd inner = root_a * cov_b * root_a;
  inner = 0.5 * (inner + inner.transpose());
  const auto ei = psd_eigen(inner, "covariance product");
  const double tr_root = ei.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

  const double value = (mu_a - mu_b).squaredNorm() + cov_a.trace() + cov_b.trace() - 2.0 * tr_root;
  return std::max(value, 0.0);
}

double mmd2_unbiased(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  const int m = static_cast<int>(x.rows());
  const int n = static_cast<int>(y.rows());
  const int d = static_cast<int>(x.cols());
  if (m < 2 || n < 2) throw ValidationError("MMD needs at least two samples per set");
  // row-major copies for the kernel loops
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> xr = x, yr = y;
  const std::span<const double> xs(xr.data(), xr.size()), ys(yr.data(), yr.size());
  const double kxx = kernels::parallel::poly_kernel_sum(xs, xs, m, m, d, true);
  const double kyy = kernels::parallel::poly_kernel_sum(ys, ys, n, n, d, true);
  const double kxy = kernels::parallel::poly_kernel_sum(xs, ys, m, n, d, false);
  return kxx / (static_cast<double>(m) * (m - 1)) + kyy / (static_cast<double>(n) * (n - 1)) -
         2.0 * kxy / (static_cast<double>(m) * n);
}

double kid(const FeatureSet& a, const FeatureSet& b, const KidOptions& options) {
  check_compatible(a, b);
  const int m = options.subset_size;
  if (m < 2) throw ValidationError("KID subset size must be >= 2");
  if (m > a.count() || m > b.count()) throw ValidationError("KID subset size exceeds the number of samples");
  if (options.subsets < 1) throw ValidationError("KID needs at least one subset");

  std::mt19937_64 rng(options.seed);
  std::vector<int> ia(a.count()), ib(b.count());
  double total = 0.0;
  Eigen::MatrixXd xs(m, a.dim()), ys(m, b.dim());
  for (int s = 0; s < options.subsets; ++s) {
    std::iota(ia.begin(), ia.end(), 0);
    std::iota(ib.begin(), ib.end(), 0);
    std::shuffle(ia.begin(), ia.end(), rng);
    std::shuffle(ib.begin(), ib.end(), rng);
    for (int i = 0; i < m; ++i) {
      xs.row(i) = a.features.row(ia[i]);
      ys.row(i) = b.features.row(ib[i]);
    }
    total += mmd2_unbiased(xs, ys);
  }
  return total / options.subsets;
}

double add_error(const PoseRecord& gt, const PoseRecord& pred, std::span<const Eigen::Vector3d> points) {
  if (points.empty()) throw ValidationError("ADD needs a non-empty model point set");
  double sum = 0.0;
  for (const auto& x : points) sum += ((gt.R * x + gt.t) - (pred.R * x + pred.t)).norm();
  return sum / static_cast<double>(points.size());
}

double pass_rate(std::span<const double> errors, double threshold) {
  if (errors.empty()) throw ValidationError("pass rate of an empty error list");
  if (!(threshold > 0.0)) throw ValidationError("pass-rate threshold must be > 0");
  const auto hits = std::count_if(errors.begin(), errors.end(), [threshold](double e) { return e < threshold; });
  return static_cast<double>(hits) / static_cast<double>(errors.size());
}

double auc(std::span<const double> errors, double max_threshold) {
  if (errors.empty()) throw ValidationError("AUC of an empty error list");
  if (!(max_threshold > 0.0)) throw ValidationError("AUC max threshold must be > 0");
  // pass_rate(t) = #(e < t) / n is a step function; each error below the
  // maximum contributes (max - e) to the integral.
  std::vector<double> sorted(errors.begin(), errors.end());
  std::sort(sorted.begin(), sorted.end());
  double area = 0.0;
  for (double e : sorted) {
    if (e >= max_threshold) break;
    area += max_threshold - std::max(e, 0.0);
  }
  return area / (static_cast<double>(sorted.size()) * max_threshold);
}

IouResult mask_iou(const ComponentMask& inferred, const ComponentMask& reference) {
  if (inferred.height != reference.height || inferred.width != reference.width) {
    throw ValidationError("mask_iou: size mismatch");
  }
  std::map<int, std::size_t> inter, uni;
  for (std::size_t i = 0; i < inferred.labels.size(); ++i) {
    const int a = inferred.labels[i], b = reference.labels[i];
    if (a == b) {
      if (a != kBackground) {
        ++inter[a];
        ++uni[a];
      }
    } else {
      if (a != kBackground) ++uni[a];
      if (b != kBackground) ++uni[b];
    }
  }
  IouResult result;
  double sum = 0.0;
  for (const auto& [label, u] : uni) {
    const double iou = static_cast<double>(inter[label]) / static_cast<double>(u);
    result.per_class[label] = iou;
    sum += iou;
  }
  if (!result.per_class.empty()) result.mean = sum / static_cast<double>(result.per_class.size());
  return result;
}

EdgeError edge_error(const ImageBuffer& source, const ImageBuffer& translated, const BinaryMask& object) {
  if (source.height != translated.height || source.width != translated.width) {
    throw ValidationError("edge_error: shape mismatch");
  }
  const auto es = kernels::parallel::sobel_magnitude(source);
  const auto et = kernels::parallel::sobel_magnitude(translated);
  EdgeError out;
  out.raw = kernels::parallel::masked_abs_mean(et, es, object, kMaskEps);
  out.scaled = out.raw * kEdgeErrorScale;
  return out;
}

ComponentMask infer_mask_by_palette(const ImageBuffer& image, const BinaryMask& object,
                                    std::span<const std::array<double, 3>> palette) {
  if (palette.empty()) throw ValidationError("palette must not be empty");
  return kernels::parallel::classify_palette(image, object, palette);
}

DeskExtractor::DeskExtractor(std::uint64_t seed) : id_("desk-randconv-v1-seed" + std::to_string(seed)) {
  std::mt19937_64 rng(seed);
  const int widths[] = {3, 16, 32, 64};
  for (int l = 0; l < 3; ++l) {
    kernels::ConvLayer layer;
    layer.in_channels = widths[l];
    layer.out_channels = widths[l + 1];
    layer.stride = 2;
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / (9.0 * layer.in_channels)));
    layer.weights.resize(static_cast<std::size_t>(layer.out_channels) * layer.in_channels * 9);
    for (auto& w : layer.weights) w = static_cast<float>(normal(rng));
    layer.bias.resize(layer.out_channels);
    for (auto& b : layer.bias) b = static_cast<float>(0.1 * normal(rng));
    layers_.push_back(std::move(layer));
  }
}

int DeskExtractor::dim() const {
  int d = 0;
  for (const auto& l : layers_) d += l.out_channels;
  return d;
}

Eigen::VectorXd DeskExtractor::embed(const ImageBuffer& image) const {
  kernels::Tensor3 x(3, image.height, image.width);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < image.height; ++y) {
      for (int xx = 0; xx < image.width; ++xx) x.at(c, y, xx) = image.at(y, xx, c) - 0.5f;
    }
  }
  Eigen::VectorXd out(dim());
  int offset = 0;
  for (const auto& layer : layers_) {
    x = kernels::parallel::conv3x3_relu(x, layer);
    const std::size_t plane = static_cast<std::size_t>(x.height) * x.width;
    for (int c = 0; c < x.channels; ++c) {
      double s = 0.0;
      for (std::size_t i = 0; i < plane; ++i) s += x.values[c * plane + i];
      out[offset + c] = s / static_cast<double>(plane);
    }
    offset += x.channels;
  }
  return out;
}

FeatureSet DeskExtractor::embed_all(std::span<const ImageBuffer> images) const {
  FeatureSet set;
  set.extractor_id = id_;
  set.features.resize(static_cast<Eigen::Index>(images.size()), dim());
  for (std::size_t i = 0; i < images.size(); ++i) set.features.row(static_cast<Eigen::Index>(i)) = embed(images[i]).transpose();
  return set;
}

std::map<std::string, PoseRecord> read_predictions(const std::filesystem::path& path) {
  std::map<std::string, PoseRecord> out;
  for (const auto& line : read_jsonl(path)) {
    std::string id;
    try {
      id = line.at("id").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path.string() + ": " + e.what());
    }
    auto pose = pose_from_json(line);
    pose.validate();
    if (!out.emplace(id, pose).second) throw ValidationError("duplicate prediction for '" + id + "'");
  }
  return out;
}

}  // namespace compstyle::metrics
