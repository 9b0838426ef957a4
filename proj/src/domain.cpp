#include "compstyle/domain.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "compstyle/error.hpp"

namespace compstyle {

ComponentTaxonomy::ComponentTaxonomy(std::vector<Entry> entries) : entries_(std::move(entries)) {
  if (entries_.size() < 2) throw ValidationError("taxonomy needs background plus at least one component");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].index != i) throw ValidationError("taxonomy indices must be contiguous from 0");
  }
  if (entries_[0].name != "background") throw ValidationError("taxonomy index 0 must be background");
  if (entries_.size() > 255) throw ValidationError("taxonomy too large for 8-bit masks");
}

ComponentTaxonomy ComponentTaxonomy::standard() {
  return ComponentTaxonomy({{0, "background"},
                            {1, "main_body"},
                            {2, "solar_panel"},
                            {3, "antenna"},
                            {4, "nozzle"},
                            {5, "other"}});
}

const std::string& ComponentTaxonomy::name(Label label) const {
  if (!contains(label)) throw ValidationError("label " + std::to_string(label) + " outside taxonomy");
  return entries_[label].name;
}

int ComponentTaxonomy::index_of(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e.index;
  }
  return -1;
}

bool operator==(const ComponentTaxonomy::Entry& a, const ComponentTaxonomy::Entry& b) {
  return a.index == b.index && a.name == b.name;
}

bool ComponentTaxonomy::operator==(const ComponentTaxonomy& o) const { return entries_ == o.entries_; }

std::set<Label> ComponentMask::label_set() const { return {labels.begin(), labels.end()}; }

std::size_t BinaryMask::count() const {
  std::size_t n = 0;
  for (auto b : bits) n += b != 0;
  return n;
}

void PoseRecord::validate(double tol) const {
  if (!R.allFinite() || !t.allFinite()) throw ValidationError("pose contains non-finite values");
  const double ortho = (R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (ortho > tol) throw ValidationError("rotation is not orthonormal (max |R^T R - I| = " + std::to_string(ortho) + ")");
  const double det = R.determinant();
  if (std::abs(det - 1.0) > tol) throw ValidationError("rotation determinant " + std::to_string(det) + " != 1");
}

bool PoseRecord::is_valid(double tol) const {
  try {
    validate(tol);
    return true;
  } catch (const ValidationError&) {
    return false;
  }
}

PoseRecord PoseRecord::inverse() const {
  PoseRecord inv;
  inv.R = R.transpose();
  inv.t = -(inv.R * t);
  return inv;
}

PoseRecord PoseRecord::compose(const PoseRecord& other) const {
  PoseRecord out;
  out.R = R * other.R;
  out.t = R * other.t + t;
  return out;
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw ValidationError("focal lengths must be positive");
  if (width < 1 || height < 1) throw ValidationError("intrinsics image size must be positive");
  if (cx < 0.0 || cx > width || cy < 0.0 || cy > height) throw ValidationError("principal point outside image");
}

CameraIntrinsics CameraIntrinsics::for_resolution(int width, int height, double focal_scale) {
  CameraIntrinsics k;
  k.fx = k.fy = focal_scale * width;
  k.cx = 0.5 * width;
  k.cy = 0.5 * height;
  k.width = width;
  k.height = height;
  return k;
}

std::string to_string(DomainTag tag) { return tag == DomainTag::real ? "real" : "synthetic"; }

DomainTag domain_tag_from_string(std::string_view s) {
  if (s == "real") return DomainTag::real;
  if (s == "synthetic") return DomainTag::synthetic;
  throw ValidationError("unknown domain tag '" + std::string(s) + "'");
}

void AnnotatedSample::validate() const {
  if (image.height != mask.height || image.width != mask.width) {
    throw ValidationError("sample " + id + ": image and mask sizes differ");
  }
  pose.validate();
  intrinsics.validate();
}

MaskReport validate_mask(const ComponentMask& mask, const ComponentTaxonomy& taxonomy) {
  MaskReport report;
  for (Label l : mask.labels) {
    ++report.counts[l];
    if (!taxonomy.contains(l)) report.out_of_range.insert(l);
  }
  report.valid = report.out_of_range.empty();
  return report;
}

BinaryMask object_mask(const ComponentMask& mask) {
  BinaryMask out(mask.height, mask.width);
  for (std::size_t i = 0; i < mask.labels.size(); ++i) out.bits[i] = mask.labels[i] != kBackground;
  return out;
}

std::vector<int> nearest_indices(int in, int out) {
  if (in < 1 || out < 1) throw ValidationError("resize dimensions must be >= 1");
  std::vector<int> idx(out, 0);
  if (out == 1) return idx;
  // round(i * (in-1) / (out-1)), half rounds up, in exact integer arithmetic
  const long long num = in - 1;
  const long long den = out - 1;
  for (int i = 0; i < out; ++i) idx[i] = static_cast<int>((2 * i * num + den) / (2 * den));
  return idx;
}

ComponentMask resize_mask(const ComponentMask& mask, int height, int width) {
  if (height < 1 || width < 1) throw ValidationError("resize_mask: target dimensions must be >= 1");
  if (height == mask.height && width == mask.width) return mask;
  const auto ys = nearest_indices(mask.height, height);
  const auto xs = nearest_indices(mask.width, width);
  ComponentMask out(height, width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) out.at(y, x) = mask.at(ys[y], xs[x]);
  }
  return out;
}

ComponentMask collapse_to_object(const ComponentMask& mask) {
  ComponentMask out(mask.height, mask.width);
  for (std::size_t i = 0; i < mask.labels.size(); ++i) out.labels[i] = mask.labels[i] != kBackground ? 1 : 0;
  return out;
}

}  // namespace compstyle
