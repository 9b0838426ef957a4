#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "compstyle/domain.hpp"

namespace compstyle {

/// One line of `manifest.jsonl`. Paths are relative to the dataset root.
struct ManifestEntry {
  std::string id;
  DomainTag domain = DomainTag::synthetic;
  std::string image;
  std::string mask;
  std::string pose;
};

struct PoseFile {
  PoseRecord pose;
  CameraIntrinsics intrinsics;
};

nlohmann::json pose_to_json(const PoseRecord& pose);
/// Accepts `R` either nested 3x3 or flat row-major 9-array.
PoseRecord pose_from_json(const nlohmann::json& j);
nlohmann::json intrinsics_to_json(const CameraIntrinsics& k);
CameraIntrinsics intrinsics_from_json(const nlohmann::json& j);

PoseFile read_pose_file(const std::filesystem::path& path);
void write_pose_file(const std::filesystem::path& path, const PoseRecord& pose, const CameraIntrinsics& k);

nlohmann::json to_json(const ManifestEntry& e);
ManifestEntry manifest_entry_from_json(const nlohmann::json& j);

/// Dataset laid out as images/{id}.png, masks/{id}.png, poses/{id}.json
/// plus manifest.jsonl.
class Dataset {
 public:
  /// Reads manifest.jsonl under `root`.
  static Dataset open(const std::filesystem::path& root);

  const std::filesystem::path& root() const { return root_; }
  const std::vector<ManifestEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  AnnotatedSample load(std::size_t i) const;
  std::filesystem::path image_path(std::size_t i) const { return root_ / entries_[i].image; }
  std::filesystem::path mask_path(std::size_t i) const { return root_ / entries_[i].mask; }
  std::filesystem::path pose_path(std::size_t i) const { return root_ / entries_[i].pose; }

 private:
  std::filesystem::path root_;
  std::vector<ManifestEntry> entries_;
};

/// Writes the files of one sample and returns its manifest entry.
ManifestEntry write_sample(const std::filesystem::path& root, const AnnotatedSample& sample);

/// Writes manifest.jsonl in the given order.
void write_manifest(const std::filesystem::path& root, const std::vector<ManifestEntry>& entries);

/// Reads a JSON-lines file; blank lines are skipped.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& lines);

void write_json(const std::filesystem::path& path, const nlohmann::json& doc);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace compstyle
