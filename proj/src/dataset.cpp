#include "compstyle/dataset.hpp"

#include <fstream>
#include <set>

#include "compstyle/error.hpp"
#include "compstyle/image_io.hpp"

namespace compstyle {

namespace fs = std::filesystem;
using nlohmann::json;

json pose_to_json(const PoseRecord& pose) {
  json R = json::array();
  for (int r = 0; r < 3; ++r) R.push_back({pose.R(r, 0), pose.R(r, 1), pose.R(r, 2)});
  return {{"R", R}, {"t", {pose.t[0], pose.t[1], pose.t[2]}}};
}

PoseRecord pose_from_json(const json& j) {
  PoseRecord pose;
  try {
    const auto& R = j.at("R");
    if (R.size() == 9) {
      for (int i = 0; i < 9; ++i) pose.R(i / 3, i % 3) = R[i].get<double>();
    } else if (R.size() == 3) {
      for (int r = 0; r < 3; ++r) {
        if (R[r].size() != 3) throw ValidationError("R rows must have 3 entries");
        for (int c = 0; c < 3; ++c) pose.R(r, c) = R[r][c].get<double>();
      }
    } else {
      throw ValidationError("R must be 3x3 or a flat 9-array");
    }
    const auto& t = j.at("t");
    if (t.size() != 3) throw ValidationError("t must have 3 entries");
    for (int i = 0; i < 3; ++i) pose.t[i] = t[i].get<double>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed pose: ") + e.what());
  }
  return pose;
}

json intrinsics_to_json(const CameraIntrinsics& k) {
  return {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"w", k.width}, {"h", k.height}};
}

CameraIntrinsics intrinsics_from_json(const json& j) {
  CameraIntrinsics k;
  try {
    k.fx = j.at("fx").get<double>();
    k.fy = j.at("fy").get<double>();
    k.cx = j.at("cx").get<double>();
    k.cy = j.at("cy").get<double>();
    k.width = j.at("w").get<int>();
    k.height = j.at("h").get<int>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed intrinsics: ") + e.what());
  }
  return k;
}

PoseFile read_pose_file(const fs::path& path) {
  const auto j = read_json(path);
  PoseFile pf;
  pf.pose = pose_from_json(j);
  pf.intrinsics = intrinsics_from_json(j.at("intrinsics"));
  return pf;
}

void write_pose_file(const fs::path& path, const PoseRecord& pose, const CameraIntrinsics& k) {
  auto j = pose_to_json(pose);
  j["intrinsics"] = intrinsics_to_json(k);
  write_json(path, j);
}

json to_json(const ManifestEntry& e) {
  return {{"id", e.id}, {"domain_tag", to_string(e.domain)}, {"image", e.image}, {"mask", e.mask}, {"pose", e.pose}};
}

ManifestEntry manifest_entry_from_json(const json& j) {
  ManifestEntry e;
  try {
    e.id = j.at("id").get<std::string>();
    e.domain = domain_tag_from_string(j.at("domain_tag").get<std::string>());
    e.image = j.value("image", "images/" + e.id + ".png");
    e.mask = j.value("mask", "masks/" + e.id + ".png");
    e.pose = j.value("pose", "poses/" + e.id + ".json");
  } catch (const json::exception& ex) {
    throw ValidationError(std::string("malformed manifest record: ") + ex.what());
  }
  return e;
}

Dataset Dataset::open(const fs::path& root) {
  Dataset ds;
  ds.root_ = root;
  std::set<std::string> seen;
  for (const auto& line : read_jsonl(root / "manifest.jsonl")) {
    auto e = manifest_entry_from_json(line);
    if (!seen.insert(e.id).second) throw ValidationError("duplicate sample id '" + e.id + "' in " + root.string());
    ds.entries_.push_back(std::move(e));
  }
  return ds;
}

AnnotatedSample Dataset::load(std::size_t i) const {
  const auto& e = entries_.at(i);
  AnnotatedSample s;
  s.id = e.id;
  s.domain = e.domain;
  s.image = read_rgb_png(root_ / e.image);
  s.mask = read_mask_png(root_ / e.mask);
  const auto pf = read_pose_file(root_ / e.pose);
  s.pose = pf.pose;
  s.intrinsics = pf.intrinsics;
  s.validate();
  return s;
}

ManifestEntry write_sample(const fs::path& root, const AnnotatedSample& sample) {
  ManifestEntry e;
  e.id = sample.id;
  e.domain = sample.domain;
  e.image = "images/" + sample.id + ".png";
  e.mask = "masks/" + sample.id + ".png";
  e.pose = "poses/" + sample.id + ".json";
  write_rgb_png(root / e.image, sample.image);
  write_mask_png(root / e.mask, sample.mask);
  write_pose_file(root / e.pose, sample.pose, sample.intrinsics);
  return e;
}

void write_manifest(const fs::path& root, const std::vector<ManifestEntry>& entries) {
  std::vector<json> lines;
  lines.reserve(entries.size());
  for (const auto& e : entries) lines.push_back(to_json(e));
  write_jsonl(root / "manifest.jsonl", lines);
}

std::vector<json> read_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_jsonl(const fs::path& path, const std::vector<json>& lines) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& l : lines) out << l.dump() << '\n';
}

void write_json(const fs::path& path, const json& doc) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace compstyle
