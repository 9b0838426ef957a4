#include "compstyle/weakpair.hpp"

#include <algorithm>

#include "compstyle/dataset.hpp"
#include "compstyle/error.hpp"
#include "compstyle/log.hpp"
#include "compstyle/scenegen.hpp"

namespace compstyle::weakpair {

using nlohmann::json;

json to_json(const WeakPair& p) {
  return {{"view_id", p.view_id},         {"real_id", p.real_id}, {"synth_id", p.synth_id},
          {"n_instances", p.n_instances}, {"expected", p.expected}, {"retained", p.retained},
          {"reason", p.reason}};
}

WeakPair weak_pair_from_json(const json& j) {
  WeakPair p;
  try {
    p.view_id = j.at("view_id").get<std::string>();
    p.real_id = j.at("real_id").get<std::string>();
    p.synth_id = j.at("synth_id").get<std::string>();
    p.n_instances = j.at("n_instances").get<int>();
    p.expected = j.value("expected", 1);
    p.retained = j.at("retained").get<bool>();
    p.reason = j.value("reason", "");
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed weak-pair record: ") + e.what());
  }
  return p;
}

std::vector<ViewRecord> read_views(const std::filesystem::path& path) {
  std::vector<ViewRecord> views;
  for (const auto& line : read_jsonl(path)) {
    ViewRecord v;
    try {
      v.view_id = line.at("view_id").get<std::string>();
      v.n_instances = line.value("n_instances", 1);
    } catch (const json::exception& e) {
      throw ValidationError(path.string() + ": " + e.what());
    }
    if (v.n_instances < 0) throw ValidationError("view " + v.view_id + ": negative instance count");
    v.camera_in_world = pose_from_json(line);
    views.push_back(std::move(v));
  }
  return views;
}

std::vector<std::uint8_t> consistency_filter(std::span<const ViewRecord> views, int expected) {
  if (expected < 1) throw ValidationError("expected instance count must be >= 1");
  std::vector<std::uint8_t> keep(views.size());
  std::transform(views.begin(), views.end(), keep.begin(),
                 [expected](const ViewRecord& v) { return static_cast<std::uint8_t>(v.n_instances == expected); });
  return keep;
}

std::size_t BuildResult::retained() const {
  return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [](const auto& p) { return p.retained; }));
}

std::size_t BuildResult::discarded() const { return records.size() - retained(); }

std::vector<WeakPair> BuildResult::usable() const {
  std::vector<WeakPair> out;
  std::copy_if(records.begin(), records.end(), std::back_inserter(out), [](const auto& p) { return p.usable(); });
  return out;
}

BuildResult build_pairs(std::span<const ViewRecord> views, const RenderFn& render, int expected,
                        const std::filesystem::path& out) {
  const auto keep = consistency_filter(views, expected);
  const auto n = static_cast<int>(views.size());
  BuildResult result;
  result.records.resize(n);
  std::vector<ManifestEntry> entries(n);

#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    const auto& view = views[i];
    WeakPair& pair = result.records[i];
    pair.view_id = view.view_id;
    pair.real_id = view.view_id;
    pair.n_instances = view.n_instances;
    pair.expected = expected;
    pair.retained = keep[i] != 0;
    if (!pair.retained) {
      pair.reason = "mismatched sample";
      continue;
    }
    try {
      auto sample = render(view, scenegen::object_pose_from_camera(view.camera_in_world));
      sample.id = synth_id_for(view.view_id);
      sample.domain = DomainTag::synthetic;
      if (!out.empty()) entries[i] = write_sample(out, sample);
      pair.synth_id = sample.id;
    } catch (const std::exception& e) {
      pair.reason = std::string("render failed: ") + e.what();
    }
  }

  for (const auto& p : result.records) {
    if (!p.retained) {
      log::info("view ", p.view_id, " discarded: ", p.reason, " (n=", p.n_instances, ", expected ", expected, ")");
    } else if (!p.reason.empty()) {
      log::warn("view ", p.view_id, ": ", p.reason);
    }
  }

  if (!out.empty()) {
    std::vector<ManifestEntry> written;
    for (int i = 0; i < n; ++i) {
      if (result.records[i].usable()) written.push_back(entries[i]);
    }
    write_manifest(out, written);
    write_pairs(out / "pairs.jsonl", result.records);
  }
  return result;
}

std::vector<WeakPair> read_pairs(const std::filesystem::path& path) {
  std::vector<WeakPair> pairs;
  for (const auto& line : read_jsonl(path)) pairs.push_back(weak_pair_from_json(line));
  return pairs;
}

void write_pairs(const std::filesystem::path& path, std::span<const WeakPair> pairs) {
  std::vector<json> lines;
  for (const auto& p : pairs) lines.push_back(to_json(p));
  write_jsonl(path, lines);
}

}  // namespace compstyle::weakpair
