#include <doctest.h>

#include <Eigen/Geometry>
#include <algorithm>
#include <numeric>
#include <random>

#include "compstyle/dataset.hpp"
#include "compstyle/error.hpp"
#include "compstyle/scenegen.hpp"
#include "compstyle/weakpair.hpp"
#include "../test_util.hpp"

using namespace compstyle;
namespace wp = compstyle::weakpair;

namespace {

std::vector<wp::ViewRecord> views_with_counts(const std::vector<int>& counts) {
  std::vector<wp::ViewRecord> v;
  const auto cams = scenegen::sample_camera_poses(scenegen::PoseSamplerConfig{}, static_cast<int>(counts.size()), 8);
  for (std::size_t i = 0; i < counts.size(); ++i) v.push_back({"v" + std::to_string(i), cams[i], counts[i]});
  return v;
}

wp::RenderFn toy_render(int resolution) {
  return [resolution](const wp::ViewRecord&, const PoseRecord& pose) {
    const scenegen::ToySatelliteSpec spec;
    return scenegen::render_scene(spec, pose, CameraIntrinsics::for_resolution(resolution, resolution),
                                  scenegen::DomainAppearance::synthetic(), 1);
  };
}

std::vector<std::uint8_t> expected_flags(const std::vector<int>& counts, int nbar) {
  std::vector<std::uint8_t> m;
  for (int n : counts) m.push_back(n == nbar ? 1 : 0);
  return m;
}

}  // namespace

TEST_CASE("consistency filter") {
  CHECK(wp::consistency_filter(views_with_counts({1, 1, 1}), 1) == std::vector<std::uint8_t>{1, 1, 1});
  CHECK(wp::consistency_filter(views_with_counts({1, 2, 1, 0}), 1) == std::vector<std::uint8_t>{1, 0, 1, 0});
  CHECK(wp::consistency_filter(views_with_counts({2, 2, 1}), 2) == std::vector<std::uint8_t>{1, 1, 0});
  CHECK_THROWS_AS(wp::consistency_filter(views_with_counts({1}), 0), ValidationError);
}

TEST_CASE("60 of 100 views retained") {
  std::vector<int> counts(100, 1);
  std::mt19937_64 rng(60);
  std::vector<int> idx(100);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  for (int i = 0; i < 40; ++i) counts[idx[i]] = (i % 3 == 0) ? 0 : 2 + i % 2;
  const auto flags = wp::consistency_filter(views_with_counts(counts), 1);
  CHECK(flags == expected_flags(counts, 1));
  CHECK(std::count(flags.begin(), flags.end(), 1) == 60);
}

TEST_CASE("filter is idempotent on retained views") {
  const std::vector<int> counts{1, 0, 2, 1, 1, 3};
  const auto views = views_with_counts(counts);
  const auto flags = wp::consistency_filter(views, 1);
  std::vector<wp::ViewRecord> kept;
  for (std::size_t i = 0; i < views.size(); ++i)
    if (flags[i]) kept.push_back(views[i]);
  const auto again = wp::consistency_filter(kept, 1);
  CHECK(std::all_of(again.begin(), again.end(), [](auto f) { return f == 1; }));
}

TEST_CASE("build_pairs follows the filter") {
  CHECK(wp::build_pairs({}, toy_render(16), 1).records.empty());

  const auto r = wp::build_pairs(views_with_counts({1, 2, 1, 0}), toy_render(24), 1);
  REQUIRE(r.records.size() == 4);
  CHECK(r.retained() == 2);
  CHECK(r.discarded() == 2);
  CHECK(r.records[1].reason == "mismatched sample");
  CHECK(r.records[3].reason == "mismatched sample");
  for (const auto& p : r.usable()) CHECK(p.real_id == p.view_id);  // no pair crosses views
}

TEST_CASE("render failures mark the pair and the run continues") {
  auto views = views_with_counts({1, 1, 1});
  wp::RenderFn render = [](const wp::ViewRecord& v, const PoseRecord& pose) {
    if (v.view_id == "v1") throw DegenerateSampleError("empty footprint");
    return toy_render(16)(v, pose);
  };
  const auto r = wp::build_pairs(views, render, 1);
  CHECK(r.usable().size() == 2);
  CHECK(r.records[1].retained);
  CHECK(r.records[1].reason.rfind("render failed", 0) == 0);
}

TEST_CASE("pairs on disk share the real camera pose bit-exactly") {
  testutil::TempDir dir("pairs");
  const auto views = views_with_counts(std::vector<int>(20, 1));
  const auto r = wp::build_pairs(views, toy_render(32), 1, dir.path());
  CHECK(r.usable().size() == 20);

  const auto ds = Dataset::open(dir.path());
  REQUIRE(ds.size() == 20);
  const auto pairs = wp::read_pairs(dir / "pairs.jsonl");
  REQUIRE(pairs.size() == 20);
  for (std::size_t i = 0; i < 20; ++i) {
    CHECK(pairs[i].synth_id == wp::synth_id_for(views[i].view_id));
    const auto s = ds.load(i);
    CHECK(s.id == pairs[i].synth_id);
    CHECK(s.pose == scenegen::object_pose_from_camera(views[i].camera_in_world));
  }

  const auto doc = read_jsonl(dir / "pairs.jsonl").front();
  for (const char* key : {"view_id", "real_id", "synth_id", "n_instances", "retained", "reason"}) CHECK(doc.contains(key));
}

TEST_CASE("views manifest: missing count defaults to 1, negative count is rejected") {
  testutil::TempDir dir("views");
  auto line = pose_to_json(PoseRecord{});
  line["view_id"] = "a";
  write_jsonl(dir / "v.jsonl", {line});
  CHECK(wp::read_views(dir / "v.jsonl").front().n_instances == 1);
  line["n_instances"] = -1;
  write_jsonl(dir / "v.jsonl", {line});
  CHECK_THROWS_AS(wp::read_views(dir / "v.jsonl"), ValidationError);
}
