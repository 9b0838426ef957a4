#include <doctest.h>

#include <Eigen/Geometry>
#include <cmath>

#include "compstyle/domain.hpp"
#include "compstyle/error.hpp"
#include "../test_util.hpp"

using namespace compstyle;

TEST_CASE("standard taxonomy") {
  const auto t = ComponentTaxonomy::standard();
  CHECK(t.size() == 6);
  CHECK(t.regions() == 5);
  CHECK(t.name(0) == "background");
  CHECK(t.index_of("solar_panel") == 2);
  CHECK(t.index_of("nozzle") == 4);
  CHECK(t.index_of("wing") == -1);
  CHECK_FALSE(t.contains(6));
}

TEST_CASE("taxonomy rejects gaps and a non-background first entry") {
  CHECK_THROWS_AS(ComponentTaxonomy({{0, "background"}, {2, "body"}}), ValidationError);
  CHECK_THROWS_AS(ComponentTaxonomy({{0, "body"}, {1, "panel"}}), ValidationError);
}

TEST_CASE("validate_mask") {
  const auto tax = ComponentTaxonomy::standard();
  SUBCASE("all background") {
    const ComponentMask m(5, 7);
    const auto r = validate_mask(m, tax);
    CHECK(r.valid);
    CHECK(r.counts.size() == 1);
    CHECK(r.counts.at(0) == 35);
  }
  SUBCASE("label 9 is out of range") {
    ComponentMask m(3, 3);
    m.at(1, 1) = 9;
    const auto r = validate_mask(m, tax);
    CHECK_FALSE(r.valid);
    CHECK(r.out_of_range == std::set<int>{9});
  }
  SUBCASE("counts match a direct tally") {
    const auto m = testutil::random_mask(4, 4, 2, 3);
    std::map<int, std::size_t> tally;
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x) ++tally[m.at(y, x)];
    const auto r = validate_mask(m, tax);
    CHECK(r.valid);
    CHECK(r.counts == tally);
  }
}

TEST_CASE("object_mask") {
  CHECK(object_mask(ComponentMask(3, 4)).count() == 0);
  CHECK(object_mask(ComponentMask(3, 4, 1)).count() == 12);

  ComponentMask half(4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 2; x < 4; ++x) half.at(y, x) = 2;
  const auto b = object_mask(half);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) CHECK(b.bits[y * 4 + x] == (x >= 2 ? 1 : 0));

  // OR over per-label indicators
  const auto m = testutil::random_mask(9, 11, 5, 17);
  const auto o = object_mask(m);
  for (std::size_t i = 0; i < m.pixels(); ++i) {
    bool any = false;
    for (int l = 1; l <= 5; ++l) any = any || m.labels[i] == l;
    CHECK(o.bits[i] == (any ? 1 : 0));
  }
}

TEST_CASE("resize_mask") {
  const auto m = testutil::random_mask(6, 5, 5, 1);
  CHECK(resize_mask(m, 6, 5) == m);

  ComponentMask two(2, 2);
  two.at(0, 0) = 1;
  two.at(0, 1) = 2;
  two.at(1, 0) = 1;
  two.at(1, 1) = 2;
  const auto row = resize_mask(two, 1, 2);
  CHECK(row.labels == std::vector<Label>{1, 2});

  ComponentMask q(2, 2);
  q.labels = {1, 2, 3, 4};
  const auto big = resize_mask(q, 4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) CHECK(big.at(y, x) == q.at(y / 2, x / 2));

  CHECK_THROWS_AS(resize_mask(q, 0, 3), ValidationError);
}

TEST_CASE("resize_mask never invents labels") {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto m = testutil::random_mask(3 + s % 7, 4 + s % 5, 5, s);
    const auto r = resize_mask(m, 1 + (s * 7) % 13, 1 + (s * 3) % 11);
    const auto in = m.label_set();
    for (Label l : r.label_set()) CHECK(in.count(l) == 1);
  }
}

TEST_CASE("pose validation") {
  PoseRecord p;
  CHECK(p.is_valid());
  p.R = Eigen::AngleAxisd(0.3, Eigen::Vector3d(1, 2, 3).normalized()).toRotationMatrix();
  CHECK(p.is_valid());
  PoseRecord reflected = p;
  reflected.R.col(0) *= -1.0;  // det = -1
  CHECK_FALSE(reflected.is_valid());
  CHECK_THROWS_AS(reflected.validate(), ValidationError);
  PoseRecord scaled = p;
  scaled.R *= 1.0 + 1e-5;
  CHECK_FALSE(scaled.is_valid());

  p.t = {0.1, -0.2, 3.0};
  const auto round = p.compose(p.inverse());
  CHECK((round.R - Eigen::Matrix3d::Identity()).norm() < 1e-12);
  CHECK(round.t.norm() < 1e-12);
}

TEST_CASE("intrinsics validation") {
  auto k = CameraIntrinsics::for_resolution(128, 96);
  CHECK_NOTHROW(k.validate());
  CHECK(k.fx == doctest::Approx(0.9 * 128));
  k.cx = 200;
  CHECK_THROWS_AS(k.validate(), ValidationError);
  k = CameraIntrinsics::for_resolution(64, 64);
  k.fy = 0;
  CHECK_THROWS_AS(k.validate(), ValidationError);
}

TEST_CASE("domain tags round-trip") {
  CHECK(domain_tag_from_string(to_string(DomainTag::real)) == DomainTag::real);
  CHECK(domain_tag_from_string(to_string(DomainTag::synthetic)) == DomainTag::synthetic);
  CHECK_THROWS_AS(domain_tag_from_string("fake"), ValidationError);
}

TEST_CASE("collapse_to_object keeps background") {
  const auto m = testutil::random_mask(8, 8, 5, 2);
  const auto c = collapse_to_object(m);
  for (std::size_t i = 0; i < m.pixels(); ++i) CHECK(c.labels[i] == (m.labels[i] ? 1 : 0));
}
