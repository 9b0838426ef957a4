#include "torch_doctest.hpp"

#include <cmath>
#include <fstream>
#include <iterator>

#include "compstyle/dataset.hpp"
#include "compstyle/error.hpp"
#include "compstyle/image_io.hpp"
#include "compstyle/inference.hpp"
#include "../test_util.hpp"
#include "nn_util.hpp"

using namespace compstyle;
using namespace compstyle::inference;
namespace fs = std::filesystem;

namespace {

std::string bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

nn::TranslationNetwork tiny_net(int res = 16, std::uint64_t seed = 1) {
  return nn::make_network(testutil::tiny_config(res), ComponentTaxonomy::standard(), seed);
}

}  // namespace

TEST_CASE("foreground composition") {
  const auto t = testutil::random_image(9, 7, 1), s = testutil::random_image(9, 7, 2);
  const auto m = testutil::random_binary(9, 7, 3);
  const auto c = compose_foreground(t, s, m);
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 7; ++x)
      for (int ch = 0; ch < 3; ++ch)
        CHECK(c.at(y, x, ch) == (m.bits[y * 7 + x] ? t.at(y, x, ch) : s.at(y, x, ch)));
  CHECK(compose_foreground(c, s, m) == c);
  CHECK(compose_foreground(t, s, BinaryMask(9, 7)) == s);
  CHECK_THROWS_AS(compose_foreground(t, testutil::random_image(9, 8, 1), m), ValidationError);
}

TEST_CASE("translation keeps the background bit-exact") {
  auto net = tiny_net();
  const auto samples = testutil::toy_samples(2, 16, DomainTag::synthetic, 3);
  const auto style = nn::encode_styles(net, samples[1].image, samples[1].mask);
  const auto out = translate_image(net, samples[0].image, samples[0].mask, style);
  const auto obj = object_mask(samples[0].mask);
  int changed = 0;
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x)
      for (int c = 0; c < 3; ++c) {
        if (!obj.bits[y * 16 + x]) CHECK(out.at(y, x, c) == samples[0].image.at(y, x, c));
        else changed += out.at(y, x, c) != samples[0].image.at(y, x, c);
      }
  CHECK(changed > 0);
}

TEST_CASE("selective transfer") {
  auto net = tiny_net();
  const auto samples = testutil::toy_samples(2, 16, DomainTag::synthetic, 4);
  const auto& s = samples[0];
  const auto other = nn::encode_styles(net, samples[1].image, samples[1].mask);
  const auto self = translate_image(net, s.image, s.mask, nn::encode_styles(net, s.image, s.mask));
  CHECK(selective_transfer(net, s.image, s.mask, other, {}) == self);
  CHECK(selective_transfer(net, s.image, s.mask, other, {1, 2, 3, 4, 5}) == translate_image(net, s.image, s.mask, other));
  CHECK_THROWS_AS(selective_transfer(net, s.image, s.mask, other, {0}), ValidationError);
  CHECK_THROWS_AS(selective_transfer(net, s.image, s.mask, other, {9}), ValidationError);

  auto cfg = testutil::tiny_config();
  cfg.component_guidance = false;
  auto flat = nn::make_network(cfg, ComponentTaxonomy::standard(), 1);
  const auto fs_other = nn::encode_styles(flat, samples[1].image, samples[1].mask);
  CHECK(selective_transfer(flat, s.image, s.mask, fs_other, {2}) == translate_image(flat, s.image, s.mask, fs_other));
}

TEST_CASE("style bank completion") {
  StyleBank bank;
  for (int i = 0; i < 3; ++i) {
    nn::StyleMatrix m;
    m.values = torch::full({2, 3}, static_cast<float>(i));
    m.presence = {true, i != 0, i == 2};
    bank.ids.push_back("r" + std::to_string(i));
    bank.styles.push_back(m);
  }
  bank.complete();
  CHECK((bank.styles[0].presence == std::vector<bool>{true, true, true}));
  CHECK(bank.styles[0].values[0][1].item<float>() == doctest::Approx(1.5f));  // mean of refs 1 and 2
  CHECK(bank.styles[0].values[1][2].item<float>() == doctest::Approx(2.0f));
  CHECK(bank.styles[1].values[0][1].item<float>() == 1.0f);  // present columns untouched
  CHECK(bank.styles[1].values[0][0].item<float>() == 1.0f);

  StyleBank empty;
  CHECK_THROWS_AS(empty.validate(), ValidationError);
}

TEST_CASE("dataset translation preserves annotations") {
  testutil::TempDir dir("translate");
  auto net = tiny_net();
  std::vector<ManifestEntry> entries;
  for (auto& s : testutil::toy_samples(6, 16, DomainTag::synthetic, 5)) entries.push_back(write_sample(dir / "src", s));
  write_manifest(dir / "src", entries);
  const auto refs = testutil::toy_samples(3, 16, DomainTag::real, 6);
  const auto bank = build_style_bank(net, refs);
  CHECK(bank.size() == 3);

  const auto report = translate_dataset(net, "abc", dir / "src", bank, 7, dir / "out");
  CHECK(report.translated.size() == 6);
  const auto src = Dataset::open(dir / "src");
  const auto out = Dataset::open(dir / "out");
  REQUIRE(out.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(bytes(out.mask_path(i)) == bytes(src.mask_path(i)));
    CHECK(bytes(out.pose_path(i)) == bytes(src.pose_path(i)));
    const auto a = src.load(i), b = out.load(i);
    const auto obj = object_mask(a.mask);
    for (std::size_t p = 0; p < obj.bits.size(); ++p)
      if (!obj.bits[p])
        for (int c = 0; c < 3; ++c) CHECK(std::abs(a.image.values[p * 3 + c] - b.image.values[p * 3 + c]) <= 1.0f / 255);
  }
  const auto meta = read_json(dir / "out" / "translation.json");
  CHECK(meta.at("checkpoint_hash") == "abc");
  CHECK(meta.at("seed") == 7);

  // same seed, same styles
  const auto again = translate_dataset(net, "abc", dir / "src", bank, 7, dir / "out2");
  CHECK(again.style_of == report.style_of);

  // a missing mask skips that sample only
  fs::remove(src.mask_path(2));
  const auto partial = translate_dataset(net, "abc", dir / "src", bank, 7, dir / "out3");
  CHECK(partial.skipped == std::vector<std::string>{src.entries()[2].id});
  CHECK(partial.translated.size() == 5);
  CHECK(partial.style_of.at(src.entries()[3].id) == report.style_of.at(src.entries()[3].id));

  CHECK_THROWS_AS(translate_dataset(net, "abc", dir / "src", bank, 7, dir / "src"), ValidationError);
}
