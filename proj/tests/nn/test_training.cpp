#include "torch_doctest.hpp"

#include <cmath>
#include <set>

#include "compstyle/error.hpp"
#include "compstyle/kernels.hpp"
#include "compstyle/metrics.hpp"
#include "compstyle/training.hpp"
#include "../test_util.hpp"
#include "nn_util.hpp"

using namespace compstyle;
using namespace compstyle::training;

namespace {

const auto kF64 = torch::kFloat64;

torch::Tensor scalar(double v) { return torch::tensor(v, kF64); }

/// Central differences of a scalar function at every entry of x (or the first `limit`).
torch::Tensor numeric_grad(const std::function<double(const torch::Tensor&)>& f, const torch::Tensor& x,
                           double h = 1e-6) {
  auto g = torch::zeros_like(x);
  auto flat = x.detach().clone().reshape(-1);
  auto gf = g.view(-1);
  for (int64_t i = 0; i < flat.numel(); ++i) {
    const double v = flat[i].item<double>();
    flat[i] = v + h;
    const double up = f(flat.view(x.sizes()));
    flat[i] = v - h;
    const double down = f(flat.view(x.sizes()));
    flat[i] = v;
    gf[i] = (up - down) / (2 * h);
  }
  return g;
}

bool grads_close(const torch::Tensor& an, const torch::Tensor& fd, double rel = 1e-3) {
  const double scale = std::max(fd.abs().max().item<double>(), 1e-8);
  return (an - fd).abs().max().item<double>() <= rel * scale;
}

/// Sobel magnitude of the luma with replicate padding, one pixel at a time.
double sobel_at(const torch::Tensor& img, int b, int y, int x) {
  const int H = static_cast<int>(img.size(2)), W = static_cast<int>(img.size(3));
  auto luma = [&](int yy, int xx) {
    yy = std::clamp(yy, 0, H - 1);
    xx = std::clamp(xx, 0, W - 1);
    return kernels::kLumaR * img[b][0][yy][xx].item<double>() + kernels::kLumaG * img[b][1][yy][xx].item<double>() +
           kernels::kLumaB * img[b][2][yy][xx].item<double>();
  };
  const double gx = (luma(y - 1, x + 1) + 2 * luma(y, x + 1) + luma(y + 1, x + 1)) -
                    (luma(y - 1, x - 1) + 2 * luma(y, x - 1) + luma(y + 1, x - 1));
  const double gy = (luma(y + 1, x - 1) + 2 * luma(y + 1, x) + luma(y + 1, x + 1)) -
                    (luma(y - 1, x - 1) + 2 * luma(y - 1, x) + luma(y - 1, x + 1));
  return std::sqrt(gx * gx + gy * gy);
}

torch::Tensor rand_mask(int b, int h, int w, std::uint64_t seed) {
  torch::manual_seed(seed);
  return (torch::rand({b, 1, h, w}, kF64) > 0.4).to(kF64);
}

}  // namespace

TEST_CASE("adversarial losses") {
  const auto zero = torch::zeros({4}, kF64);
  CHECK(adv_loss_d(zero, zero).item<double>() == doctest::Approx(2 * std::log(2.0)).epsilon(1e-12));
  CHECK(adv_loss_g(zero).item<double>() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  const auto real = torch::tensor({2.0, -1.0}, kF64), fake = torch::tensor({0.5, -3.0}, kF64);
  double d = 0, g = 0;
  for (int i = 0; i < 2; ++i) {
    d += std::log1p(std::exp(-real[i].item<double>())) + std::log1p(std::exp(fake[i].item<double>()));
    g += std::log1p(std::exp(-fake[i].item<double>()));
  }
  const auto both = adv_losses(real, fake);
  CHECK(both.d.item<double>() == doctest::Approx(d / 2).epsilon(1e-12));
  CHECK(both.g.item<double>() == doctest::Approx(g / 2).epsilon(1e-12));
}

TEST_CASE("R1 closed forms") {
  torch::manual_seed(0);
  const auto w = torch::randn({1, 3, 8, 8}, kF64);
  const auto x = torch::rand({2, 3, 8, 8}, kF64);
  const DiscriminatorFn linear = [&](const torch::Tensor& in) { return (in * w).sum({1, 2, 3}); };
  CHECK(r1_penalty(linear, x).item<double>() == doctest::Approx(w.pow(2).sum().item<double>()).epsilon(1e-10));
  const DiscriminatorFn constant = [](const torch::Tensor& in) { return torch::zeros({in.size(0)}, kF64) + 3.0; };
  CHECK(r1_penalty(constant, x).item<double>() == 0.0);
}

TEST_CASE("R1 gradient with respect to discriminator weights") {
  torch::manual_seed(1);
  const auto x = torch::rand({2, 3, 8, 8}, kF64);
  auto w = (torch::randn({1, 3, 8, 8}, kF64) * 0.5).requires_grad_(true);
  auto r1_of = [&](const torch::Tensor& weights, bool graph) {
    const DiscriminatorFn d = [&](const torch::Tensor& in) { return torch::tanh(in * weights).sum({1, 2, 3}); };
    return r1_penalty(d, x, graph);
  };
  const auto an = torch::autograd::grad({r1_of(w, true)}, {w})[0];
  const auto fd = numeric_grad([&](const torch::Tensor& v) { return r1_of(v, false).item<double>(); }, w.detach());
  CHECK(grads_close(an, fd));
}

TEST_CASE("PatchNCE closed forms") {
  // identical features everywhere: every logit ties, loss ln P
  const auto q = torch::nn::functional::normalize(torch::ones({2, 6, 4}, kF64),
                                                  torch::nn::functional::NormalizeFuncOptions().dim(2));
  CHECK(patchnce_layer(q, q, 0.07).item<double>() == doctest::Approx(std::log(6.0)).epsilon(1e-12));
  CHECK(patchnce_layer(q.slice(1, 0, 4), q.slice(1, 0, 4), 0.07).item<double>() ==
        doctest::Approx(std::log(4.0)).epsilon(1e-12));

  torch::manual_seed(2);
  const auto a = torch::randn({2, 5, 3}, kF64), b = torch::randn({2, 5, 3}, kF64);
  const double tau = 0.5;
  double total = 0;
  for (int n = 0; n < 2; ++n)
    for (int p = 0; p < 5; ++p) {
      double denom = 0;
      for (int j = 0; j < 5; ++j) denom += std::exp(a[n][p].dot(b[n][j]).item<double>() / tau);
      total += -(a[n][p].dot(b[n][p]).item<double>() / tau - std::log(denom));
    }
  CHECK(patchnce_layer(a, b, tau).item<double>() == doctest::Approx(total / 10).epsilon(1e-10));
  const std::vector<torch::Tensor> qs{a, q.slice(1, 0, 4)}, ks{b, q.slice(1, 0, 4)};
  CHECK(patchnce(qs, ks, tau).item<double>() == doctest::Approx((total / 10 + std::log(4.0)) / 2).epsilon(1e-10));
  CHECK_THROWS_AS(patchnce_layer(a.slice(1, 0, 1), b.slice(1, 0, 1), tau), ValidationError);

  auto qa = a.clone().requires_grad_(true);
  const auto an = torch::autograd::grad({patchnce_layer(qa, b, tau)}, {qa})[0];
  const auto fd = numeric_grad([&](const torch::Tensor& v) { return patchnce_layer(v, b, tau).item<double>(); }, a);
  CHECK(grads_close(an, fd));
}

TEST_CASE("self-regularization") {
  torch::manual_seed(3);
  const auto src = torch::rand({2, 3, 8, 8}, kF64) * 0.8;
  const auto mask = rand_mask(2, 8, 8, 3);
  CHECK(self_reg(src, src + 0.1, mask).item<double>() == doctest::Approx(0.1).epsilon(1e-6));
  CHECK(self_reg(src, src, mask).item<double>() == 0.0);
  // nothing outside the mask counts
  CHECK(self_reg(src, src + 5.0 * (1.0 - mask), mask).item<double>() == 0.0);

  const auto out = torch::rand({2, 3, 8, 8}, kF64);
  double expected = 0;
  for (int b = 0; b < 2; ++b) {
    double s = 0, n = 0;
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) {
        const double m = mask[b][0][y][x].item<double>();
        n += m;
        for (int c = 0; c < 3; ++c) s += m * std::abs(out[b][c][y][x].item<double>() - src[b][c][y][x].item<double>());
      }
    expected += s / (3 * n + 1e-6);
  }
  CHECK(self_reg(src, out, mask).item<double>() == doctest::Approx(expected / 2).epsilon(1e-10));

  auto t = out.clone().requires_grad_(true);
  const auto an = torch::autograd::grad({self_reg(src, t, mask)}, {t})[0];
  const auto fd = numeric_grad([&](const torch::Tensor& v) { return self_reg(src, v, mask).item<double>(); }, out);
  CHECK(grads_close(an, fd));
  CHECK_THROWS_AS(self_reg(src, out.slice(2, 0, 4), mask), ValidationError);
}

TEST_CASE("Sobel edges and edge loss") {
  torch::manual_seed(4);
  const auto img = torch::rand({2, 3, 8, 8}, kF64);
  const auto e = sobel_edges(img);
  for (int b = 0; b < 2; ++b)
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) CHECK(e[b][0][y][x].item<double>() == doctest::Approx(sobel_at(img, b, y, x)).epsilon(1e-10));
  CHECK(sobel_edges(torch::full({1, 3, 8, 8}, 0.3, kF64)).abs().max().item<double>() < 1e-12);

  const auto mask = rand_mask(2, 8, 8, 4);
  // inverted intensities keep every gradient magnitude
  CHECK(edge_loss(img, 1.0 - img, mask).item<double>() < 1e-10);
  // magnitudes scale linearly
  const auto dark = img * 0.5;
  double mean_edge = 0;
  for (int b = 0; b < 2; ++b) {
    const double num = (e[b] * mask[b]).sum().item<double>();
    mean_edge += 0.5 * num / (mask[b].sum().item<double>() + 1e-6);
  }
  CHECK(edge_loss(img, dark, mask).item<double>() == doctest::Approx(mean_edge / 2).epsilon(1e-10));

  const auto out = torch::rand({2, 3, 8, 8}, kF64);
  auto t = out.clone().requires_grad_(true);
  const auto an = torch::autograd::grad({edge_loss(img, t, mask)}, {t})[0];
  const auto fd = numeric_grad([&](const torch::Tensor& v) { return edge_loss(img, v, mask).item<double>(); }, out);
  CHECK(grads_close(an, fd));
}

TEST_CASE("training edge loss and the Edge Error metric agree") {
  const auto a = testutil::random_image(12, 12, 1), b = testutil::random_image(12, 12, 2);
  const auto bin = testutil::random_binary(12, 12, 3);
  const auto ta = nn::image_to_tensor(a).to(kF64), tb = nn::image_to_tensor(b).to(kF64);
  auto m = torch::zeros({1, 1, 12, 12}, kF64);
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 12; ++x) m[0][0][y][x] = static_cast<double>(bin.bits[y * 12 + x]);
  const auto metric = metrics::edge_error(a, b, bin);
  CHECK(metric.scaled == doctest::Approx(100.0 * edge_loss(ta, tb, m).item<double>()).epsilon(1e-5));
}

TEST_CASE("objectives") {
  LossWeights w;
  const GeneratorTerms g{scalar(1), scalar(2), scalar(3), scalar(4)};
  CHECK(generator_objective(g, w).item<double>() == doctest::Approx(5.3).epsilon(1e-12));
  const DiscriminatorTerms d{scalar(1), scalar(0.2)};
  CHECK(discriminator_objective(d, w).item<double>() == doctest::Approx(3.0).epsilon(1e-12));
  try {
    generator_objective({scalar(1), scalar(NAN), scalar(0), scalar(0)}, w);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("L_nce") != std::string::npos);
  }
  CHECK_THROWS_AS(discriminator_objective({scalar(INFINITY), scalar(0)}, w), NumericalError);

  w.tau = 0;
  CHECK_THROWS_AS(w.validate(), ValidationError);
  CHECK(loss_weights_from_json(to_json(LossWeights{})).nce_layers == LossWeights{}.nce_layers);
}

TEST_CASE("patch positions") {
  const auto p = sample_patch_positions(100, 30, 9);
  CHECK(p.size(0) == 30);
  const auto v = std::vector<int64_t>(p.data_ptr<int64_t>(), p.data_ptr<int64_t>() + 30);
  CHECK(std::set<int64_t>(v.begin(), v.end()).size() == 30);
  for (auto i : v) CHECK((i >= 0 && i < 100));
  CHECK(torch::equal(p, sample_patch_positions(100, 30, 9)));
  CHECK_FALSE(torch::equal(p, sample_patch_positions(100, 30, 10)));
  CHECK(std::get<0>(sample_patch_positions(5, 5, 1).sort()).equal(torch::arange(5, torch::kInt64)));
  CHECK_THROWS_AS(sample_patch_positions(5, 6, 1), ValidationError);
}

TEST_CASE("planned steps") {
  TrainConfig c;
  c.epochs = 3;
  c.batch_size = 4;
  CHECK(planned_steps(c, 10) == 9);
  c.max_steps = 5;
  CHECK(planned_steps(c, 10) == 5);
}

TEST_CASE("short training runs are logged and deterministic") {
  const auto synth = testutil::toy_samples(5, 16, DomainTag::synthetic, 1);
  const auto real = testutil::toy_samples(5, 16, DomainTag::real, 1);
  const auto data = make_training_data(synth, real);
  CHECK(data.size() == 5);

  testutil::TempDir dir("train");
  TrainOptions o;
  o.model = testutil::tiny_config();
  o.loss.patches = 16;
  o.loss.nce_layers = {1, 2};
  o.train.batch_size = 2;
  o.train.max_steps = 4;
  o.train.checkpoint_every = 2;
  o.train.seed = 5;
  o.out_dir = dir.path();
  const auto a = train(data, o);
  CHECK(a.log.size() == 4);
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].step == static_cast<int>(i) + 1);
    CHECK(std::isfinite(a.log[i].adv_d));
    CHECK(a.log[i].r1 >= 0.0);
    CHECK(a.log[i].nce > 0.0);
  }
  CHECK(std::filesystem::exists(dir / "train_log.jsonl"));
  CHECK(std::filesystem::exists(dir / "step_000002.ckpt"));
  CHECK(std::filesystem::exists(dir / "checkpoint.ckpt"));
  auto reloaded = nn::load_checkpoint(dir / "checkpoint.ckpt").first;
  CHECK(nn::parameter_hash(reloaded) == a.parameter_hash);
  const auto line = to_json(a.log[0]);
  for (const char* k : {"step", "L_adv_D", "L_R1", "L_adv_G", "L_nce", "L_reg", "L_edge", "lr"}) CHECK(line.contains(k));

  o.out_dir.clear();
  const auto b = train(data, o);
  CHECK(b.parameter_hash == a.parameter_hash);
  CHECK(b.log.back().nce == a.log.back().nce);
  o.train.seed = 6;
  CHECK(train(data, o).parameter_hash != a.parameter_hash);
}

TEST_CASE("heavy structure weights keep the translation closer to its source") {
  const auto synth = testutil::toy_samples(4, 16, DomainTag::synthetic, 2);
  const auto real = testutil::toy_samples(4, 16, DomainTag::real, 2);
  const auto data = make_training_data(synth, real);
  TrainOptions o;
  o.model = testutil::tiny_config();
  o.loss.patches = 16;
  o.loss.nce_layers = {1};
  o.loss.nce = 0;
  o.train.batch_size = 2;
  o.train.max_steps = 120;
  o.train.lr = 2e-3;
  // reg and edge distance of the trained network over all four sources
  auto distances = [&](double reg, double edge) {
    o.loss.reg = reg;
    o.loss.edge = edge;
    auto net = train(data, o).network;
    torch::NoGradGuard guard;
    net->eval();
    const auto out = net->generate(data.synth_images, data.synth_labels,
                                   net->encode_styles(data.ref_images, data.ref_labels));
    const auto m = (data.synth_labels > 0).unsqueeze(1).to(torch::kFloat);
    return std::pair{self_reg(data.synth_images, out.image, m, 1e-8).item<double>(),
                     edge_loss(data.synth_images, out.image, m, 1e-8).item<double>()};
  };
  const auto [free_reg, free_edge] = distances(0, 0);
  CHECK(distances(100, 0).first < 0.5 * free_reg);
  CHECK(distances(0, 100).second < 0.5 * free_edge);
}
