#include "compstyle/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <random>

#include "compstyle/dataset.hpp"
#include "compstyle/error.hpp"
#include "compstyle/kernels.hpp"
#include "compstyle/log.hpp"
#include "compstyle/scenegen.hpp"
#include "compstyle/weakpair.hpp"

namespace compstyle::training {

namespace F = torch::nn::functional;
using nlohmann::json;

void LossWeights::validate() const {
  if (r1 < 0 || nce < 0 || reg < 0 || edge < 0) throw ValidationError("loss weights must be >= 0");
  if (!(tau > 0)) throw ValidationError("tau must be > 0");
  if (patches < 2) throw ValidationError("PatchNCE needs at least 2 patches per layer");
  if (!(eps > 0)) throw ValidationError("eps must be > 0");
  if (nce_layers.empty()) throw ValidationError("PatchNCE layer set is empty");
  for (int l : nce_layers) {
    if (l < 1) throw ValidationError("PatchNCE layers are 1-based");
  }
}

json to_json(const LossWeights& w) {
  return {{"r1", w.r1},   {"nce", w.nce},       {"reg", w.reg},         {"edge", w.edge},
          {"tau", w.tau}, {"nce_layers", w.nce_layers}, {"patches", w.patches}, {"eps", w.eps}};
}

LossWeights loss_weights_from_json(const json& j) {
  LossWeights w;
  w.r1 = j.at("r1").get<double>();
  w.nce = j.at("nce").get<double>();
  w.reg = j.at("reg").get<double>();
  w.edge = j.at("edge").get<double>();
  w.tau = j.at("tau").get<double>();
  w.nce_layers = j.at("nce_layers").get<std::vector<int>>();
  w.patches = j.at("patches").get<int>();
  w.eps = j.at("eps").get<double>();
  return w;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  if (batch_size < 1) throw ValidationError("batch size must be >= 1");
  if (!(lr > 0)) throw ValidationError("learning rate must be > 0");
  if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1) throw ValidationError("Adam betas must be in [0, 1)");
  if (checkpoint_every < 0 || max_steps < 0) throw ValidationError("step counts must be >= 0");
}

json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs}, {"batch_size", c.batch_size}, {"lr", c.lr},
          {"beta1", c.beta1},   {"beta2", c.beta2},           {"seed", c.seed},
          {"checkpoint_every", c.checkpoint_every}, {"max_steps", c.max_steps}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.lr = j.at("lr").get<double>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.checkpoint_every = j.at("checkpoint_every").get<int>();
  c.max_steps = j.at("max_steps").get<int>();
  return c;
}

// ---------------------------------------------------------------------------
// losses

torch::Tensor adv_loss_d(const torch::Tensor& real_logits, const torch::Tensor& fake_logits) {
  return F::softplus(-real_logits).mean() + F::softplus(fake_logits).mean();
}

torch::Tensor adv_loss_g(const torch::Tensor& fake_logits) { return F::softplus(-fake_logits).mean(); }

AdvLosses adv_losses(const torch::Tensor& real_logits, const torch::Tensor& fake_logits) {
  return {adv_loss_d(real_logits, fake_logits), adv_loss_g(fake_logits)};
}

torch::Tensor r1_penalty(const DiscriminatorFn& discriminator, const torch::Tensor& real, bool create_graph) {
  auto x = real.detach().clone().requires_grad_(true);
  const auto scores = discriminator(x);
  if (!scores.requires_grad()) return torch::zeros({}, real.options());
  const auto grads = torch::autograd::grad({scores.sum()}, {x}, {}, /*retain_graph=*/create_graph, create_graph,
                                           /*allow_unused=*/true);
  if (!grads[0].defined()) return torch::zeros({}, real.options());
  return grads[0].pow(2).flatten(1).sum(1).mean();
}

torch::Tensor patchnce_layer(const torch::Tensor& q, const torch::Tensor& k, double tau) {
  if (q.sizes() != k.sizes() || q.dim() != 3) throw ValidationError("patchnce: q and k must both be [B,P,D]");
  const auto B = q.size(0), P = q.size(1);
  if (P < 2) throw ValidationError("patchnce: need at least 2 patches for negatives");
  const auto logits = torch::bmm(q, k.transpose(1, 2)) / tau;  // [B,P,P]
  const auto target = torch::arange(P, torch::kInt64).repeat({B});
  return F::cross_entropy(logits.reshape({B * P, P}), target);
}

torch::Tensor patchnce(std::span<const torch::Tensor> q, std::span<const torch::Tensor> k, double tau) {
  if (q.size() != k.size() || q.empty()) throw ValidationError("patchnce: layer lists differ or are empty");
  auto total = patchnce_layer(q[0], k[0], tau);
  for (std::size_t l = 1; l < q.size(); ++l) total = total + patchnce_layer(q[l], k[l], tau);
  return total / static_cast<double>(q.size());
}

namespace {

void check_pair(const torch::Tensor& a, const torch::Tensor& b, const torch::Tensor& mask, const char* what) {
  if (a.sizes() != b.sizes()) throw ValidationError(std::string(what) + ": image shapes differ");
  if (mask.dim() != 4 || mask.size(1) != 1 || mask.size(0) != a.size(0) || mask.size(2) != a.size(2) ||
      mask.size(3) != a.size(3)) {
    throw ValidationError(std::string(what) + ": mask must be [B,1,H,W] matching the images");
  }
}

torch::Tensor masked_l1(const torch::Tensor& diff, const torch::Tensor& mask, double eps) {
  const auto channels = static_cast<double>(diff.size(1));
  const auto num = (diff.abs() * mask).sum({1, 2, 3});
  const auto den = mask.sum({1, 2, 3}) * channels + eps;
  return (num / den).mean();
}

/// sqrt with a zero subgradient at 0 instead of inf.
torch::Tensor safe_sqrt(const torch::Tensor& x) {
  const auto positive = x > 0;
  return torch::where(positive, torch::sqrt(torch::where(positive, x, torch::ones_like(x))), torch::zeros_like(x));
}

}  // namespace

torch::Tensor self_reg(const torch::Tensor& source, const torch::Tensor& translated, const torch::Tensor& mask,
                       double eps) {
  check_pair(source, translated, mask, "self_reg");
  return masked_l1(translated - source, mask, eps);
}

torch::Tensor sobel_edges(const torch::Tensor& images) {
  if (images.dim() != 4 || images.size(1) != 3) throw ValidationError("sobel_edges expects [B,3,H,W]");
  const auto opts = images.options();
  const auto luma = torch::tensor({kernels::kLumaR, kernels::kLumaG, kernels::kLumaB}, opts).view({1, 3, 1, 1});
  const auto y = (images * luma).sum(1, true);
  const auto padded = F::pad(y, F::PadFuncOptions({1, 1, 1, 1}).mode(torch::kReplicate));
  const auto gx_k = torch::tensor({-1.0, 0.0, 1.0, -2.0, 0.0, 2.0, -1.0, 0.0, 1.0}, opts).view({1, 1, 3, 3});
  const auto gy_k = gx_k.transpose(2, 3).contiguous();
  const auto gx = F::conv2d(padded, gx_k);
  const auto gy = F::conv2d(padded, gy_k);
  return safe_sqrt(gx * gx + gy * gy);
}

torch::Tensor edge_loss(const torch::Tensor& source, const torch::Tensor& translated, const torch::Tensor& mask,
                        double eps) {
  check_pair(source, translated, mask, "edge_loss");
  return masked_l1(sobel_edges(translated) - sobel_edges(source), mask, eps);
}

namespace {

void require_finite(const torch::Tensor& t, const char* name) {
  if (!t.defined()) throw ValidationError(std::string("loss term ") + name + " is missing");
  const double v = t.item<double>();
  if (!std::isfinite(v)) throw NumericalError(std::string("non-finite loss term ") + name + " = " + std::to_string(v));
}

}  // namespace

torch::Tensor generator_objective(const GeneratorTerms& t, const LossWeights& w) {
  require_finite(t.adv, "L_adv_G");
  require_finite(t.nce, "L_nce");
  require_finite(t.reg, "L_reg");
  require_finite(t.edge, "L_edge");
  return t.adv + w.nce * t.nce + w.reg * t.reg + w.edge * t.edge;
}

torch::Tensor discriminator_objective(const DiscriminatorTerms& t, const LossWeights& w) {
  require_finite(t.adv, "L_adv_D");
  require_finite(t.r1, "L_R1");
  return t.adv + w.r1 * t.r1;
}

torch::Tensor sample_patch_positions(int64_t positions, int count, std::uint64_t seed) {
  if (count > positions) throw ValidationError("more patches requested than positions available");
  std::vector<int64_t> idx(static_cast<std::size_t>(positions));
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  // partial Fisher-Yates: the first `count` entries are a uniform sample
  for (int i = 0; i < count; ++i) {
    std::uniform_int_distribution<int64_t> pick(i, positions - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(count);
  return torch::tensor(idx, torch::kInt64);
}

// ---------------------------------------------------------------------------
// data

namespace {

std::pair<torch::Tensor, torch::Tensor> stack_samples(std::span<const AnnotatedSample> samples, const char* what) {
  if (samples.empty()) throw ValidationError(std::string("no ") + what + " samples");
  const int h = samples[0].image.height, w = samples[0].image.width;
  std::vector<torch::Tensor> images, labels;
  for (const auto& s : samples) {
    if (s.image.height != h || s.image.width != w || s.mask.height != h || s.mask.width != w) {
      throw ValidationError(std::string(what) + " sample " + s.id + " has a different size");
    }
    images.push_back(nn::image_to_tensor(s.image));
    labels.push_back(nn::labels_to_tensor(s.mask));
  }
  return {torch::cat(images, 0), torch::cat(labels, 0)};
}

}  // namespace

TrainingData make_training_data(std::span<const AnnotatedSample> synthetic, std::span<const AnnotatedSample> references) {
  TrainingData d;
  std::tie(d.synth_images, d.synth_labels) = stack_samples(synthetic, "synthetic");
  std::tie(d.ref_images, d.ref_labels) = stack_samples(references, "reference");
  for (const auto& s : synthetic) d.synth_ids.push_back(s.id);
  for (const auto& s : references) d.ref_ids.push_back(s.id);
  return d;
}

TrainingData load_training_data(const std::filesystem::path& pairs_dir, const std::filesystem::path& real_dir) {
  const auto pairs = weakpair::read_pairs(pairs_dir / "pairs.jsonl");
  const auto synth = Dataset::open(pairs_dir);
  const auto real = Dataset::open(real_dir);
  std::map<std::string, std::size_t> synth_index, real_index;
  for (std::size_t i = 0; i < synth.size(); ++i) synth_index[synth.entries()[i].id] = i;
  for (std::size_t i = 0; i < real.size(); ++i) real_index[real.entries()[i].id] = i;

  std::vector<AnnotatedSample> synthetic, references;
  for (const auto& p : pairs) {
    if (!p.usable()) continue;
    const auto s = synth_index.find(p.synth_id);
    const auto r = real_index.find(p.real_id);
    if (s == synth_index.end()) throw ValidationError("weak pair " + p.view_id + ": synthetic sample missing");
    if (r == real_index.end()) throw ValidationError("weak pair " + p.view_id + ": real sample " + p.real_id + " missing");
    synthetic.push_back(synth.load(s->second));
    references.push_back(real.load(r->second));
  }
  if (synthetic.empty()) throw ValidationError("no usable weak pairs in " + pairs_dir.string());
  return make_training_data(synthetic, references);
}

json to_json(const StepLog& s) {
  return {{"step", s.step},   {"L_adv_D", s.adv_d}, {"L_R1", s.r1},     {"L_adv_G", s.adv_g},
          {"L_nce", s.nce},   {"L_reg", s.reg},     {"L_edge", s.edge}, {"lr", s.lr}};
}

// ---------------------------------------------------------------------------
// loop

int planned_steps(const TrainConfig& config, int64_t samples) {
  if (config.max_steps > 0) return config.max_steps;
  const int64_t per_epoch = (samples + config.batch_size - 1) / config.batch_size;
  return static_cast<int>(per_epoch * config.epochs);
}

namespace {

class BatchOrder {
 public:
  BatchOrder(int64_t n, int batch, std::mt19937_64& rng) : order_(static_cast<std::size_t>(n)), batch_(batch), rng_(rng) {
    reshuffle();
  }

  torch::Tensor next() {
    if (cursor_ >= order_.size()) reshuffle();
    const auto end = std::min(order_.size(), cursor_ + static_cast<std::size_t>(batch_));
    std::vector<int64_t> idx(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                             order_.begin() + static_cast<std::ptrdiff_t>(end));
    cursor_ = end;
    return torch::tensor(idx, torch::kInt64);
  }

 private:
  void reshuffle() {
    std::iota(order_.begin(), order_.end(), 0);
    std::shuffle(order_.begin(), order_.end(), rng_);
    cursor_ = 0;
  }

  std::vector<int64_t> order_;
  std::size_t cursor_ = 0;
  int batch_;
  std::mt19937_64& rng_;
};

std::vector<torch::Tensor> collect_parameters(std::initializer_list<torch::nn::Module*> modules) {
  std::vector<torch::Tensor> out;
  for (auto* m : modules) {
    for (auto& p : m->parameters()) out.push_back(p);
  }
  return out;
}

void set_requires_grad(torch::nn::Module& m, bool flag) {
  for (auto& p : m.parameters()) p.requires_grad_(flag);
}

std::string step_name(int step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step_%06d.ckpt", step);
  return buf;
}

}  // namespace

TrainResult train(const TrainingData& data, const TrainOptions& options) {
  const auto& cfg = options.train;
  const auto& w = options.loss;
  cfg.validate();
  w.validate();
  options.model.validate();
  if (data.size() < 1 || data.ref_images.size(0) < 1) throw ValidationError("training needs at least one weak pair");
  if (data.synth_images.size(2) != options.model.resolution || data.synth_images.size(3) != options.model.resolution ||
      data.ref_images.size(2) != options.model.resolution || data.ref_images.size(3) != options.model.resolution) {
    throw ValidationError("training images must be " + std::to_string(options.model.resolution) + "x" +
                          std::to_string(options.model.resolution));
  }
  for (int l : w.nce_layers) {
    if (l > options.model.encoder_taps()) {
      throw ValidationError("PatchNCE layer " + std::to_string(l) + " exceeds the " +
                            std::to_string(options.model.encoder_taps()) + " encoder taps");
    }
  }

  TrainResult result;
  result.network = nn::make_network(options.model, options.taxonomy, cfg.seed);
  auto& net = result.network;
  net->train();

  auto adam = [&](std::vector<torch::Tensor> params) {
    return torch::optim::Adam(std::move(params),
                              torch::optim::AdamOptions(cfg.lr).betas({cfg.beta1, cfg.beta2}).eps(1e-8));
  };
  auto opt_g = adam(collect_parameters({net->generator.get(), net->style_encoder.get(), net->nce_heads.get()}));
  auto opt_d = adam(collect_parameters({net->discriminator.get()}));

  std::mt19937_64 rng(cfg.seed);
  BatchOrder order(data.size(), cfg.batch_size, rng);
  std::uniform_int_distribution<int64_t> pick_ref(0, data.ref_images.size(0) - 1);

  std::ofstream log_file;
  if (!options.out_dir.empty()) {
    std::filesystem::create_directories(options.out_dir);
    log_file.open(options.out_dir / "train_log.jsonl", std::ios::trunc);
    if (!log_file) throw IoError("cannot write training log in " + options.out_dir.string());
  }
  json extra = {{"loss", to_json(w)}, {"train", to_json(cfg)}};
  if (!options.snapshot.is_null()) extra["config"] = options.snapshot;

  auto discriminator = [&](const torch::Tensor& x) { return net->discriminator->forward(x); };
  const int total = planned_steps(cfg, data.size());
  log::info("training for ", total, " steps on ", data.size(), " weak pairs");

  for (int step = 1; step <= total; ++step) {
    const auto idx = order.next();
    const auto batch = idx.size(0);
    const auto src = data.synth_images.index_select(0, idx);
    const auto labels = data.synth_labels.index_select(0, idx);
    const auto mask = nn::object_mask_tensor(labels);

    std::vector<int64_t> ref_idx(static_cast<std::size_t>(batch));
    for (auto& r : ref_idx) r = pick_ref(rng);
    const auto refs = torch::tensor(ref_idx, torch::kInt64);
    const auto real = data.ref_images.index_select(0, refs);
    const auto real_labels = data.ref_labels.index_select(0, refs);
    const auto real_fg = real * nn::object_mask_tensor(real_labels);

    StepLog entry;
    entry.step = step;
    entry.lr = cfg.lr;
    try {
      // the first drawn reference provides the style for the whole batch; the
      // others fill the components it does not show
      const auto styles = net->encode_styles(real, real_labels).merged();
      auto out = net->generate(src, labels, styles);
      const auto fake_fg = out.image * mask;

      // discriminator
      set_requires_grad(*net->discriminator, true);
      const auto adv_d = adv_loss_d(discriminator(real_fg), discriminator(fake_fg.detach()));
      const auto r1 = r1_penalty(discriminator, real_fg, true);
      const auto loss_d = discriminator_objective({adv_d, r1}, w);
      opt_d.zero_grad();
      loss_d.backward();
      opt_d.step();

      // generator
      set_requires_grad(*net->discriminator, false);
      const auto adv_g = adv_loss_g(discriminator(fake_fg));
      const auto fake_taps = net->generator->encode(out.image);
      std::vector<torch::Tensor> qs, ks;
      for (std::size_t li = 0; li < w.nce_layers.size(); ++li) {
        const int tap = w.nce_layers[li] - 1;
        const auto& src_feat = out.taps[static_cast<std::size_t>(tap)];
        const int64_t positions = src_feat.size(2) * src_feat.size(3);
        const int count = static_cast<int>(std::min<int64_t>(w.patches, positions));
        const auto where = sample_patch_positions(
            positions, count, scenegen::derive_seed(cfg.seed, static_cast<std::uint64_t>(step) * 64 + li));
        auto head = net->nce_heads[static_cast<std::size_t>(tap)]->as<nn::NceHeadImpl>();
        qs.push_back(head->forward(fake_taps[static_cast<std::size_t>(tap)], where));
        ks.push_back(head->forward(src_feat, where).detach());
      }
      const auto nce = patchnce(qs, ks, w.tau);
      const auto reg = self_reg(src, out.image, mask, w.eps);
      const auto edge = edge_loss(src, out.image, mask, w.eps);
      const auto loss_g = generator_objective({adv_g, nce, reg, edge}, w);
      opt_g.zero_grad();
      loss_g.backward();
      opt_g.step();

      entry.adv_d = adv_d.item<double>();
      entry.r1 = r1.item<double>();
      entry.adv_g = adv_g.item<double>();
      entry.nce = nce.item<double>();
      entry.reg = reg.item<double>();
      entry.edge = edge.item<double>();
    } catch (const NumericalError& e) {
      throw NumericalError("step " + std::to_string(step) + ": " + e.what());
    }
    result.log.push_back(entry);
    if (log_file) log_file << to_json(entry).dump() << '\n' << std::flush;
    if (step % 100 == 0 || step == total) {
      log::info("step ", step, "/", total, " D ", entry.adv_d, " R1 ", entry.r1, " G ", entry.adv_g, " nce ",
                entry.nce, " reg ", entry.reg, " edge ", entry.edge);
    }
    if (!options.out_dir.empty() && cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 && step != total) {
      extra["step"] = step;
      nn::save_checkpoint(options.out_dir / step_name(step), net, cfg.seed, extra);
    }
  }

  set_requires_grad(*net->discriminator, true);
  net->eval();
  result.parameter_hash = nn::parameter_hash(net);
  if (!options.out_dir.empty()) {
    extra["step"] = total;
    result.checkpoint = options.out_dir / "checkpoint.ckpt";
    nn::save_checkpoint(result.checkpoint, net, cfg.seed, extra);
  }
  return result;
}

}  // namespace compstyle::training
