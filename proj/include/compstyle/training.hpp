#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "compstyle/domain.hpp"
#include "compstyle/styletransfer.hpp"

namespace compstyle::training {

struct LossWeights {
  double r1 = 10.0;
  double nce = 1.0;
  double reg = 0.1;
  double edge = 0.5;
  double tau = 0.07;
  std::vector<int> nce_layers{1, 2, 3, 4};  // 1-based encoder taps
  int patches = 256;                        // per layer
  double eps = 1e-6;

  void validate() const;
};

nlohmann::json to_json(const LossWeights& w);
LossWeights loss_weights_from_json(const nlohmann::json& j);

struct TrainConfig {
  int epochs = 100;
  int batch_size = 8;
  double lr = 2e-4;
  double beta1 = 0.0;
  double beta2 = 0.99;
  std::uint64_t seed = 42;
  int checkpoint_every = 0;  // steps between intermediate checkpoints, 0 = final only
  int max_steps = 0;         // > 0 overrides epochs

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

// Loss terms. Images are [B,3,H,W] in [0,1], masks [B,1,H,W] in {0,1}.

/// softplus(-D(real)) + softplus(D(fake)), batch averaged.
torch::Tensor adv_loss_d(const torch::Tensor& real_logits, const torch::Tensor& fake_logits);
/// softplus(-D(fake)), batch averaged.
torch::Tensor adv_loss_g(const torch::Tensor& fake_logits);

struct AdvLosses {
  torch::Tensor d;
  torch::Tensor g;
};
AdvLosses adv_losses(const torch::Tensor& real_logits, const torch::Tensor& fake_logits);

using DiscriminatorFn = std::function<torch::Tensor(const torch::Tensor&)>;

/// Batch mean of ||grad_x D(x)||^2 at `real`. With `create_graph` the result
/// can be differentiated again (needed when it is part of a loss).
torch::Tensor r1_penalty(const DiscriminatorFn& discriminator, const torch::Tensor& real, bool create_graph = true);

/// One layer of PatchNCE. q, k: [B,P,D] projected features of the translated and
/// source image at the same P positions. Row p of each image is classified
/// against all P keys of that image with logits q.k / tau.
torch::Tensor patchnce_layer(const torch::Tensor& q, const torch::Tensor& k, double tau);
/// Mean of `patchnce_layer` over layers.
torch::Tensor patchnce(std::span<const torch::Tensor> q, std::span<const torch::Tensor> k, double tau);

/// Per-sample sum |M (out - src)| / (count(M) * 3 + eps), batch averaged.
torch::Tensor self_reg(const torch::Tensor& source, const torch::Tensor& translated, const torch::Tensor& mask,
                       double eps = 1e-6);

/// Luminance Sobel magnitude with replicate padding, [B,1,H,W].
/// The square root has zero gradient where both responses vanish.
torch::Tensor sobel_edges(const torch::Tensor& images);

/// Per-sample sum |M (E(out) - E(src))| / (count(M) + eps), batch averaged.
torch::Tensor edge_loss(const torch::Tensor& source, const torch::Tensor& translated, const torch::Tensor& mask,
                        double eps = 1e-6);

struct GeneratorTerms {
  torch::Tensor adv, nce, reg, edge;
};
struct DiscriminatorTerms {
  torch::Tensor adv, r1;
};

/// adv + w.nce nce + w.reg reg + w.edge edge. Throws NumericalError naming the
/// first non-finite term.
torch::Tensor generator_objective(const GeneratorTerms& t, const LossWeights& w);
/// adv + w.r1 r1, same checks.
torch::Tensor discriminator_objective(const DiscriminatorTerms& t, const LossWeights& w);

/// Random positions shared by source and translated features of one layer.
torch::Tensor sample_patch_positions(int64_t positions, int count, std::uint64_t seed);

/// Tensors ready for training. Synthetic samples are the usable weak pairs;
/// references are their real counterparts.
struct TrainingData {
  torch::Tensor synth_images;  // [N,3,H,W]
  torch::Tensor synth_labels;  // [N,H,W] int64
  torch::Tensor ref_images;    // [M,3,H,W]
  torch::Tensor ref_labels;    // [M,H,W]
  std::vector<std::string> synth_ids;
  std::vector<std::string> ref_ids;

  int64_t size() const { return synth_images.size(0); }
};

TrainingData make_training_data(std::span<const AnnotatedSample> synthetic, std::span<const AnnotatedSample> references);

/// Reads `pairs.jsonl` and the synthetic dataset in `pairs_dir`, and the real
/// counterparts of the usable pairs from `real_dir`.
TrainingData load_training_data(const std::filesystem::path& pairs_dir, const std::filesystem::path& real_dir);

struct StepLog {
  int step = 0;
  double adv_d = 0, r1 = 0, adv_g = 0, nce = 0, reg = 0, edge = 0, lr = 0;
};
nlohmann::json to_json(const StepLog& s);

struct TrainOptions {
  nn::GeneratorConfig model;
  LossWeights loss;
  TrainConfig train;
  ComponentTaxonomy taxonomy = ComponentTaxonomy::standard();
  std::filesystem::path out_dir;  // empty: nothing is written
  nlohmann::json snapshot;        // stored in checkpoints when set
};

struct TrainResult {
  nn::TranslationNetwork network{nullptr};
  std::vector<StepLog> log;
  std::filesystem::path checkpoint;  // final checkpoint, when written
  std::string parameter_hash;
};

/// Number of optimizer steps the configuration asks for on `samples` pairs.
int planned_steps(const TrainConfig& config, int64_t samples);

/// Alternating discriminator / generator updates. Writes `train_log.jsonl`,
/// `checkpoint.ckpt` and `step_NNNNNN.ckpt` (at the cadence) to out_dir.
TrainResult train(const TrainingData& data, const TrainOptions& options);

}  // namespace compstyle::training
