#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "compstyle/domain.hpp"

namespace compstyle::nn {

struct GeneratorConfig {
  int resolution = 128;
  int depth = 3;               // stride-2 encoder stages
  int base_width = 64;
  int max_width = 256;
  int modulation_layers = 5;   // L, >= depth + 1
  int style_dim = 512;         // C
  int nce_dim = 256;           // projection-head output width
  int disc_base_width = 32;
  int disc_max_width = 256;
  /// false: every foreground pixel shares one global style code (R = 1).
  bool component_guidance = true;

  void validate() const;
  int width_at(int level) const;
  /// Encoder taps available to PatchNCE: one per level plus the bottleneck.
  int encoder_taps() const { return depth + 2; }
};

nlohmann::json to_json(const GeneratorConfig& c);
GeneratorConfig generator_config_from_json(const nlohmann::json& j);

/// Style codes for a batch: values [B, C, R], presence [B, R] (bool).
struct StyleBatch {
  torch::Tensor values;
  torch::Tensor presence;

  int64_t batch() const { return values.size(0); }
  int64_t dim() const { return values.size(1); }
  int64_t regions() const { return values.size(2); }
  /// Sample `i` as a batch of one.
  StyleBatch select(int64_t i) const;
  /// Repeats a batch of one `n` times.
  StyleBatch expand(int64_t n) const;
  /// Absent columns replaced by the mean of the present ones (left at zero
  /// when none is present).
  StyleBatch with_fallback() const;
  /// Sample 0 as a batch of one, its absent columns taken from the first
  /// later sample that has them.
  StyleBatch merged() const;
  StyleBatch detach() const { return {values.detach(), presence}; }
};

/// C x R part-wise style matrix of one reference image.
struct StyleMatrix {
  torch::Tensor values;          // [C, R] float
  std::vector<bool> presence;    // R flags

  int64_t dim() const { return values.size(0); }
  int64_t regions() const { return values.size(1); }
  StyleBatch as_batch() const;
  static StyleMatrix from_batch(const StyleBatch& batch, int64_t i = 0);
};

torch::Tensor image_to_tensor(const ImageBuffer& image);                 // [1,3,H,W] float
ImageBuffer tensor_to_image(const torch::Tensor& t);                    // from [1,3,H,W] or [3,H,W]
torch::Tensor labels_to_tensor(const ComponentMask& mask);              // [1,H,W] int64
torch::Tensor object_mask_tensor(const torch::Tensor& labels);         // [B,1,H,W] of the labels' dtype-free float

/// Nearest-neighbour label resize with the same sampling as `resize_mask`.
torch::Tensor resize_labels(const torch::Tensor& labels, int64_t height, int64_t width);

/// Masked mean of `features` [B,C,h,w] over each region 1..regions of `labels`
/// [B,H,W]. Features are bilinearly resampled to the label resolution first.
/// Regions without pixels get presence=false and a zero column.
StyleBatch region_pool(const torch::Tensor& features, const torch::Tensor& labels, int64_t regions);

/// Parameter-free per-channel standardization over spatial positions.
torch::Tensor standardize(const torch::Tensor& features, double eps = 1e-6);

/// gamma * standardize(F) + beta
torch::Tensor modulate(const torch::Tensor& features, const torch::Tensor& gamma, const torch::Tensor& beta,
                       double eps = 1e-6);

class StyleEncoderImpl : public torch::nn::Module {
 public:
  StyleEncoderImpl(const GeneratorConfig& config, int regions);
  /// Feature map before pooling, [B, C, H, W] (5x5 receptive field).
  torch::Tensor features(const torch::Tensor& images);
  StyleBatch forward(const torch::Tensor& images, const torch::Tensor& labels);

 private:
  int regions_;
  torch::nn::Sequential body_{nullptr};
};
TORCH_MODULE(StyleEncoder);

/// Maps routed style codes to per-position scale and shift for one layer.
/// Each position sees [code of its label ; one-hot label] through a 1x1
/// transform, so the result at a position depends only on its own column.
class ModulationImpl : public torch::nn::Module {
 public:
  ModulationImpl(int channels, int style_dim, int regions);

  /// labels [B,h,w] at the layer resolution; returns (gamma, beta), each
  /// [B, channels, h, w]. Label 0 uses the learned background code, as does
  /// every label of a sample whose style matrix has no present column.
  std::pair<torch::Tensor, torch::Tensor> predict(const torch::Tensor& labels, const StyleBatch& styles);
  torch::Tensor forward(const torch::Tensor& features, const torch::Tensor& labels, const StyleBatch& styles);

 private:
  torch::nn::Linear to_gamma_{nullptr};
  torch::nn::Linear to_beta_{nullptr};
  torch::Tensor background_code_;
  torch::Tensor region_gamma_;  // [R+1, channels], the one-hot part of the transform
  torch::Tensor region_beta_;
};
TORCH_MODULE(Modulation);

struct GeneratorOutput {
  torch::Tensor image;              // [B,3,H,W] in [0,1]
  std::vector<torch::Tensor> taps;  // encoder features of the input
};

class GeneratorImpl : public torch::nn::Module {
 public:
  GeneratorImpl(const GeneratorConfig& config, int regions);

  std::vector<torch::Tensor> encode(const torch::Tensor& images);
  GeneratorOutput forward(const torch::Tensor& images, const torch::Tensor& labels, const StyleBatch& styles);
  Modulation modulation(int index) { return mods_[index]; }
  int modulation_count() const { return static_cast<int>(mods_.size()); }

 private:
  GeneratorConfig config_;
  std::vector<torch::nn::Conv2d> encoder_;
  torch::nn::Conv2d bottleneck_{nullptr};
  std::vector<Modulation> mods_;
  std::vector<torch::nn::Conv2d> decoder_;
};
TORCH_MODULE(Generator);

/// Residual downsampling discriminator in the StyleGAN2 style, unconditional.
class DiscriminatorImpl : public torch::nn::Module {
 public:
  DiscriminatorImpl(int resolution, int base_width, int max_width);
  /// [B,3,H,W] -> [B] logits.
  torch::Tensor forward(const torch::Tensor& images);
  int resolution() const { return resolution_; }

 private:
  struct Block {
    torch::nn::Conv2d conv1{nullptr}, conv2{nullptr}, skip{nullptr};
  };
  int resolution_;
  torch::nn::Conv2d from_rgb_{nullptr};
  std::vector<Block> blocks_;
  torch::nn::Conv2d final_conv_{nullptr};
  torch::nn::Linear fc_{nullptr}, out_{nullptr};
};
TORCH_MODULE(Discriminator);

/// Two-layer projection head for PatchNCE features.
class NceHeadImpl : public torch::nn::Module {
 public:
  NceHeadImpl(int in_channels, int out_dim);
  /// Gathers positions `index` [P] from features [B,C,h,w]; returns [B,P,D], L2-normalized.
  torch::Tensor forward(const torch::Tensor& features, const torch::Tensor& index);

 private:
  torch::nn::Linear fc1_{nullptr}, fc2_{nullptr};
};
TORCH_MODULE(NceHead);

/// Every trainable part of the translation network.
class TranslationNetworkImpl : public torch::nn::Module {
 public:
  TranslationNetworkImpl(const GeneratorConfig& config, const ComponentTaxonomy& taxonomy);

  const GeneratorConfig& config() const { return config_; }
  const ComponentTaxonomy& taxonomy() const { return taxonomy_; }
  /// Style regions R: taxonomy regions, or 1 without component guidance.
  int regions() const { return config_.component_guidance ? taxonomy_.regions() : 1; }
  /// Labels as seen by pooling and modulation (collapsed without guidance).
  torch::Tensor route_labels(const torch::Tensor& labels) const;

  StyleBatch encode_styles(const torch::Tensor& images, const torch::Tensor& labels);
  GeneratorOutput generate(const torch::Tensor& images, const torch::Tensor& labels, const StyleBatch& styles);

  Generator generator{nullptr};
  StyleEncoder style_encoder{nullptr};
  Discriminator discriminator{nullptr};
  torch::nn::ModuleList nce_heads{nullptr};

 private:
  GeneratorConfig config_;
  ComponentTaxonomy taxonomy_;
};
TORCH_MODULE(TranslationNetwork);

/// Builds a network with parameters initialized from `seed`.
TranslationNetwork make_network(const GeneratorConfig& config, const ComponentTaxonomy& taxonomy, std::uint64_t seed);

// Single-image entry points, run without gradient tracking.

StyleMatrix encode_styles(TranslationNetwork& net, const ImageBuffer& image, const ComponentMask& mask);
ImageBuffer generate(TranslationNetwork& net, const ImageBuffer& image, const ComponentMask& mask,
                     const StyleMatrix& styles);
double discriminate(TranslationNetwork& net, const ImageBuffer& image);

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointInfo {
  GeneratorConfig config;
  ComponentTaxonomy taxonomy = ComponentTaxonomy::standard();
  std::uint64_t seed = 0;
  nlohmann::json extra;  // free-form metadata (e.g. loss weights, step)
};

/// Single-file archive: magic, format version, JSON header (config, taxonomy,
/// seed, tensor index) and the raw float32 parameter data.
void save_checkpoint(const std::filesystem::path& path, TranslationNetwork& net, std::uint64_t seed,
                     const nlohmann::json& extra = nlohmann::json::object());
/// Rejects unknown format versions.
std::pair<TranslationNetwork, CheckpointInfo> load_checkpoint(const std::filesystem::path& path);

/// SHA-256 over all parameter names, shapes and values, hex encoded.
std::string parameter_hash(TranslationNetwork& net);
/// SHA-256 of a file's bytes, hex encoded.
std::string file_hash(const std::filesystem::path& path);

}  // namespace compstyle::nn
