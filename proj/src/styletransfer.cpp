#include "compstyle/styletransfer.hpp"

#include <openssl/evp.h>

#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "compstyle/error.hpp"
#include "compstyle/log.hpp"

namespace compstyle::nn {

namespace F = torch::nn::functional;
using nlohmann::json;

namespace {

constexpr double kSlope = 0.2;

torch::Tensor lrelu(const torch::Tensor& x) { return torch::leaky_relu(x, kSlope); }

torch::nn::Conv2d conv(int in, int out, int kernel, int stride, int padding, bool bias = true) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, kernel).stride(stride).padding(padding).bias(bias));
}

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

}  // namespace

void GeneratorConfig::validate() const {
  if (depth < 2) throw ValidationError("generator depth must be >= 2");
  if (resolution < 8 || resolution % (1 << depth) != 0) {
    throw ValidationError("resolution " + std::to_string(resolution) + " not divisible by 2^depth");
  }
  if (resolution % 4 != 0 || !is_power_of_two(resolution / 4)) {
    throw ValidationError("resolution must be 4 * 2^k for the discriminator");
  }
  if (base_width < 1 || max_width < base_width) throw ValidationError("invalid generator widths");
  if (modulation_layers < depth + 1) throw ValidationError("modulation layer count must be >= depth + 1");
  if (style_dim < 1 || nce_dim < 1) throw ValidationError("style and projection dims must be >= 1");
  if (disc_base_width < 1 || disc_max_width < disc_base_width) throw ValidationError("invalid discriminator widths");
}

int GeneratorConfig::width_at(int level) const { return std::min(base_width << level, max_width); }

json to_json(const GeneratorConfig& c) {
  return {{"resolution", c.resolution},
          {"depth", c.depth},
          {"base_width", c.base_width},
          {"max_width", c.max_width},
          {"modulation_layers", c.modulation_layers},
          {"style_dim", c.style_dim},
          {"nce_dim", c.nce_dim},
          {"disc_base_width", c.disc_base_width},
          {"disc_max_width", c.disc_max_width},
          {"component_guidance", c.component_guidance}};
}

GeneratorConfig generator_config_from_json(const json& j) {
  GeneratorConfig c;
  c.resolution = j.at("resolution").get<int>();
  c.depth = j.at("depth").get<int>();
  c.base_width = j.at("base_width").get<int>();
  c.max_width = j.at("max_width").get<int>();
  c.modulation_layers = j.at("modulation_layers").get<int>();
  c.style_dim = j.at("style_dim").get<int>();
  c.nce_dim = j.at("nce_dim").get<int>();
  c.disc_base_width = j.at("disc_base_width").get<int>();
  c.disc_max_width = j.at("disc_max_width").get<int>();
  c.component_guidance = j.at("component_guidance").get<bool>();
  return c;
}

// ---------------------------------------------------------------------------
// style containers

StyleBatch StyleBatch::select(int64_t i) const {
  return {values.slice(0, i, i + 1), presence.slice(0, i, i + 1)};
}

StyleBatch StyleBatch::expand(int64_t n) const {
  if (batch() == n) return *this;
  if (batch() != 1) throw ValidationError("only a single style can be broadcast over a batch");
  return {values.expand({n, values.size(1), values.size(2)}), presence.expand({n, presence.size(1)})};
}

StyleBatch StyleBatch::with_fallback() const {
  const auto present = presence.to(values.dtype()).unsqueeze(1);  // [B,1,R]
  const auto n_present = present.sum(2, true);                     // [B,1,1]
  const auto mean = (values * present).sum(2, true) / n_present.clamp_min(1.0);
  return {torch::where(presence.unsqueeze(1), values, mean), presence};
}

StyleBatch StyleBatch::merged() const {
  auto v = values.slice(0, 0, 1);
  auto p = presence.slice(0, 0, 1);
  for (int64_t i = 1; i < batch(); ++i) {
    const auto take = presence.slice(0, i, i + 1).logical_and(p.logical_not());  // [1,R]
    v = torch::where(take.unsqueeze(1), values.slice(0, i, i + 1), v);
    p = p.logical_or(take);
  }
  return {v, p};
}

StyleBatch StyleMatrix::as_batch() const {
  auto p = torch::zeros({1, regions()}, torch::kBool);
  for (int64_t r = 0; r < regions(); ++r) p[0][r] = static_cast<bool>(presence[r]);
  return {values.unsqueeze(0), p};
}

StyleMatrix StyleMatrix::from_batch(const StyleBatch& batch, int64_t i) {
  StyleMatrix m;
  m.values = batch.values[i].detach().clone();
  const auto p = batch.presence[i].to(torch::kCPU);
  for (int64_t r = 0; r < p.size(0); ++r) m.presence.push_back(p[r].item<bool>());
  return m;
}

// ---------------------------------------------------------------------------
// conversions and routing

torch::Tensor image_to_tensor(const ImageBuffer& image) {
  auto t = torch::from_blob(const_cast<float*>(image.values.data()), {image.height, image.width, 3}, torch::kFloat32);
  return t.permute({2, 0, 1}).unsqueeze(0).contiguous().clone();
}

ImageBuffer tensor_to_image(const torch::Tensor& t) {
  auto x = t.detach().to(torch::kCPU, torch::kFloat32);
  if (x.dim() == 4) {
    if (x.size(0) != 1) throw ValidationError("tensor_to_image expects a single image");
    x = x[0];
  }
  if (x.dim() != 3 || x.size(0) != 3) throw ValidationError("tensor_to_image expects [3,H,W]");
  x = x.permute({1, 2, 0}).contiguous();
  ImageBuffer img(static_cast<int>(x.size(0)), static_cast<int>(x.size(1)));
  std::memcpy(img.values.data(), x.data_ptr<float>(), img.values.size() * sizeof(float));
  return img;
}

torch::Tensor labels_to_tensor(const ComponentMask& mask) {
  auto t = torch::from_blob(const_cast<Label*>(mask.labels.data()), {1, mask.height, mask.width}, torch::kUInt8);
  return t.to(torch::kInt64);
}

torch::Tensor object_mask_tensor(const torch::Tensor& labels) { return labels.ne(0).unsqueeze(1).to(torch::kFloat32); }

torch::Tensor resize_labels(const torch::Tensor& labels, int64_t height, int64_t width) {
  if (labels.size(1) == height && labels.size(2) == width) return labels;
  const auto ys = nearest_indices(static_cast<int>(labels.size(1)), static_cast<int>(height));
  const auto xs = nearest_indices(static_cast<int>(labels.size(2)), static_cast<int>(width));
  const auto yi = torch::tensor(std::vector<int64_t>(ys.begin(), ys.end()), torch::kInt64);
  const auto xi = torch::tensor(std::vector<int64_t>(xs.begin(), xs.end()), torch::kInt64);
  return labels.index_select(1, yi).index_select(2, xi);
}

StyleBatch region_pool(const torch::Tensor& features, const torch::Tensor& labels, int64_t regions) {
  auto f = features;
  const auto H = labels.size(1), W = labels.size(2);
  if (f.size(2) != H || f.size(3) != W) {
    f = F::interpolate(f, F::InterpolateFuncOptions()
                              .size(std::vector<int64_t>{H, W})
                              .mode(torch::kBilinear)
                              .align_corners(false));
  }
  const auto ids = torch::arange(1, regions + 1, torch::kInt64).view({1, regions, 1, 1});
  const auto onehot = labels.unsqueeze(1).eq(ids).to(f.dtype());  // [B,R,H,W]
  const auto counts = onehot.sum({2, 3});                         // [B,R]
  const auto sums = torch::einsum("bchw,brhw->bcr", {f, onehot});
  const auto values = sums / counts.clamp_min(1.0).unsqueeze(1);
  return {values, counts.gt(0)};
}

torch::Tensor standardize(const torch::Tensor& features, double eps) {
  const auto mean = features.mean({2, 3}, true);
  const auto centered = features - mean;
  const auto var = centered.pow(2).mean({2, 3}, true);
  return centered / torch::sqrt(var + eps);
}

torch::Tensor modulate(const torch::Tensor& features, const torch::Tensor& gamma, const torch::Tensor& beta,
                       double eps) {
  if (gamma.sizes() != features.sizes() || beta.sizes() != features.sizes()) {
    throw ValidationError("modulate: gamma/beta shape differs from the feature map");
  }
  return gamma * standardize(features, eps) + beta;
}

// ---------------------------------------------------------------------------
// modules

StyleEncoderImpl::StyleEncoderImpl(const GeneratorConfig& config, int regions) : regions_(regions) {
  // full resolution, so thin components pool mostly their own pixels
  const int w0 = config.width_at(0), w1 = config.width_at(1);
  body_ = register_module("body", torch::nn::Sequential(
                                      conv(3, w0, 3, 1, 1), torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(kSlope)),
                                      conv(w0, w1, 3, 1, 1), torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(kSlope)),
                                      conv(w1, config.style_dim, 1, 1, 0)));
}

torch::Tensor StyleEncoderImpl::features(const torch::Tensor& images) { return body_->forward(images * 2.0 - 1.0); }

StyleBatch StyleEncoderImpl::forward(const torch::Tensor& images, const torch::Tensor& labels) {
  if (images.size(2) != labels.size(1) || images.size(3) != labels.size(2)) {
    throw ValidationError("style encoder: image and mask sizes differ");
  }
  return region_pool(features(images), labels, regions_);
}

ModulationImpl::ModulationImpl(int channels, int style_dim, int regions) {
  to_gamma_ = register_module("to_gamma", torch::nn::Linear(style_dim, channels));
  to_beta_ = register_module("to_beta", torch::nn::Linear(style_dim, channels));
  background_code_ = register_parameter("background_code", torch::zeros({style_dim}));
  region_gamma_ = register_parameter("region_gamma", torch::zeros({regions + 1, channels}));
  region_beta_ = register_parameter("region_beta", torch::zeros({regions + 1, channels}));
}

std::pair<torch::Tensor, torch::Tensor> ModulationImpl::predict(const torch::Tensor& labels, const StyleBatch& styles) {
  const auto B = labels.size(0), h = labels.size(1), w = labels.size(2);
  const auto R = styles.regions();
  if (styles.batch() != B) throw ValidationError("modulation: style batch differs from mask batch");
  if (R + 1 != region_gamma_.size(0)) throw ValidationError("modulation: style matrix has the wrong region count");
  if (labels.max().item<int64_t>() > R || labels.min().item<int64_t>() < 0) {
    throw ValidationError("modulation: mask label outside the style matrix");
  }

  // absent components that are needed by the mask fall back to the mean style
  const auto needed = labels.view({B, -1, 1}).eq(torch::arange(1, R + 1, torch::kInt64).view({1, 1, R})).any(1);
  if (needed.logical_and(styles.presence.logical_not()).any().item<bool>()) {
    static std::atomic<long> fallbacks{0};
    const long n = ++fallbacks;
    if ((n & (n - 1)) == 0) log::warn("style matrix lacks a component present in the mask; using mean style (", n, " times)");
  }
  const auto background = background_code_.to(styles.values.dtype()).view({1, -1, 1});
  const auto none_present = styles.presence.any(1).logical_not().view({B, 1, 1});
  const auto filled = torch::where(none_present, background, styles.with_fallback().values);

  const auto codes = torch::cat({background.expand({B, -1, 1}), filled}, 2).transpose(1, 2);  // [B, R+1, C]
  const auto gamma_table = 1.0 + to_gamma_->forward(codes) + region_gamma_;                  // [B, R+1, ch]
  const auto beta_table = to_beta_->forward(codes) + region_beta_;
  const auto ch = gamma_table.size(2);
  const auto index = labels.reshape({B, h * w, 1}).expand({B, h * w, ch});
  auto gamma = gamma_table.gather(1, index).transpose(1, 2).reshape({B, ch, h, w});
  auto beta = beta_table.gather(1, index).transpose(1, 2).reshape({B, ch, h, w});
  return {gamma, beta};
}

torch::Tensor ModulationImpl::forward(const torch::Tensor& features, const torch::Tensor& labels,
                                      const StyleBatch& styles) {
  const auto [gamma, beta] = predict(resize_labels(labels, features.size(2), features.size(3)), styles);
  return modulate(features, gamma, beta);
}

GeneratorImpl::GeneratorImpl(const GeneratorConfig& config, int regions) : config_(config) {
  config_.validate();
  const int depth = config.depth;
  encoder_.push_back(register_module("enc0", conv(3, config.width_at(0), 3, 1, 1)));
  for (int l = 0; l < depth; ++l) {
    encoder_.push_back(
        register_module("enc" + std::to_string(l + 1), conv(config.width_at(l), config.width_at(l + 1), 4, 2, 1)));
  }
  bottleneck_ = register_module("bottleneck", conv(config.width_at(depth), config.width_at(depth), 3, 1, 1));

  const int extra = config.modulation_layers - depth - 1;
  auto add_stage = [&](int channels, int out_channels) {
    const int i = static_cast<int>(mods_.size());
    mods_.push_back(register_module("mod" + std::to_string(i), Modulation(channels, config.style_dim, regions)));
    decoder_.push_back(register_module("dec" + std::to_string(i), conv(channels, out_channels, 3, 1, 1)));
  };
  for (int i = 0; i < extra; ++i) add_stage(config.width_at(depth), config.width_at(depth));
  for (int l = depth - 1; l >= 0; --l) add_stage(config.width_at(l + 1), config.width_at(l));
  add_stage(config.width_at(0), 3);
}

std::vector<torch::Tensor> GeneratorImpl::encode(const torch::Tensor& images) {
  if (images.size(2) != config_.resolution || images.size(3) != config_.resolution) {
    throw ValidationError("generator: input is " + std::to_string(images.size(2)) + "x" +
                          std::to_string(images.size(3)) + ", configured for " + std::to_string(config_.resolution));
  }
  std::vector<torch::Tensor> taps;
  auto h = images * 2.0 - 1.0;
  for (auto& c : encoder_) {
    h = lrelu(c->forward(h));
    taps.push_back(h);
  }
  taps.push_back(lrelu(bottleneck_->forward(h)));
  return taps;
}

GeneratorOutput GeneratorImpl::forward(const torch::Tensor& images, const torch::Tensor& labels,
                                       const StyleBatch& styles) {
  GeneratorOutput out;
  out.taps = encode(images);
  const int depth = config_.depth;
  const int extra = config_.modulation_layers - depth - 1;
  auto h = out.taps.back();
  int stage = 0;
  for (; stage < extra; ++stage) h = h + decoder_[stage]->forward(lrelu(mods_[stage]->forward(h, labels, styles)));
  for (int l = depth - 1; l >= 0; --l, ++stage) {
    h = F::interpolate(h, F::InterpolateFuncOptions().scale_factor(std::vector<double>{2.0, 2.0}).mode(torch::kNearest));
    h = decoder_[stage]->forward(lrelu(mods_[stage]->forward(h, labels, styles)));
    h = h + out.taps[l];
  }
  out.image = torch::sigmoid(decoder_[stage]->forward(lrelu(mods_[stage]->forward(h, labels, styles))));
  return out;
}

DiscriminatorImpl::DiscriminatorImpl(int resolution, int base_width, int max_width) : resolution_(resolution) {
  if (resolution < 4 || resolution % 4 != 0 || !is_power_of_two(resolution / 4)) {
    throw ValidationError("discriminator resolution must be 4 * 2^k");
  }
  from_rgb_ = register_module("from_rgb", conv(3, base_width, 1, 1, 0));
  int width = base_width;
  int i = 0;
  for (int res = resolution; res > 4; res /= 2, ++i) {
    const int out = std::min(width * 2, max_width);
    Block b;
    b.conv1 = register_module("b" + std::to_string(i) + "_conv1", conv(width, width, 3, 1, 1));
    b.conv2 = register_module("b" + std::to_string(i) + "_conv2", conv(width, out, 3, 1, 1));
    b.skip = register_module("b" + std::to_string(i) + "_skip", conv(width, out, 1, 1, 0, false));
    blocks_.push_back(b);
    width = out;
  }
  final_conv_ = register_module("final_conv", conv(width, width, 3, 1, 1));
  fc_ = register_module("fc", torch::nn::Linear(width * 16, width));
  out_ = register_module("out", torch::nn::Linear(width, 1));
}

torch::Tensor DiscriminatorImpl::forward(const torch::Tensor& images) {
  if (images.size(2) != resolution_ || images.size(3) != resolution_) {
    throw ValidationError("discriminator: input is " + std::to_string(images.size(2)) + "x" +
                          std::to_string(images.size(3)) + ", configured for " + std::to_string(resolution_));
  }
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  auto h = lrelu(from_rgb_->forward(images * 2.0 - 1.0));
  for (auto& b : blocks_) {
    auto main = lrelu(b.conv2->forward(lrelu(b.conv1->forward(h))));
    main = F::avg_pool2d(main, F::AvgPool2dFuncOptions(2));
    auto skip = b.skip->forward(F::avg_pool2d(h, F::AvgPool2dFuncOptions(2)));
    h = (main + skip) * inv_sqrt2;
  }
  h = lrelu(final_conv_->forward(h));
  h = lrelu(fc_->forward(h.flatten(1)));
  return out_->forward(h).squeeze(1);
}

NceHeadImpl::NceHeadImpl(int in_channels, int out_dim) {
  fc1_ = register_module("fc1", torch::nn::Linear(in_channels, out_dim));
  fc2_ = register_module("fc2", torch::nn::Linear(out_dim, out_dim));
}

torch::Tensor NceHeadImpl::forward(const torch::Tensor& features, const torch::Tensor& index) {
  const auto picked = features.flatten(2).index_select(2, index).transpose(1, 2);  // [B,P,C]
  const auto projected = fc2_->forward(torch::relu(fc1_->forward(picked)));
  return F::normalize(projected, F::NormalizeFuncOptions().dim(-1).eps(1e-12));
}

TranslationNetworkImpl::TranslationNetworkImpl(const GeneratorConfig& config, const ComponentTaxonomy& taxonomy)
    : config_(config), taxonomy_(taxonomy) {
  config_.validate();
  generator = register_module("generator", Generator(config_, regions()));
  style_encoder = register_module("style_encoder", StyleEncoder(config_, regions()));
  discriminator = register_module("discriminator",
                                  Discriminator(config_.resolution, config_.disc_base_width, config_.disc_max_width));
  nce_heads = register_module("nce", torch::nn::ModuleList());
  for (int l = 0; l <= config_.depth; ++l) nce_heads->push_back(NceHead(config_.width_at(l), config_.nce_dim));
  nce_heads->push_back(NceHead(config_.width_at(config_.depth), config_.nce_dim));
}

torch::Tensor TranslationNetworkImpl::route_labels(const torch::Tensor& labels) const {
  if (config_.component_guidance) return labels;
  return labels.ne(0).to(torch::kInt64);
}

StyleBatch TranslationNetworkImpl::encode_styles(const torch::Tensor& images, const torch::Tensor& labels) {
  return style_encoder->forward(images, route_labels(labels));
}

GeneratorOutput TranslationNetworkImpl::generate(const torch::Tensor& images, const torch::Tensor& labels,
                                                 const StyleBatch& styles) {
  if (styles.regions() != regions()) throw ValidationError("style matrix region count differs from the network");
  return generator->forward(images, route_labels(labels), styles.expand(images.size(0)));
}

TranslationNetwork make_network(const GeneratorConfig& config, const ComponentTaxonomy& taxonomy, std::uint64_t seed) {
  torch::manual_seed(seed);
  return TranslationNetwork(config, taxonomy);
}

// ---------------------------------------------------------------------------
// single-image API

StyleMatrix encode_styles(TranslationNetwork& net, const ImageBuffer& image, const ComponentMask& mask) {
  if (image.height != mask.height || image.width != mask.width) throw ValidationError("image and mask sizes differ");
  torch::NoGradGuard guard;
  const auto styles = net->encode_styles(image_to_tensor(image), labels_to_tensor(mask));
  return StyleMatrix::from_batch(styles);
}

ImageBuffer generate(TranslationNetwork& net, const ImageBuffer& image, const ComponentMask& mask,
                     const StyleMatrix& styles) {
  if (image.height != mask.height || image.width != mask.width) throw ValidationError("image and mask sizes differ");
  torch::NoGradGuard guard;
  const auto out = net->generate(image_to_tensor(image), labels_to_tensor(mask), styles.as_batch());
  return tensor_to_image(out.image);
}

double discriminate(TranslationNetwork& net, const ImageBuffer& image) {
  torch::NoGradGuard guard;
  return net->discriminator->forward(image_to_tensor(image)).item<double>();
}

// ---------------------------------------------------------------------------
// checkpoints

namespace {

constexpr char kMagic[8] = {'C', 'S', 'T', 'Y', 'C', 'K', 'P', 'T'};

json taxonomy_to_json(const ComponentTaxonomy& t) {
  json arr = json::array();
  for (const auto& e : t.entries()) arr.push_back({{"index", e.index}, {"name", e.name}});
  return arr;
}

ComponentTaxonomy taxonomy_from_json(const json& j) {
  std::vector<ComponentTaxonomy::Entry> entries;
  for (const auto& e : j) entries.push_back({e.at("index").get<Label>(), e.at("name").get<std::string>()});
  return ComponentTaxonomy(std::move(entries));
}

std::string hex(const unsigned char* data, unsigned int len) {
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(data[i]);
  return os.str();
}

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) { EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr); }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;
  void update(const void* data, std::size_t len) { EVP_DigestUpdate(ctx_, data, len); }
  std::string hex_digest() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_, md, &len);
    return hex(md, len);
  }

 private:
  EVP_MD_CTX* ctx_;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, TranslationNetwork& net, std::uint64_t seed,
                     const json& extra) {
  json header;
  header["format_version"] = kCheckpointVersion;
  header["config"] = to_json(net->config());
  header["taxonomy"] = taxonomy_to_json(net->taxonomy());
  header["seed"] = seed;
  header["extra"] = extra;
  json index = json::array();
  std::vector<torch::Tensor> blobs;
  std::uint64_t offset = 0;
  for (const auto& item : net->named_parameters(true)) {
    auto t = item.value().detach().to(torch::kCPU, torch::kFloat32).contiguous();
    index.push_back({{"name", item.key()}, {"shape", t.sizes().vec()}, {"offset", offset}, {"numel", t.numel()}});
    offset += static_cast<std::uint64_t>(t.numel()) * sizeof(float);
    blobs.push_back(t);
  }
  header["tensors"] = index;
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  const std::uint32_t version = kCheckpointVersion;
  const std::uint64_t header_len = text.size();
  out.write(kMagic, sizeof kMagic);
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  out.write(reinterpret_cast<const char*>(&header_len), sizeof header_len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& t : blobs) {
    out.write(reinterpret_cast<const char*>(t.data_ptr<float>()), static_cast<std::streamsize>(t.numel() * sizeof(float)));
  }
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

std::pair<TranslationNetwork, CheckpointInfo> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  char magic[sizeof kMagic];
  std::uint32_t version = 0;
  std::uint64_t header_len = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&header_len), sizeof header_len);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw ValidationError(path.string() + " is not a checkpoint");
  if (version != kCheckpointVersion) {
    throw ValidationError("unsupported checkpoint format version " + std::to_string(version) + " (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  std::string text(header_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw ValidationError("truncated checkpoint header");

  CheckpointInfo info;
  json header;
  try {
    header = json::parse(text);
    if (header.at("format_version").get<std::uint32_t>() != kCheckpointVersion) {
      throw ValidationError("checkpoint header version mismatch");
    }
    info.config = generator_config_from_json(header.at("config"));
    info.taxonomy = taxonomy_from_json(header.at("taxonomy"));
    info.seed = header.at("seed").get<std::uint64_t>();
    info.extra = header.value("extra", json::object());
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed checkpoint header: ") + e.what());
  }

  auto net = make_network(info.config, info.taxonomy, info.seed);
  const auto data_start = in.tellg();
  auto params = net->named_parameters(true);
  std::size_t loaded = 0;
  torch::NoGradGuard guard;
  for (const auto& entry : header.at("tensors")) {
    const auto name = entry.at("name").get<std::string>();
    auto* param = params.find(name);
    if (!param) throw ValidationError("checkpoint tensor '" + name + "' has no matching parameter");
    const auto shape = entry.at("shape").get<std::vector<int64_t>>();
    if (param->sizes().vec() != shape) throw ValidationError("shape mismatch for '" + name + "'");
    auto buffer = torch::empty(shape, torch::kFloat32);
    in.seekg(data_start + static_cast<std::streamoff>(entry.at("offset").get<std::uint64_t>()));
    in.read(reinterpret_cast<char*>(buffer.data_ptr<float>()), static_cast<std::streamsize>(buffer.numel() * sizeof(float)));
    if (!in) throw ValidationError("truncated checkpoint data for '" + name + "'");
    param->copy_(buffer);
    ++loaded;
  }
  if (loaded != params.size()) throw ValidationError("checkpoint is missing parameters");
  return {net, info};
}

std::string parameter_hash(TranslationNetwork& net) {
  Sha256 sha;
  for (const auto& item : net->named_parameters(true)) {
    const auto t = item.value().detach().to(torch::kCPU, torch::kFloat32).contiguous();
    sha.update(item.key().data(), item.key().size());
    const auto sizes = t.sizes().vec();
    sha.update(sizes.data(), sizes.size() * sizeof(int64_t));
    sha.update(t.data_ptr<float>(), t.numel() * sizeof(float));
  }
  return sha.hex_digest();
}

std::string file_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  Sha256 sha;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    sha.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return sha.hex_digest();
}

}  // namespace compstyle::nn
