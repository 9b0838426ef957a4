#include "compstyle/inference.hpp"

#include <random>

#include "compstyle/error.hpp"
#include "compstyle/image_io.hpp"
#include "compstyle/kernels.hpp"
#include "compstyle/log.hpp"

namespace compstyle::inference {

namespace fs = std::filesystem;
using nlohmann::json;

void StyleBank::validate() const {
  if (styles.empty()) throw ValidationError("style bank is empty");
  if (ids.size() != styles.size()) throw ValidationError("style bank ids and styles differ in length");
  for (const auto& s : styles) {
    if (s.dim() != styles[0].dim() || s.regions() != styles[0].regions()) {
      throw ValidationError("style bank matrices differ in shape");
    }
  }
}

void StyleBank::complete() {
  validate();
  const auto regions = styles[0].regions();
  for (int64_t r = 0; r < regions; ++r) {
    torch::Tensor sum = torch::zeros({styles[0].dim()});
    int n = 0;
    for (const auto& s : styles) {
      if (!s.presence[r]) continue;
      sum += s.values.select(1, r);
      ++n;
    }
    if (n == 0 || n == static_cast<int>(styles.size())) continue;
    const auto mean = sum / n;
    for (auto& s : styles) {
      if (s.presence[r]) continue;
      s.values.select(1, r).copy_(mean);
      s.presence[r] = true;
    }
  }
}

StyleBank build_style_bank(nn::TranslationNetwork& net, std::span<const AnnotatedSample> references) {
  StyleBank bank;
  for (const auto& r : references) {
    bank.ids.push_back(r.id);
    bank.styles.push_back(nn::encode_styles(net, r.image, r.mask));
  }
  bank.complete();
  return bank;
}

StyleBank build_style_bank(nn::TranslationNetwork& net, const Dataset& references) {
  StyleBank bank;
  for (std::size_t i = 0; i < references.size(); ++i) {
    const auto sample = references.load(i);
    bank.ids.push_back(sample.id);
    bank.styles.push_back(nn::encode_styles(net, sample.image, sample.mask));
  }
  bank.complete();
  return bank;
}

ImageBuffer compose_foreground(const ImageBuffer& translated, const ImageBuffer& source, const BinaryMask& mask) {
  if (translated.height != source.height || translated.width != source.width || mask.height != source.height ||
      mask.width != source.width) {
    throw ValidationError("compose_foreground: shape mismatch");
  }
  return kernels::parallel::compose_foreground(translated, source, mask);
}

ImageBuffer translate_image(nn::TranslationNetwork& net, const ImageBuffer& image, const ComponentMask& mask,
                            const nn::StyleMatrix& styles) {
  return compose_foreground(nn::generate(net, image, mask, styles), image, object_mask(mask));
}

ImageBuffer selective_transfer(nn::TranslationNetwork& net, const ImageBuffer& image, const ComponentMask& mask,
                               const nn::StyleMatrix& styles, const std::set<Label>& active) {
  const auto& taxonomy = net->taxonomy();
  for (Label l : active) {
    if (l == kBackground || !taxonomy.contains(l)) {
      throw ValidationError("selective transfer: label " + std::to_string(l) + " is not a component");
    }
  }
  const auto self = nn::encode_styles(net, image, mask);
  if (styles.dim() != self.dim() || styles.regions() != self.regions()) {
    throw ValidationError("selective transfer: style matrix shape differs from the network");
  }
  nn::StyleMatrix mixed = self;
  mixed.values = self.values.clone();
  for (int64_t r = 0; r < mixed.regions(); ++r) {
    // column r holds label r + 1; a single collapsed column is active if anything is
    const bool use_reference =
        net->config().component_guidance ? active.count(static_cast<Label>(r + 1)) > 0 : !active.empty();
    if (!use_reference) continue;
    mixed.values.select(1, r).copy_(styles.values.select(1, r));
    mixed.presence[static_cast<std::size_t>(r)] = styles.presence[static_cast<std::size_t>(r)];
  }
  return translate_image(net, image, mask, mixed);
}

TranslationReport translate_dataset(nn::TranslationNetwork& net, const std::string& checkpoint_hash,
                                    const fs::path& source_root, const StyleBank& bank, std::uint64_t seed,
                                    const fs::path& out_root) {
  bank.validate();
  const auto source = Dataset::open(source_root);
  if (fs::exists(out_root) && fs::equivalent(out_root, source_root)) {
    throw ValidationError("translation output must differ from the source dataset");
  }
  for (const char* sub : {"images", "masks", "poses"}) fs::create_directories(out_root / sub);

  TranslationReport report;
  std::vector<ManifestEntry> written;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, bank.size() - 1);
  for (std::size_t i = 0; i < source.size(); ++i) {
    const auto& entry = source.entries()[i];
    const std::size_t choice = pick(rng);  // drawn for every entry so skips do not shift later choices
    if (!fs::exists(source.mask_path(i))) {
      log::warn("sample ", entry.id, ": mask missing, skipped");
      report.skipped.push_back(entry.id);
      continue;
    }
    const auto sample = source.load(i);
    const auto check = validate_mask(sample.mask, net->taxonomy());
    if (!check.valid) throw ValidationError("sample " + entry.id + " has labels outside the checkpoint taxonomy");

    const auto out = translate_image(net, sample.image, sample.mask, bank.styles[choice]);
    fs::create_directories((out_root / entry.image).parent_path());
    write_rgb_png(out_root / entry.image, out);
    for (const auto& rel : {entry.mask, entry.pose}) {
      fs::create_directories((out_root / rel).parent_path());
      fs::copy_file(source_root / rel, out_root / rel, fs::copy_options::overwrite_existing);
    }
    written.push_back(entry);
    report.translated.push_back(entry.id);
    report.style_of[entry.id] = bank.ids[choice];
  }
  write_manifest(out_root, written);

  json meta;
  meta["checkpoint_hash"] = checkpoint_hash;
  meta["parameter_hash"] = nn::parameter_hash(net);
  meta["seed"] = seed;
  meta["style_bank"] = bank.ids;
  meta["styles"] = report.style_of;
  meta["skipped"] = report.skipped;
  write_json(out_root / "translation.json", meta);
  log::info("translated ", report.translated.size(), " samples, skipped ", report.skipped.size());
  return report;
}

TranslationReport translate_dataset(const fs::path& checkpoint, const fs::path& source_root,
                                    const fs::path& reference_root, std::uint64_t seed, const fs::path& out_root) {
  auto [net, info] = nn::load_checkpoint(checkpoint);
  net->eval();
  const auto bank = build_style_bank(net, Dataset::open(reference_root));
  return translate_dataset(net, nn::file_hash(checkpoint), source_root, bank, seed, out_root);
}

}  // namespace compstyle::inference
