#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "compstyle/dataset.hpp"
#include "compstyle/domain.hpp"
#include "compstyle/styletransfer.hpp"

namespace compstyle::inference {

/// Style matrices of the real references, in reference order.
struct StyleBank {
  std::vector<std::string> ids;
  std::vector<nn::StyleMatrix> styles;

  std::size_t size() const { return styles.size(); }
  void validate() const;
  /// Fills every absent column with the mean of that column over the entries
  /// that have it. Columns absent everywhere stay absent.
  void complete();
};

/// Style matrices of every reference, completed with `StyleBank::complete`.
StyleBank build_style_bank(nn::TranslationNetwork& net, std::span<const AnnotatedSample> references);
StyleBank build_style_bank(nn::TranslationNetwork& net, const Dataset& references);

/// Translated pixels inside `mask`, source pixels (bit-exact) outside.
ImageBuffer compose_foreground(const ImageBuffer& translated, const ImageBuffer& source, const BinaryMask& mask);

/// generate + compose_foreground with the sample's object mask.
ImageBuffer translate_image(nn::TranslationNetwork& net, const ImageBuffer& image, const ComponentMask& mask,
                            const nn::StyleMatrix& styles);

/// Columns of labels in `active` come from `styles`, the rest from the image's
/// own encoding. Throws if `active` names a label outside the taxonomy.
ImageBuffer selective_transfer(nn::TranslationNetwork& net, const ImageBuffer& image, const ComponentMask& mask,
                               const nn::StyleMatrix& styles, const std::set<Label>& active);

struct TranslationReport {
  std::vector<std::string> translated;
  std::vector<std::string> skipped;
  std::map<std::string, std::string> style_of;  // sample id -> reference id
};

/// Translates every sample of the dataset at `source_root` into `out_root` with the
/// same layout. Masks and pose files are copied byte for byte; a style is drawn
/// per sample, uniformly from the bank, from `seed`. Writes `translation.json`.
TranslationReport translate_dataset(nn::TranslationNetwork& net, const std::string& checkpoint_hash,
                                    const std::filesystem::path& source_root, const StyleBank& bank,
                                    std::uint64_t seed, const std::filesystem::path& out_root);

TranslationReport translate_dataset(const std::filesystem::path& checkpoint, const std::filesystem::path& source_root,
                                    const std::filesystem::path& reference_root, std::uint64_t seed,
                                    const std::filesystem::path& out_root);

}  // namespace compstyle::inference
