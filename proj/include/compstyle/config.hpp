#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "compstyle/scenegen.hpp"
#include "compstyle/styletransfer.hpp"
#include "compstyle/training.hpp"

namespace compstyle::config {

struct EvalConfig {
  double pass_threshold = 0.02;  // meters
  double auc_max = 0.10;         // meters
  std::uint64_t extractor_seed = 2024;
  int kid_subset_size = 50;
  int kid_subsets = 100;
  int model_points = 1000;
};

/// Nested key-value run configuration. Every key has a default; files and
/// overrides may only replace existing keys, with a compatible type.
class RunConfig {
 public:
  RunConfig();

  static nlohmann::json defaults();
  /// Defaults merged with the JSON file at `path`.
  static RunConfig load(const std::filesystem::path& path);
  static RunConfig from_json(const nlohmann::json& tree);

  /// Replaces existing keys of the tree with those of `patch` (recursively).
  void merge(const nlohmann::json& patch);
  /// `dotted.key=value`; the value is parsed as JSON, or taken as a string.
  void apply_override(const std::string& assignment);
  void set(const std::string& dotted_key, const nlohmann::json& value);

  const nlohmann::json& tree() const { return tree_; }
  void save(const std::filesystem::path& path) const;

  std::uint64_t seed() const;
  std::uint64_t data_seed() const;
  int resolution() const;
  int train_views() const;
  int eval_views() const;
  int expected_instances() const;
  scenegen::PoseSamplerConfig sampler() const;
  nn::GeneratorConfig model() const;
  training::LossWeights loss() const;
  /// Carries the top-level seed.
  training::TrainConfig train() const;
  EvalConfig eval() const;

 private:
  nlohmann::json tree_;
};

}  // namespace compstyle::config
