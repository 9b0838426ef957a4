#include "compstyle/config.hpp"

#include <fstream>
#include <sstream>

#include "compstyle/dataset.hpp"
#include "compstyle/error.hpp"

namespace compstyle::config {

using nlohmann::json;

namespace {

bool compatible(const json& def, const json& value) {
  if (def.is_boolean()) return value.is_boolean();
  if (def.is_number_integer()) {
    if (value.is_number_integer()) return true;
    return value.is_number_float() && value.get<double>() == static_cast<double>(static_cast<long long>(value.get<double>()));
  }
  if (def.is_number()) return value.is_number();
  if (def.is_string()) return value.is_string();
  if (def.is_array()) return value.is_array();
  if (def.is_object()) return value.is_object();
  return def.type() == value.type();
}

void merge_into(json& base, const json& patch, const std::string& prefix) {
  if (!patch.is_object()) throw ConfigError("config section '" + prefix + "' must be an object");
  for (const auto& [key, value] : patch.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!base.contains(key)) throw ConfigError("unknown config key '" + path + "'");
    auto& slot = base[key];
    if (slot.is_object()) {
      merge_into(slot, value, path);
      continue;
    }
    if (!compatible(slot, value)) {
      throw ConfigError("config key '" + path + "' expects " + std::string(slot.type_name()) + ", got " +
                        value.type_name());
    }
    slot = slot.is_number_integer() && value.is_number_float() ? json(static_cast<long long>(value.get<double>()))
                                                                : value;
  }
}

template <typename F>
auto section(const json& tree, const char* name, F&& parse) {
  try {
    return parse(tree.at(name));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config section '") + name + "': " + e.what());
  }
}

}  // namespace

json RunConfig::defaults() {
  json model = nn::to_json(nn::GeneratorConfig{});
  model.erase("resolution");  // taken from data.resolution
  json train = training::to_json(training::TrainConfig{});
  train.erase("seed");  // taken from the top-level seed
  const EvalConfig eval;
  const scenegen::PoseSamplerConfig sampler;
  return {
      {"seed", 42},
      {"data",
       {{"resolution", 128}, {"seed", 2024}, {"train_views", 200}, {"eval_views", 200}}},
      {"scenegen",
       {{"min_distance", sampler.min_distance},
        {"max_distance", sampler.max_distance},
        {"min_elevation_deg", sampler.min_elevation_deg},
        {"max_elevation_deg", sampler.max_elevation_deg},
        {"aim_jitter", sampler.aim_jitter},
        {"focal_scale", sampler.focal_scale}}},
      {"weakpair", {{"expected_instances", 1}}},
      {"model", model},
      {"loss", training::to_json(training::LossWeights{})},
      {"train", train},
      {"eval",
       {{"pass_threshold", eval.pass_threshold},
        {"auc_max", eval.auc_max},
        {"extractor_seed", eval.extractor_seed},
        {"kid_subset_size", eval.kid_subset_size},
        {"kid_subsets", eval.kid_subsets},
        {"model_points", eval.model_points}}},
  };
}

RunConfig::RunConfig() : tree_(defaults()) {}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("config file not found: " + path.string());
  json doc;
  try {
    std::ifstream in(path);
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return from_json(doc);
}

RunConfig RunConfig::from_json(const json& tree) {
  RunConfig c;
  c.merge(tree);
  return c;
}

void RunConfig::merge(const json& patch) { merge_into(tree_, patch, ""); }

void RunConfig::set(const std::string& dotted_key, const json& value) {
  if (dotted_key.empty()) throw ConfigError("empty config key");
  json patch = value;
  std::string key = dotted_key;
  for (auto dot = key.rfind('.'); dot != std::string::npos; dot = key.rfind('.')) {
    patch = json{{key.substr(dot + 1), patch}};
    key = key.substr(0, dot);
  }
  merge(json{{key, patch}});
}

void RunConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  set(key, value);
}

void RunConfig::save(const std::filesystem::path& path) const { write_json(path, tree_); }

std::uint64_t RunConfig::seed() const { return tree_.at("seed").get<std::uint64_t>(); }
std::uint64_t RunConfig::data_seed() const { return tree_.at("data").at("seed").get<std::uint64_t>(); }
int RunConfig::resolution() const { return tree_.at("data").at("resolution").get<int>(); }
int RunConfig::train_views() const { return tree_.at("data").at("train_views").get<int>(); }
int RunConfig::eval_views() const { return tree_.at("data").at("eval_views").get<int>(); }
int RunConfig::expected_instances() const { return tree_.at("weakpair").at("expected_instances").get<int>(); }

scenegen::PoseSamplerConfig RunConfig::sampler() const {
  auto s = section(tree_, "scenegen", [](const json& j) {
    scenegen::PoseSamplerConfig c;
    c.min_distance = j.at("min_distance").get<double>();
    c.max_distance = j.at("max_distance").get<double>();
    c.min_elevation_deg = j.at("min_elevation_deg").get<double>();
    c.max_elevation_deg = j.at("max_elevation_deg").get<double>();
    c.aim_jitter = j.at("aim_jitter").get<double>();
    c.focal_scale = j.at("focal_scale").get<double>();
    return c;
  });
  s.resolution = resolution();
  s.validate();
  return s;
}

nn::GeneratorConfig RunConfig::model() const {
  auto j = tree_.at("model");
  j["resolution"] = resolution();
  nn::GeneratorConfig c;
  try {
    c = nn::generator_config_from_json(j);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config section 'model': ") + e.what());
  }
  c.validate();
  return c;
}

training::LossWeights RunConfig::loss() const {
  auto w = section(tree_, "loss", [](const json& j) { return training::loss_weights_from_json(j); });
  w.validate();
  return w;
}

training::TrainConfig RunConfig::train() const {
  auto j = tree_.at("train");
  j["seed"] = seed();
  training::TrainConfig c;
  try {
    c = training::train_config_from_json(j);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config section 'train': ") + e.what());
  }
  c.validate();
  return c;
}

EvalConfig RunConfig::eval() const {
  return section(tree_, "eval", [](const json& j) {
    EvalConfig e;
    e.pass_threshold = j.at("pass_threshold").get<double>();
    e.auc_max = j.at("auc_max").get<double>();
    e.extractor_seed = j.at("extractor_seed").get<std::uint64_t>();
    e.kid_subset_size = j.at("kid_subset_size").get<int>();
    e.kid_subsets = j.at("kid_subsets").get<int>();
    e.model_points = j.at("model_points").get<int>();
    return e;
  });
}

}  // namespace compstyle::config
