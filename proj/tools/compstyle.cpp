// compstyle: data generation, weak pairing, training, translation and evaluation.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "compstyle/config.hpp"
#include "compstyle/dataset.hpp"
#include "compstyle/error.hpp"
#include "compstyle/experiment.hpp"
#include "compstyle/inference.hpp"
#include "compstyle/log.hpp"
#include "compstyle/training.hpp"

namespace fs = std::filesystem;
using namespace compstyle;
using nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c, bool out_required = true) {
  cmd->add_option("--config", c.config, "JSON run configuration");
  cmd->add_option("--seed", c.seed, "global seed (overrides the config)");
  auto* out = cmd->add_option("--out", c.out, "output directory");
  if (out_required) out->required();
  cmd->add_option("--override", c.overrides, "dotted.key=value, repeatable");
}

config::RunConfig resolve(const Common& c) {
  auto cfg = c.config.empty() ? config::RunConfig() : config::RunConfig::load(c.config);
  for (const auto& o : c.overrides) cfg.apply_override(o);
  if (c.seed) cfg.set("seed", *c.seed);
  // parse every section once so bad values fail before any work starts
  (void)cfg.model();
  (void)cfg.loss();
  (void)cfg.train();
  (void)cfg.sampler();
  (void)cfg.eval();
  return cfg;
}

/// Creates the output directory, stores the config snapshot and opens the JSON log.
config::RunConfig start(const Common& c, const char* command) {
  auto cfg = resolve(c);
  fs::create_directories(c.out);
  cfg.save(fs::path(c.out) / "config.json");
  log::set_jsonl_sink(fs::path(c.out) / "log.jsonl");
  log::info(command, " seed=", cfg.seed());
  return cfg;
}

void print_json(const json& j) { std::cout << j.dump(2) << std::endl; }

DomainTag parse_domain(const std::string& s) { return domain_tag_from_string(s); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Component-guided style transfer toolkit"};
  app.require_subcommand(1);

  Common common;
  std::function<void()> action;

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "render a toy dataset");
  add_common(gen, common);
  std::string domain = "synthetic";
  std::optional<int> count;
  gen->add_option("--domain", domain, "synthetic or real")->check(CLI::IsMember({"synthetic", "real"}));
  gen->add_option("--count", count, "number of views (default data.train_views)");
  gen->callback([&] {
    action = [&] {
      const auto cfg = start(common, "gen-data");
      const int n = count.value_or(cfg.train_views());
      experiment::generate_domain(cfg, parse_domain(domain), n, cfg.seed(), common.out);
      print_json({{"dataset", common.out}, {"count", n}, {"domain", domain}});
    };
  });

  // build-pairs
  auto* pairs = app.add_subcommand("build-pairs", "filter views and render their synthetic counterparts");
  add_common(pairs, common);
  std::string views;
  pairs->add_option("--views", views, "views.jsonl of the real acquisition")->required()->check(CLI::ExistingFile);
  pairs->callback([&] {
    action = [&] {
      const auto cfg = start(common, "build-pairs");
      const auto result = experiment::build_pairs(cfg, views, common.out);
      print_json({{"views", result.records.size()},
                  {"retained", result.retained()},
                  {"discarded", result.discarded()},
                  {"usable", result.usable().size()}});
    };
  });

  // train
  auto* train = app.add_subcommand("train", "train the translation network on weak pairs");
  add_common(train, common);
  std::string pairs_dir, real_dir;
  train->add_option("--pairs", pairs_dir, "build-pairs output")->required()->check(CLI::ExistingDirectory);
  train->add_option("--real", real_dir, "real reference dataset")->required()->check(CLI::ExistingDirectory);
  train->callback([&] {
    action = [&] {
      const auto cfg = start(common, "train");
      training::TrainOptions opts;
      opts.model = cfg.model();
      opts.loss = cfg.loss();
      opts.train = cfg.train();
      opts.out_dir = common.out;
      opts.snapshot = cfg.tree();
      const auto result = training::train(training::load_training_data(pairs_dir, real_dir), opts);
      print_json({{"checkpoint", result.checkpoint.string()},
                  {"steps", result.log.size()},
                  {"parameter_hash", result.parameter_hash}});
    };
  });

  // translate
  auto* translate = app.add_subcommand("translate", "translate a synthetic dataset");
  add_common(translate, common);
  std::string checkpoint, input, references;
  translate->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  translate->add_option("--input", input, "synthetic dataset")->required()->check(CLI::ExistingDirectory);
  translate->add_option("--references", references, "real style references")->required()->check(CLI::ExistingDirectory);
  translate->callback([&] {
    action = [&] {
      const auto cfg = start(common, "translate");
      const auto report = inference::translate_dataset(checkpoint, input, references, cfg.seed(), common.out);
      print_json({{"translated", report.translated.size()}, {"skipped", report.skipped}});
    };
  });

  // eval-images
  auto* eval_images = app.add_subcommand("eval-images", "FID/KID, Mask IoU and Edge Error of a translated dataset");
  add_common(eval_images, common);
  std::string translated, source, real;
  eval_images->add_option("--translated", translated)->required()->check(CLI::ExistingDirectory);
  eval_images->add_option("--source", source, "untranslated synthetic dataset")->required()->check(CLI::ExistingDirectory);
  eval_images->add_option("--real", real, "real dataset")->required()->check(CLI::ExistingDirectory);
  eval_images->callback([&] {
    action = [&] {
      const auto cfg = start(common, "eval-images");
      const auto report = experiment::evaluate_images(translated, source, real, cfg.eval()).to_json();
      write_json(fs::path(common.out) / "metrics.json", report);
      print_json(report);
    };
  });

  // eval-poses
  auto* eval_poses = app.add_subcommand("eval-poses", "ADD, pass rate and AUC of pose predictions");
  add_common(eval_poses, common);
  std::string gt, predictions;
  eval_poses->add_option("--gt", gt, "dataset with ground-truth poses")->required()->check(CLI::ExistingDirectory);
  eval_poses->add_option("--predictions", predictions, "JSON lines {id, R, t}")->required()->check(CLI::ExistingFile);
  eval_poses->callback([&] {
    action = [&] {
      const auto cfg = start(common, "eval-poses");
      const auto report = experiment::evaluate_poses(gt, predictions, cfg.eval()).to_json();
      write_json(fs::path(common.out) / "metrics.json", report);
      print_json(report);
    };
  });

  // ablate
  auto* ablate = app.add_subcommand("ablate", "run the component-guidance and loss ablation grid");
  add_common(ablate, common);
  std::string data_dir;
  ablate->add_option("--data", data_dir, "dataset cache (default OUT/data)");
  ablate->callback([&] {
    action = [&] {
      const auto cfg = start(common, "ablate");
      const auto data = experiment::prepare_data(cfg, data_dir.empty() ? fs::path(common.out) / "data" : fs::path(data_dir));
      const auto result = experiment::run_ablation(cfg, data, common.out);
      std::cout << experiment::format_ablation(result);
      print_json(result);
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() != 0) std::fprintf(stderr, "error: UsageError: %s\n", e.what());
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    action();
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s: %s\n", e.kind().c_str(), e.what());
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "error: ValidationError: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: InternalError: %s\n", e.what());
    return 1;
  }
  return 0;
}
