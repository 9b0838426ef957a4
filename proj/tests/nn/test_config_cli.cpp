#include "torch_doctest.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "compstyle/config.hpp"
#include "compstyle/dataset.hpp"
#include "compstyle/error.hpp"
#include "../test_util.hpp"

using namespace compstyle;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(const std::string& args, const fs::path& dir) {
  const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = std::string(COMPSTYLE_CLI) + " " + args + " > " + out.string() + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

}  // namespace

TEST_CASE("config defaults, overrides and rejection") {
  config::RunConfig cfg;
  CHECK(cfg.seed() == 42);
  CHECK(cfg.resolution() == 128);
  CHECK(cfg.train().seed == 42);
  cfg.apply_override("train.lr=0.001");
  CHECK(cfg.train().lr == 0.001);
  cfg.apply_override("model.component_guidance=false");
  CHECK_FALSE(cfg.model().component_guidance);
  cfg.set("seed", 7);
  CHECK(cfg.train().seed == 7);

  CHECK_THROWS_AS(cfg.apply_override("train.nonsense=1"), ConfigError);
  CHECK_THROWS_AS(cfg.apply_override("train.lr=\"fast\""), ConfigError);
  CHECK_THROWS_AS(cfg.merge(json{{"unknown", 1}}), ConfigError);

  testutil::TempDir dir("cfg");
  cfg.save(dir / "c.json");
  const auto back = config::RunConfig::load(dir / "c.json");
  CHECK(back.tree() == cfg.tree());
  std::ofstream(dir / "bad.json") << R"({"model": {"depth": "three"}})";
  CHECK_THROWS_AS(config::RunConfig::load(dir / "bad.json"), ConfigError);
}

TEST_CASE("CLI: pose evaluation of ground truth is perfect") {
  testutil::TempDir dir("cli");
  const auto d = dir.path().string();
  auto r = cli("gen-data --domain real --count 3 --override data.resolution=32 --seed 5 --out " + d + "/gt", dir.path());
  REQUIRE(r.code == 0);
  CHECK(fs::exists(dir / "gt" / "config.json"));
  CHECK(fs::exists(dir / "gt" / "log.jsonl"));

  const auto gt = Dataset::open(dir / "gt");
  std::vector<json> preds;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    auto p = pose_to_json(gt.load(i).pose);
    p["id"] = gt.entries()[i].id;
    preds.push_back(p);
  }
  write_jsonl(dir / "pred.jsonl", preds);
  r = cli("eval-poses --gt " + d + "/gt --predictions " + d + "/pred.jsonl --out " + d + "/ev", dir.path());
  REQUIRE(r.code == 0);
  const auto report = read_json(dir / "ev" / "metrics.json");
  CHECK(report.at("mean_add").get<double>() == 0.0);
  CHECK(report.at("pass_rate").get<double>() == 1.0);
  CHECK(report.at("auc").get<double>() == 1.0);

  preds.pop_back();
  write_jsonl(dir / "pred.jsonl", preds);
  r = cli("eval-poses --gt " + d + "/gt --predictions " + d + "/pred.jsonl --out " + d + "/ev2", dir.path());
  CHECK(r.code == 1);
  CHECK(r.err.find("error: ValidationError") != std::string::npos);
}

TEST_CASE("CLI: usage and configuration errors") {
  testutil::TempDir dir("cli_err");
  const auto d = dir.path().string();
  CHECK(cli("", dir.path()).code == 2);
  CHECK(cli("gen-data --domain moon --out " + d + "/x", dir.path()).code == 2);
  const auto r = cli("gen-data --override model.bogus=1 --out " + d + "/x", dir.path());
  CHECK(r.code == 1);
  CHECK(r.err.find("error: ConfigError") != std::string::npos);
}
