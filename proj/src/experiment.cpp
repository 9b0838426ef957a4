#include "compstyle/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <iomanip>
#include <sstream>

#include "compstyle/dataset.hpp"
#include "compstyle/error.hpp"
#include "compstyle/inference.hpp"
#include "compstyle/log.hpp"
#include "compstyle/metrics.hpp"
#include "compstyle/scenegen.hpp"

namespace compstyle::experiment {

using nlohmann::json;

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

scenegen::DomainAppearance appearance_for(DomainTag domain, const scenegen::ToySatelliteSpec& spec) {
  return domain == DomainTag::real ? scenegen::DomainAppearance::pseudo_real(spec)
                                   : scenegen::DomainAppearance::synthetic();
}

std::vector<AnnotatedSample> load_all(const Dataset& ds) {
  std::vector<AnnotatedSample> out;
  out.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) out.push_back(ds.load(i));
  return out;
}

std::vector<ImageBuffer> images_of(const std::vector<AnnotatedSample>& samples) {
  std::vector<ImageBuffer> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.image);
  return out;
}

bool same_pose(const PoseRecord& a, const PoseRecord& b) {
  return (a.R - b.R).cwiseAbs().maxCoeff() < 1e-9 && (a.t - b.t).cwiseAbs().maxCoeff() < 1e-9;
}

}  // namespace

void generate_domain(const config::RunConfig& cfg, DomainTag domain, int count, std::uint64_t seed,
                     const fs::path& out) {
  const scenegen::ToySatelliteSpec spec;
  scenegen::GenerateOptions opts;
  opts.count = count;
  opts.seed = seed;
  opts.domain = domain;
  opts.id_prefix = domain == DomainTag::real ? "real_" : "syn_";
  scenegen::generate_dataset(spec, appearance_for(domain, spec), cfg.sampler(), opts, out);
}

weakpair::BuildResult build_pairs(const config::RunConfig& cfg, const fs::path& views_file, const fs::path& out) {
  const auto views = weakpair::read_views(views_file);
  const scenegen::ToySatelliteSpec spec;
  const auto appearance = scenegen::DomainAppearance::synthetic();
  const auto sampler = cfg.sampler();
  const auto k = CameraIntrinsics::for_resolution(sampler.resolution, sampler.resolution, sampler.focal_scale);
  const auto seed = cfg.data_seed();
  auto render = [&](const weakpair::ViewRecord& view, const PoseRecord& pose) {
    return scenegen::render_scene(spec, pose, k, appearance, scenegen::derive_seed(seed, fnv1a(view.view_id)));
  };
  return weakpair::build_pairs(views, render, cfg.expected_instances(), out);
}

DataLayout DataLayout::under(const fs::path& root) {
  return {root / "real_train", root / "pairs", root / "synth_eval", root / "real_eval"};
}

DataLayout prepare_data(const config::RunConfig& cfg, const fs::path& root) {
  const auto layout = DataLayout::under(root);
  const json stamp = {{"data", cfg.tree().at("data")}, {"scenegen", cfg.tree().at("scenegen")},
                      {"weakpair", cfg.tree().at("weakpair")}};
  const auto stamp_path = root / "data.json";
  if (fs::exists(stamp_path) && read_json(stamp_path) == stamp) {
    bool complete = true;
    for (const auto& p : {layout.real_train, layout.pairs, layout.synth_eval, layout.real_eval}) {
      complete = complete && fs::exists(p / "manifest.jsonl");
    }
    if (complete) {
      log::info("reusing datasets in ", root.string());
      return layout;
    }
  }
  fs::create_directories(root);
  const auto seed = cfg.data_seed();
  log::info("rendering datasets in ", root.string());
  generate_domain(cfg, DomainTag::real, cfg.train_views(), scenegen::derive_seed(seed, 1), layout.real_train);
  build_pairs(cfg, layout.real_train / "views.jsonl", layout.pairs);
  // same seed: the pseudo-real evaluation set shares the held-out poses
  generate_domain(cfg, DomainTag::synthetic, cfg.eval_views(), scenegen::derive_seed(seed, 2), layout.synth_eval);
  generate_domain(cfg, DomainTag::real, cfg.eval_views(), scenegen::derive_seed(seed, 2), layout.real_eval);
  write_json(stamp_path, stamp);
  return layout;
}

std::vector<std::array<double, 3>> reference_palette() {
  const scenegen::ToySatelliteSpec spec;
  const auto p = scenegen::DomainAppearance::pseudo_real(spec).palette(spec);
  return {p.begin(), p.end()};
}

json ImageReport::to_json() const {
  json j = {{"extractor", extractor_id},
            {"count", count},
            {"fid_translated", fid_translated},
            {"fid_source", fid_source},
            {"fid_drop", fid_drop()},
            {"kid_translated", kid_translated},
            {"kid_source", kid_source},
            {"mask_iou", mask_iou},
            {"mask_iou_source", mask_iou_source},
            {"edge_error", edge_error}};
  j["edge_baseline"] = edge_baseline ? json(*edge_baseline) : json(nullptr);
  return j;
}

ImageReport evaluate_images(const fs::path& translated, const fs::path& source, const fs::path& real,
                            const config::EvalConfig& eval) {
  const auto tr = load_all(Dataset::open(translated));
  const auto src_ds = Dataset::open(source);
  const auto re = load_all(Dataset::open(real));
  std::map<std::string, std::size_t> src_index;
  for (std::size_t i = 0; i < src_ds.size(); ++i) src_index[src_ds.entries()[i].id] = i;
  std::vector<AnnotatedSample> src;
  for (const auto& t : tr) {
    const auto it = src_index.find(t.id);
    if (it == src_index.end()) throw ValidationError("translated sample " + t.id + " has no source");
    src.push_back(src_ds.load(it->second));
  }
  if (tr.size() < 2 || re.size() < 2) throw ValidationError("image evaluation needs at least two images per set");

  ImageReport r;
  r.count = static_cast<int>(tr.size());
  const metrics::DeskExtractor extractor(eval.extractor_seed);
  r.extractor_id = extractor.id();
  const auto f_tr = extractor.embed_all(images_of(tr));
  const auto f_src = extractor.embed_all(images_of(src));
  const auto f_re = extractor.embed_all(images_of(re));
  r.fid_translated = metrics::fid(f_tr, f_re);
  r.fid_source = metrics::fid(f_src, f_re);
  metrics::KidOptions kid;
  kid.subset_size = std::min<int>({eval.kid_subset_size, static_cast<int>(tr.size()), static_cast<int>(re.size())});
  kid.subsets = eval.kid_subsets;
  kid.seed = eval.extractor_seed;
  r.kid_translated = metrics::kid(f_tr, f_re, kid);
  r.kid_source = metrics::kid(f_src, f_re, kid);

  const auto palette = reference_palette();
  double iou = 0, iou_src = 0, edge = 0;
  for (std::size_t i = 0; i < tr.size(); ++i) {
    const auto object = object_mask(src[i].mask);
    iou += metrics::mask_iou(metrics::infer_mask_by_palette(tr[i].image, object, palette), src[i].mask).mean;
    iou_src += metrics::mask_iou(metrics::infer_mask_by_palette(src[i].image, object, palette), src[i].mask).mean;
    edge += metrics::edge_error(src[i].image, tr[i].image, object).scaled;
  }
  const double n = static_cast<double>(tr.size());
  r.mask_iou = iou / n;
  r.mask_iou_source = iou_src / n;
  r.edge_error = edge / n;

  // baseline: how far real images of the same poses are from the synthetic edges
  const auto src_all = load_all(src_ds);
  if (src_all.size() == re.size()) {
    bool aligned = true;
    for (std::size_t i = 0; i < re.size() && aligned; ++i) aligned = same_pose(src_all[i].pose, re[i].pose);
    if (aligned) {
      double base = 0;
      for (std::size_t i = 0; i < re.size(); ++i) {
        base += metrics::edge_error(src_all[i].image, re[i].image, object_mask(src_all[i].mask)).scaled;
      }
      r.edge_baseline = base / static_cast<double>(re.size());
    }
  }
  return r;
}

json PoseReport::to_json() const {
  return {{"count", count}, {"mean_add", mean_add}, {"pass_rate", pass_rate}, {"auc", auc}};
}

PoseReport evaluate_poses(const fs::path& ground_truth, const fs::path& predictions, const config::EvalConfig& eval) {
  const auto gt = Dataset::open(ground_truth);
  const auto pred = metrics::read_predictions(predictions);
  const auto points = scenegen::sample_model_points(scenegen::ToySatelliteSpec{}, eval.model_points, eval.extractor_seed);
  std::vector<double> errors;
  std::vector<std::string> missing;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const auto& id = gt.entries()[i].id;
    const auto it = pred.find(id);
    if (it == pred.end()) {
      missing.push_back(id);
      continue;
    }
    errors.push_back(metrics::add_error(read_pose_file(gt.pose_path(i)).pose, it->second, points));
  }
  if (!missing.empty()) {
    throw ValidationError(std::to_string(missing.size()) + " samples have no prediction (first: " + missing[0] + ")");
  }
  PoseReport r;
  r.count = static_cast<int>(errors.size());
  for (double e : errors) r.mean_add += e;
  r.mean_add /= std::max<double>(1.0, static_cast<double>(errors.size()));
  r.pass_rate = metrics::pass_rate(errors, eval.pass_threshold);
  r.auc = metrics::auc(errors, eval.auc_max);
  return r;
}

json run_pipeline(const config::RunConfig& cfg, const DataLayout& data, const fs::path& out) {
  fs::create_directories(out);
  cfg.save(out / "config.json");

  training::TrainOptions opts;
  opts.model = cfg.model();
  opts.loss = cfg.loss();
  opts.train = cfg.train();
  opts.out_dir = out / "train";
  opts.snapshot = cfg.tree();
  const auto train_data = training::load_training_data(data.pairs, data.real_train);
  auto result = training::train(train_data, opts);

  auto& net = result.network;
  const auto bank = inference::build_style_bank(net, Dataset::open(data.real_train));
  inference::translate_dataset(net, nn::file_hash(result.checkpoint), data.synth_eval, bank, cfg.seed(),
                               out / "translated");
  const auto report = evaluate_images(out / "translated", data.synth_eval, data.real_eval, cfg.eval());

  json metrics = report.to_json();
  metrics["seed"] = cfg.seed();
  metrics["parameter_hash"] = result.parameter_hash;
  metrics["steps"] = static_cast<int>(result.log.size());
  if (!result.log.empty()) metrics["final_losses"] = training::to_json(result.log.back());
  write_json(out / "metrics.json", metrics);
  return metrics;
}

std::vector<Variant> ablation_variants() {
  return {
      {"full", json::object()},
      {"no_mask", {{"model", {{"component_guidance", false}}}}},
      {"no_nce", {{"loss", {{"nce", 0.0}}}}},
      {"no_reg", {{"loss", {{"reg", 0.0}}}}},
      {"no_edge", {{"loss", {{"edge", 0.0}}}}},
  };
}

json run_ablation(const config::RunConfig& cfg, const DataLayout& data, const fs::path& out) {
  json rows = json::array();
  for (const auto& v : ablation_variants()) {
    auto variant_cfg = cfg;
    variant_cfg.merge(v.overrides);
    const auto dir = out / v.name;
    json metrics;
    if (fs::exists(dir / "metrics.json") && fs::exists(dir / "config.json") &&
        read_json(dir / "config.json") == variant_cfg.tree()) {
      log::info("variant ", v.name, ": reusing ", (dir / "metrics.json").string());
      metrics = read_json(dir / "metrics.json");
    } else {
      log::info("variant ", v.name);
      metrics = run_pipeline(variant_cfg, data, dir);
    }
    rows.push_back({{"variant", v.name},
                    {"fid_desk", metrics.at("fid_translated")},
                    {"mask_iou", metrics.at("mask_iou")},
                    {"edge_error", metrics.at("edge_error")}});
  }
  json result = {{"seed", cfg.seed()}, {"rows", rows}};
  write_json(out / "ablation.json", result);
  return result;
}

std::string format_ablation(const json& result) {
  std::ostringstream os;
  os << std::left << std::setw(10) << "variant" << std::right << std::setw(12) << "FID-desk" << std::setw(12)
     << "Mask IoU" << std::setw(12) << "Edge Error" << '\n';
  os << std::fixed;
  for (const auto& row : result.at("rows")) {
    os << std::left << std::setw(10) << row.at("variant").get<std::string>() << std::right << std::setprecision(3)
       << std::setw(12) << row.at("fid_desk").get<double>() << std::setw(12) << row.at("mask_iou").get<double>()
       << std::setw(12) << row.at("edge_error").get<double>() << '\n';
  }
  return os.str();
}

}  // namespace compstyle::experiment
