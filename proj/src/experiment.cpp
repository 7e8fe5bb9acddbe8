#include "apga/harness/experiment.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include "apga/data/folder.hpp"
#include "apga/harness/plot.hpp"
#include "apga/io/image_io.hpp"
#include "apga/trainer/trainer.hpp"

namespace apga::harness {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// config (de)serialization

namespace {

json cutout_to_json(const CutoutConfig& c) {
  return json{{"min_frac", c.min_frac}, {"max_frac", c.max_frac}, {"patches", c.patches}};
}

CutoutConfig cutout_from_json(const json& j) {
  CutoutConfig c;
  c.min_frac = j.at("min_frac").get<double>();
  c.max_frac = j.at("max_frac").get<double>();
  c.patches = j.at("patches").get<int>();
  return c;
}

json train_to_json(const TrainConfig& t) {
  return json{{"steps", t.steps},
              {"batch_size", t.batch_size},
              {"lr_classifier", t.lr_classifier},
              {"lr_policy", t.lr_policy},
              {"baseline_decay", t.baseline_decay},
              {"lambda_zeros", t.lambda_zeros},
              {"pretrain_epochs", t.pretrain_epochs},
              {"seed", t.seed},
              {"precision", to_string(t.precision)},
              {"augmentation", to_string(t.augmentation)},
              {"use_baseline", t.use_baseline},
              {"policy_target", to_string(t.policy_target)},
              {"eval_interval", t.eval_interval},
              {"checkpoint_interval", t.checkpoint_interval},
              {"cutout", cutout_to_json(t.cutout)},
              {"gradcam_ref_checkpoint", t.gradcam_ref_checkpoint}};
}

TrainConfig train_from_json(const json& j) {
  TrainConfig t;
  t.steps = j.value("steps", t.steps);
  t.batch_size = j.value("batch_size", t.batch_size);
  t.lr_classifier = j.value("lr_classifier", t.lr_classifier);
  t.lr_policy = j.value("lr_policy", t.lr_policy);
  t.baseline_decay = j.value("baseline_decay", t.baseline_decay);
  t.lambda_zeros = j.value("lambda_zeros", t.lambda_zeros);
  t.pretrain_epochs = j.value("pretrain_epochs", t.pretrain_epochs);
  t.seed = j.value("seed", t.seed);
  t.precision = precision_from_string(j.value("precision", "f32"));
  t.augmentation = augmentation_from_string(j.value("augmentation", "apga"));
  t.use_baseline = j.value("use_baseline", t.use_baseline);
  t.policy_target = policy_target_from_string(j.value("policy_target", "adversarial_mask"));
  t.eval_interval = j.value("eval_interval", t.eval_interval);
  t.checkpoint_interval = j.value("checkpoint_interval", t.checkpoint_interval);
  if (j.contains("cutout")) t.cutout = cutout_from_json(j.at("cutout"));
  t.gradcam_ref_checkpoint = j.value("gradcam_ref_checkpoint", std::string());
  return t;
}

json synthetic_to_json(const data::SyntheticSpec& s) {
  return json{{"height", s.height},
              {"width", s.width},
              {"classes", s.classes},
              {"roi_shape", s.roi_shape == data::RoiShape::disc ? "disc" : "square"},
              {"roi_min_radius", s.roi_min_radius},
              {"roi_max_radius", s.roi_max_radius},
              {"distractor_count", s.distractor_count},
              {"distractor_min_side", s.distractor_min_side},
              {"distractor_max_side", s.distractor_max_side},
              {"background", s.background},
              {"stripe_lo", s.stripe_lo},
              {"stripe_hi", s.stripe_hi},
              {"stripe_half_period", s.stripe_half_period},
              {"noise_sigma", s.noise_sigma},
              {"train_count", s.train_count},
              {"val_count", s.val_count},
              {"test_count", s.test_count},
              {"seed", s.seed}};
}

data::SyntheticSpec synthetic_from_json(const json& j) {
  data::SyntheticSpec s;
  s.height = j.value("height", s.height);
  s.width = j.value("width", s.width);
  s.classes = j.value("classes", s.classes);
  const std::string shape = j.value("roi_shape", "disc");
  if (shape == "disc") s.roi_shape = data::RoiShape::disc;
  else if (shape == "square") s.roi_shape = data::RoiShape::square;
  else throw config_error("unknown roi_shape: " + shape);
  s.roi_min_radius = j.value("roi_min_radius", s.roi_min_radius);
  s.roi_max_radius = j.value("roi_max_radius", s.roi_max_radius);
  s.distractor_count = j.value("distractor_count", s.distractor_count);
  s.distractor_min_side = j.value("distractor_min_side", s.distractor_min_side);
  s.distractor_max_side = j.value("distractor_max_side", s.distractor_max_side);
  s.background = j.value("background", s.background);
  s.stripe_lo = j.value("stripe_lo", s.stripe_lo);
  s.stripe_hi = j.value("stripe_hi", s.stripe_hi);
  s.stripe_half_period = j.value("stripe_half_period", s.stripe_half_period);
  s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
  s.train_count = j.value("train_count", s.train_count);
  s.val_count = j.value("val_count", s.val_count);
  s.test_count = j.value("test_count", s.test_count);
  s.seed = j.value("seed", s.seed);
  return s;
}

json dataset_to_json(const DatasetSource& d) {
  json j;
  j["type"] = d.type == DatasetSource::Type::synthetic ? "synthetic" : "folder";
  if (d.type == DatasetSource::Type::synthetic) {
    j["synthetic"] = synthetic_to_json(d.synthetic);
  } else {
    j["path"] = d.folder_path;
    j["height"] = d.height;
    j["width"] = d.width;
  }
  return j;
}

DatasetSource dataset_from_json(const json& j) {
  DatasetSource d;
  const std::string type = j.value("type", "synthetic");
  if (type == "synthetic") {
    d.type = DatasetSource::Type::synthetic;
    if (j.contains("synthetic")) d.synthetic = synthetic_from_json(j.at("synthetic"));
  } else if (type == "folder") {
    d.type = DatasetSource::Type::folder;
    d.folder_path = j.value("path", std::string());
    if (d.folder_path.empty()) throw config_error("folder dataset needs a path");
    d.height = j.value("height", d.height);
    d.width = j.value("width", d.width);
  } else {
    throw config_error("unknown dataset type: " + type);
  }
  return d;
}

}  // namespace

std::string serialize_config(const ExperimentConfig& cfg) {
  json j;
  j["version"] = cfg.version;
  j["dataset"] = dataset_to_json(cfg.dataset);
  j["train"] = train_to_json(cfg.train);
  j["output_dir"] = cfg.output_dir;
  j["export_masks"] = cfg.export_masks;
  j["export_plots"] = cfg.export_plots;
  j["seeds"] = cfg.seeds;
  return j.dump(2) + "\n";
}

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw config_error(std::string("malformed config JSON: ") + e.what());
  }
  try {
    ExperimentConfig cfg;
    cfg.version = j.value("version", 1);
    if (cfg.version != 1) throw config_error("unsupported config version");
    if (j.contains("dataset")) cfg.dataset = dataset_from_json(j.at("dataset"));
    if (j.contains("train")) cfg.train = train_from_json(j.at("train"));
    cfg.output_dir = j.value("output_dir", cfg.output_dir);
    cfg.export_masks = j.value("export_masks", cfg.export_masks);
    cfg.export_plots = j.value("export_plots", cfg.export_plots);
    if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (cfg.seeds.empty()) throw config_error("config needs at least one seed");
    return cfg;
  } catch (const json::exception& e) {
    throw config_error(std::string("bad config field: ") + e.what());
  }
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw config_error("cannot open config file: " + path);
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return parse_config(text);
}

void save_config_file(const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw io_error("cannot write config file: " + path);
  os << serialize_config(cfg);
}

// ---------------------------------------------------------------------------
// experiment driver

void mean_std(const std::vector<double>& xs, double& mean, double& sd) {
  mean = 0;
  sd = 0;
  if (xs.empty()) return;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return;
  double acc = 0;
  for (double x : xs) acc += (x - mean) * (x - mean);
  sd = std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

int max_worker_threads() {
  if (const char* env = std::getenv("APGA_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

namespace {

template <typename Scalar>
data::Dataset<Scalar> build_dataset(const DatasetSource& src) {
  if (src.type == DatasetSource::Type::synthetic) return data::generate<Scalar>(src.synthetic);
  if (!fs::exists(src.folder_path))
    throw config_error("dataset path does not exist: " + src.folder_path);
  return data::load_folder<Scalar>(src.folder_path, src.height, src.width);
}

template <typename Scalar>
ExperimentSummary run_experiment_impl(const ExperimentConfig& cfg) {
  const data::Dataset<Scalar> dataset = build_dataset<Scalar>(cfg.dataset);

  ExperimentSummary summary;
  summary.augmentation = to_string(cfg.train.augmentation);
  summary.runs.resize(cfg.seeds.size());

  const int workers =
      std::min<int>(max_worker_threads(), static_cast<int>(cfg.seeds.size()));
  std::exception_ptr failure;
  std::size_t next = 0;
  std::mutex work_mutex;

  auto worker = [&]() {
    while (true) {
      std::size_t i;
      {
        std::lock_guard<std::mutex> lk(work_mutex);
        if (next >= cfg.seeds.size() || failure) return;
        i = next++;
      }
      try {
        ExperimentConfig run_cfg = cfg;
        run_cfg.train.seed = cfg.seeds[i];
        const fs::path run_dir = fs::path(cfg.output_dir) /
                                 ("aug_" + to_string(cfg.train.augmentation)) /
                                 ("seed_" + std::to_string(cfg.seeds[i]));
        fs::create_directories(run_dir);
        save_config_file(run_cfg, (run_dir / "config.json").string());
        RunResult res = run<Scalar>(run_cfg.train, dataset, run_dir.string());
        SeedOutcome out;
        out.seed = cfg.seeds[i];
        out.val_accuracy = res.final_val_accuracy;
        out.test_accuracy = res.test_accuracy;
        out.run_dir = run_dir.string();
        summary.runs[i] = out;
        if (cfg.export_plots) plot_run(run_dir.string());
        if (cfg.export_masks) export_mask_gallery(run_dir.string());
      } catch (...) {
        std::lock_guard<std::mutex> lk(work_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };

  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<double> vals, tests;
  for (const auto& r : summary.runs) {
    vals.push_back(r.val_accuracy);
    tests.push_back(r.test_accuracy);
  }
  mean_std(vals, summary.val_mean, summary.val_std);
  mean_std(tests, summary.test_mean, summary.test_std);

  // merge into summary.json so different augmentation modes line up
  const fs::path summary_path = fs::path(cfg.output_dir) / "summary.json";
  json root = json::object();
  if (fs::exists(summary_path)) {
    std::ifstream is(summary_path);
    try {
      root = json::parse(is);
    } catch (const json::exception&) {
      root = json::object();
    }
  }
  json entry;
  entry["seeds"] = cfg.seeds;
  json val_acc = json::array(), test_acc = json::array();
  for (const auto& r : summary.runs) {
    val_acc.push_back(r.val_accuracy);
    test_acc.push_back(r.test_accuracy);
  }
  entry["val_accuracy"] = val_acc;
  entry["test_accuracy"] = test_acc;
  entry["val_mean"] = summary.val_mean;
  entry["val_std"] = summary.val_std;
  entry["test_mean"] = summary.test_mean;
  entry["test_std"] = summary.test_std;
  root[summary.augmentation] = entry;
  std::ofstream os(summary_path);
  os << root.dump(2) << "\n";
  return summary;
}

}  // namespace

ExperimentSummary run_experiment(const ExperimentConfig& cfg) {
  cfg.train.validate();
  fs::create_directories(cfg.output_dir);
  if (cfg.train.precision == Precision::f64) return run_experiment_impl<double>(cfg);
  return run_experiment_impl<float>(cfg);
}

// ---------------------------------------------------------------------------
// mask quality

namespace {

double mask_iou(const float* mask, const float* roi, Index n) {
  Index inter = 0, uni = 0;
  for (Index i = 0; i < n; ++i) {
    const bool a = mask[i] != 0.0f, b = roi[i] != 0.0f;
    inter += (a && b) ? 1 : 0;
    uni += (a || b) ? 1 : 0;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace

MaskQualityReport mask_quality(const std::string& run_dir) {
  const fs::path dir(run_dir);
  const ExperimentConfig cfg = load_config_file((dir / "config.json").string());
  const std::string ckpt = (dir / "checkpoint_final.apga").string();
  if (!fs::exists(ckpt)) throw io_error("no final checkpoint in run dir: " + run_dir);

  data::Dataset<float> dataset = build_dataset<float>(cfg.dataset);
  if (!dataset.val.has_roi)
    throw error("mask quality unsupported: dataset has no ground-truth ROI masks");

  auto records = load_records(ckpt);
  nn::PolicyModel<float> policy(0);
  for (auto& p : policy.params()) load_tensor_into(records, p.name, *p.value);

  const auto& split = dataset.val;
  const Index hw = dataset.height * dataset.width;
  MaskQualityReport rep;
  rep.keep_fraction_histogram.assign(10, 0);
  std::vector<double> ious;
  double random_acc = 0.0;
  const int random_draws = 5;

  const Index chunk = 25;
  std::vector<Index> idx;
  for (Index at = 0; at < split.size(); at += chunk) {
    const Index take = std::min(chunk, split.size() - at);
    idx.resize(static_cast<std::size_t>(take));
    for (Index i = 0; i < take; ++i) idx[static_cast<std::size_t>(i)] = at + i;
    ImageBatch<float> b = data::gather_batch(split, idx);
    const MaskBatch<float> aid = aiding_mask(policy.forward(b));
    for (Index i = 0; i < take; ++i) {
      const float* mask = aid.values.data() + i * hw;
      const float* roi = split.rois.data() + (at + i) * hw;
      const double iou = mask_iou(mask, roi, hw);
      ious.push_back(iou);
      Index kept = 0;
      for (Index p = 0; p < hw; ++p) kept += mask[p] != 0.0f ? 1 : 0;
      const double frac = static_cast<double>(kept) / static_cast<double>(hw);
      rep.mean_keep_fraction += frac;
      const int bin = std::min(9, static_cast<int>(frac * 10.0));
      rep.keep_fraction_histogram[static_cast<std::size_t>(bin)] += 1;

      // area-matched random masks
      auto eng = make_engine(cfg.train.seed, "mask-quality", static_cast<std::uint64_t>(at + i));
      std::vector<Index> perm(static_cast<std::size_t>(hw));
      std::iota(perm.begin(), perm.end(), Index(0));
      std::vector<float> rand_mask(static_cast<std::size_t>(hw));
      for (int d = 0; d < random_draws; ++d) {
        std::shuffle(perm.begin(), perm.end(), eng);
        std::fill(rand_mask.begin(), rand_mask.end(), 0.0f);
        for (Index p = 0; p < kept; ++p) rand_mask[static_cast<std::size_t>(perm[p])] = 1.0f;
        random_acc += mask_iou(rand_mask.data(), roi, hw);
      }
    }
  }
  rep.samples = static_cast<int>(ious.size());
  if (rep.samples == 0) throw error("mask quality: empty validation split");
  rep.mean_keep_fraction /= rep.samples;
  double mean = 0;
  for (double v : ious) mean += v;
  rep.mean_iou = mean / rep.samples;
  std::sort(ious.begin(), ious.end());
  rep.median_iou = ious[ious.size() / 2];
  rep.mean_random_iou = random_acc / (static_cast<double>(rep.samples) * random_draws);
  return rep;
}

std::string serialize_mask_quality(const MaskQualityReport& r) {
  json j;
  j["samples"] = r.samples;
  j["mean_iou"] = r.mean_iou;
  j["median_iou"] = r.median_iou;
  j["mean_random_iou"] = r.mean_random_iou;
  j["mean_keep_fraction"] = r.mean_keep_fraction;
  j["keep_fraction_histogram"] = r.keep_fraction_histogram;
  return j.dump(2) + "\n";
}

}  // namespace apga::harness
