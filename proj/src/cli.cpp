#include "apga/harness/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "apga/data/folder.hpp"
#include "apga/harness/experiment.hpp"
#include "apga/harness/plot.hpp"
#include "apga/io/csv.hpp"
#include "apga/trainer/trainer.hpp"
#include "apga/verify/suite.hpp"

namespace apga::harness {

namespace fs = std::filesystem;

namespace {

struct TrainArgs {
  std::string config_path;
  std::string out_dir;
  std::string aug;
  std::string precision;
  std::string policy_target;
  int steps = -1;
  std::int64_t seed = -1;
  int seeds = -1;
  bool export_plots = false;
  bool export_masks = false;
};

int cmd_train(const TrainArgs& a) {
  ExperimentConfig cfg = load_config_file(a.config_path);
  if (!a.out_dir.empty()) cfg.output_dir = a.out_dir;
  if (!a.aug.empty()) cfg.train.augmentation = augmentation_from_string(a.aug);
  if (!a.precision.empty()) cfg.train.precision = precision_from_string(a.precision);
  if (!a.policy_target.empty())
    cfg.train.policy_target = policy_target_from_string(a.policy_target);
  if (a.steps > 0) cfg.train.steps = a.steps;
  if (a.seed >= 0) cfg.seeds = {static_cast<std::uint64_t>(a.seed)};
  if (a.seeds > 0) {
    cfg.seeds.clear();
    for (int s = 0; s < a.seeds; ++s) cfg.seeds.push_back(static_cast<std::uint64_t>(s));
  }
  if (a.export_plots) cfg.export_plots = true;
  if (a.export_masks) cfg.export_masks = true;

  const ExperimentSummary summary = run_experiment(cfg);
  std::cout << "augmentation " << summary.augmentation << ": val accuracy " << summary.val_mean
            << " +- " << summary.val_std << " over " << summary.runs.size() << " seed(s)\n";
  for (const auto& r : summary.runs)
    std::cout << "  seed " << r.seed << ": val " << r.val_accuracy << ", test "
              << r.test_accuracy << "  (" << r.run_dir << ")\n";
  std::cout << "summary: " << (fs::path(cfg.output_dir) / "summary.json").string() << "\n";
  return 0;
}

int cmd_generate(const data::SyntheticSpec& spec, const std::string& out) {
  spec.validate();
  const auto dataset = data::generate<float>(spec);
  data::write_dataset(dataset, out);
  // record the generation parameters next to the files
  ExperimentConfig provenance;
  provenance.dataset.type = DatasetSource::Type::synthetic;
  provenance.dataset.synthetic = spec;
  std::ofstream os(fs::path(out) / "spec.json");
  os << serialize_config(provenance);
  std::cout << "wrote " << spec.train_count + spec.val_count + spec.test_count << " samples to "
            << out << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& config_path,
             const std::string& split_name, int batch_size) {
  const ExperimentConfig cfg = load_config_file(config_path);
  data::Dataset<float> dataset;
  if (cfg.dataset.type == DatasetSource::Type::synthetic)
    dataset = data::generate<float>(cfg.dataset.synthetic);
  else {
    if (!fs::exists(cfg.dataset.folder_path))
      throw config_error("dataset path does not exist: " + cfg.dataset.folder_path);
    dataset =
        data::load_folder<float>(cfg.dataset.folder_path, cfg.dataset.height, cfg.dataset.width);
  }
  const auto model = load_classifier<float>(checkpoint);
  const data::Split<float>& split = split_name == "test"    ? dataset.test
                                    : split_name == "train" ? dataset.train
                                                            : dataset.val;
  const double acc = evaluate_accuracy(model, split, batch_size);
  std::cout << split_name << " accuracy: " << io::format_double(acc) << "\n";
  return 0;
}

int cmd_mask_quality(const std::string& run_dir, const std::string& out_file) {
  const MaskQualityReport rep = mask_quality(run_dir);
  const std::string text = serialize_mask_quality(rep);
  const std::string out = out_file.empty() ? (fs::path(run_dir) / "mask_quality.json").string()
                                           : out_file;
  std::ofstream os(out);
  os << text;
  std::cout << "samples: " << rep.samples << "\nmean IoU: " << rep.mean_iou
            << "\nmedian IoU: " << rep.median_iou
            << "\narea-matched random IoU: " << rep.mean_random_iou
            << "\nmean keep fraction: " << rep.mean_keep_fraction << "\nreport: " << out << "\n";
  return 0;
}

int cmd_verify(const std::string& out_file, int instances, std::size_t samples) {
  auto results = verify::run_verification_suite(instances, samples);
  const auto var = verify::estimator_variance_report();
  bool all_pass = true;
  std::string json = "{\n  \"checks\": [\n";
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    all_pass = all_pass && r.pass;
    std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << r.name << " -- " << r.detail << "\n";
    json += "    {\"name\": \"" + r.name + "\", \"pass\": " + (r.pass ? "true" : "false") +
            ", \"detail\": \"" + r.detail + "\"}";
    json += (i + 1 < results.size()) ? ",\n" : "\n";
  }
  json += "  ],\n";
  std::cout << "[INFO] estimator variance per coordinate (" << var.repetitions << " x "
            << var.samples_per_estimate << " samples): with baseline "
            << var.variance_with_baseline << ", without " << var.variance_without_baseline
            << "\n";
  json += "  \"estimator_variance\": {\"with_baseline\": " +
          io::format_double(var.variance_with_baseline) +
          ", \"without_baseline\": " + io::format_double(var.variance_without_baseline) +
          ", \"repetitions\": " + std::to_string(var.repetitions) +
          ", \"samples_per_estimate\": " + std::to_string(var.samples_per_estimate) + "},\n";
  json += std::string("  \"pass\": ") + (all_pass ? "true" : "false") + "\n}\n";
  if (!out_file.empty()) {
    std::ofstream os(out_file);
    os << json;
  }
  std::cout << (all_pass ? "verification suite passed\n" : "verification suite FAILED\n");
  return all_pass ? 0 : 1;
}

int cmd_plot(const std::string& run_dir, bool gallery) {
  for (const auto& f : plot_run(run_dir)) std::cout << "wrote " << f << "\n";
  if (gallery) std::cout << "wrote " << export_mask_gallery(run_dir) << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"adversarial policy-gradient augmentation trainer"};
  app.require_subcommand(1);

  // train
  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "run training for one or more seeds");
  train->add_option("--config", train_args.config_path, "experiment config JSON")
      ->required();
  train->add_option("--out", train_args.out_dir, "output directory override");
  train->add_option("--aug", train_args.aug, "augmentation mode: apga|none|cutout|gradcam");
  train->add_option("--precision", train_args.precision, "f32|f64");
  train->add_option("--policy-target", train_args.policy_target,
                    "adversarial_mask|taken_action");
  train->add_option("--steps", train_args.steps, "step count override");
  train->add_option("--seed", train_args.seed, "single seed override");
  train->add_option("--seeds", train_args.seeds, "run seeds 0..N-1");
  train->add_flag("--plots", train_args.export_plots, "emit charts per run");
  train->add_flag("--masks", train_args.export_masks, "emit mask gallery per run");

  // generate-data
  data::SyntheticSpec spec;
  std::string gen_out;
  Index gen_size = 32;
  auto* gen = app.add_subcommand("generate-data", "write a synthetic ROI dataset folder");
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--seed", spec.seed, "generation seed");
  gen->add_option("--size", gen_size, "image side length");
  gen->add_option("--train", spec.train_count, "training samples");
  gen->add_option("--val", spec.val_count, "validation samples");
  gen->add_option("--test", spec.test_count, "test samples");
  gen->add_option("--noise", spec.noise_sigma, "gaussian noise sigma");
  gen->add_option("--distractors", spec.distractor_count, "distractor patches per image");

  // eval
  std::string eval_ckpt, eval_cfg, eval_split = "val";
  int eval_batch = 25;
  auto* eval = app.add_subcommand("eval", "accuracy of a checkpoint on a split");
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval->add_option("--config", eval_cfg, "experiment config JSON")->required();
  eval->add_option("--split", eval_split, "train|val|test");
  eval->add_option("--batch", eval_batch, "evaluation batch size");

  // mask-quality
  std::string mq_run, mq_out;
  auto* mq = app.add_subcommand("mask-quality", "aiding-mask IoU against ground-truth ROIs");
  mq->add_option("--run", mq_run, "run directory (config.json + final checkpoint)")->required();
  mq->add_option("--out", mq_out, "report file (default <run>/mask_quality.json)");

  // verify
  std::string verify_out;
  int verify_instances = 20;
  std::size_t verify_samples = 100000;
  auto* ver = app.add_subcommand("verify", "estimator and gradient verification suite");
  ver->add_option("--out", verify_out, "JSON report path");
  ver->add_option("--instances", verify_instances, "enumerable instances to test");
  ver->add_option("--samples", verify_samples, "estimator samples per instance");

  // plot
  std::string plot_dir;
  bool plot_gallery = false;
  auto* plot = app.add_subcommand("plot", "charts (and optional mask gallery) for a run");
  plot->add_option("--run", plot_dir, "run directory")->required();
  plot->add_flag("--masks", plot_gallery, "also render the mask gallery PNG");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage problems exit 2, --help exits 0
  }

  try {
    if (train->parsed()) return cmd_train(train_args);
    if (gen->parsed()) {
      spec.height = gen_size;
      spec.width = gen_size;
      return cmd_generate(spec, gen_out);
    }
    if (eval->parsed()) return cmd_eval(eval_ckpt, eval_cfg, eval_split, eval_batch);
    if (mq->parsed()) return cmd_mask_quality(mq_run, mq_out);
    if (ver->parsed()) return cmd_verify(verify_out, verify_instances, verify_samples);
    if (plot->parsed()) return cmd_plot(plot_dir, plot_gallery);
  } catch (const config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace apga::harness
