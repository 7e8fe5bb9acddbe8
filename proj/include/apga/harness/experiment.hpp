#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "apga/data/synthetic.hpp"
#include "apga/trainer/config.hpp"

namespace apga::harness {

struct DatasetSource {
  enum class Type { synthetic, folder };
  Type type = Type::synthetic;
  data::SyntheticSpec synthetic;
  std::string folder_path;
  Index height = 32;  // folder ingestion target size
  Index width = 32;

  bool operator==(const DatasetSource&) const = default;
};

/// Everything needed to reproduce a run: the dataset recipe, the training
/// configuration and the seed list. config.json written into a run directory
/// is exactly this structure.
struct ExperimentConfig {
  int version = 1;
  DatasetSource dataset;
  TrainConfig train;
  std::string output_dir = "runs/out";
  bool export_masks = false;
  bool export_plots = false;
  std::vector<std::uint64_t> seeds = {0};

  bool operator==(const ExperimentConfig&) const = default;
};

std::string serialize_config(const ExperimentConfig& cfg);
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config_file(const std::string& path);
void save_config_file(const ExperimentConfig& cfg, const std::string& path);

struct SeedOutcome {
  std::uint64_t seed = 0;
  double val_accuracy = 0;
  double test_accuracy = 0;
  std::string run_dir;
};

struct ExperimentSummary {
  std::string augmentation;
  std::vector<SeedOutcome> runs;
  double val_mean = 0, val_std = 0;
  double test_mean = 0, test_std = 0;
};

/// Runs one seed per worker (capped by APGA_THREADS) and merges the result
/// into <output_dir>/summary.json keyed by augmentation mode.
ExperimentSummary run_experiment(const ExperimentConfig& cfg);

/// Sample mean and standard deviation (n-1 denominator; 0 for n < 2).
void mean_std(const std::vector<double>& xs, double& mean, double& sd);

struct MaskQualityReport {
  double mean_iou = 0;
  double median_iou = 0;
  double mean_random_iou = 0;  // area-matched random masks
  double mean_keep_fraction = 0;
  std::vector<int> keep_fraction_histogram;  // 10 bins over [0,1]
  int samples = 0;
};

/// Aiding-mask quality against ground-truth ROIs on the validation split of
/// the run's dataset. Requires a dataset that carries ROI masks.
MaskQualityReport mask_quality(const std::string& run_dir);
std::string serialize_mask_quality(const MaskQualityReport& r);

// Recomputed statistics for summary verification.
struct SummaryStats {
  std::vector<double> val_accuracies;
  double mean = 0, sd = 0;
};

int max_worker_threads();

}  // namespace apga::harness
