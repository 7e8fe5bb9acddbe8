#pragma once

#include <cstdint>
#include <string>

#include "apga/baselines.hpp"
#include "apga/errors.hpp"

namespace apga {

enum class Precision { f32, f64 };
enum class Augmentation { apga, none, cutout, gradcam };

// The policy loss measures the distance of the probabilities either to the
// adversarial keep-mask (the published update rule) or to its complement,
// the thresholded importance action itself. The first is the default; the
// second is the classic likelihood-ratio reading, kept as a config switch
// because the two disagree only in the sign of the advantage coupling.
enum class PolicyTarget { adversarial_mask, taken_action };

struct TrainConfig {
  int steps = 500;
  int batch_size = 25;
  double lr_classifier = 1e-4;
  double lr_policy = 1e-4;
  double baseline_decay = 0.5;
  double lambda_zeros = 0.1;
  int pretrain_epochs = 5;
  std::uint64_t seed = 0;
  Precision precision = Precision::f32;
  Augmentation augmentation = Augmentation::apga;
  bool use_baseline = true;
  PolicyTarget policy_target = PolicyTarget::adversarial_mask;
  int eval_interval = 50;       // validation cadence in steps; 0 disables
  int checkpoint_interval = 0;  // 0 = final checkpoint only
  CutoutConfig cutout;
  std::string gradcam_ref_checkpoint;  // converged no-augmentation classifier

  void validate() const {
    if (steps <= 0) throw config_error("train: steps must be positive");
    if (batch_size <= 0) throw config_error("train: batch size must be positive");
    if (!(lr_classifier > 0) || !(lr_policy > 0))
      throw config_error("train: learning rates must be positive");
    if (lambda_zeros < 0) throw config_error("train: lambda_zeros must be >= 0");
    if (baseline_decay < 0 || baseline_decay >= 1)
      throw config_error("train: baseline decay must lie in [0,1)");
    if (pretrain_epochs < 0) throw config_error("train: pretrain epochs must be >= 0");
    if (eval_interval < 0 || checkpoint_interval < 0)
      throw config_error("train: intervals must be >= 0");
    if (augmentation == Augmentation::cutout) cutout.validate();
    if (augmentation == Augmentation::gradcam && gradcam_ref_checkpoint.empty())
      throw config_error("train: gradcam augmentation needs gradcam_ref_checkpoint");
  }
};

inline std::string to_string(Augmentation a) {
  switch (a) {
    case Augmentation::apga: return "apga";
    case Augmentation::none: return "none";
    case Augmentation::cutout: return "cutout";
    case Augmentation::gradcam: return "gradcam";
  }
  return "?";
}

inline Augmentation augmentation_from_string(const std::string& s) {
  if (s == "apga") return Augmentation::apga;
  if (s == "none") return Augmentation::none;
  if (s == "cutout") return Augmentation::cutout;
  if (s == "gradcam") return Augmentation::gradcam;
  throw config_error("unknown augmentation mode: " + s);
}

inline std::string to_string(Precision p) { return p == Precision::f32 ? "f32" : "f64"; }

inline Precision precision_from_string(const std::string& s) {
  if (s == "f32") return Precision::f32;
  if (s == "f64") return Precision::f64;
  throw config_error("unknown precision: " + s);
}

inline std::string to_string(PolicyTarget t) {
  return t == PolicyTarget::adversarial_mask ? "adversarial_mask" : "taken_action";
}

inline PolicyTarget policy_target_from_string(const std::string& s) {
  if (s == "adversarial_mask") return PolicyTarget::adversarial_mask;
  if (s == "taken_action") return PolicyTarget::taken_action;
  throw config_error("unknown policy target: " + s);
}

}  // namespace apga
