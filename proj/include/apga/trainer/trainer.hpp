#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "apga/checkpoint.hpp"
#include "apga/data/dataset.hpp"
#include "apga/io/csv.hpp"
#include "apga/masking.hpp"
#include "apga/nn/adam.hpp"
#include "apga/nn/classifier.hpp"
#include "apga/nn/policy.hpp"
#include "apga/objective.hpp"
#include "apga/trainer/config.hpp"

// The joint training loop. One step performs, in order:
//   (a) classifier update on the original batch,
//   (b) adversarial masking and reward from the updated classifier,
//   (c) policy update from the reward-weighted BCE loss,
//   (d) classifier update on the aiding-masked batch (fresh policy forward).
// Two classifier updates and one policy update per step; masked and original
// images thus train the classifier in a 1:1 ratio.

namespace apga {

template <typename Scalar>
struct TrainState {
  nn::ClassifierModel<Scalar> classifier;
  nn::PolicyModel<Scalar> policy;
  nn::AdamState<Scalar> adam_c, adam_p;
  RewardBaseline baseline;
  std::uint64_t step = 0;
  data::BatchCursor cursor;
  bool pretrained = false;
};

struct StepMetrics {
  std::uint64_t step = 0;
  double l_original = std::numeric_limits<double>::quiet_NaN();
  double l_adversarial = std::numeric_limits<double>::quiet_NaN();
  double reward = std::numeric_limits<double>::quiet_NaN();
  double baseline = std::numeric_limits<double>::quiet_NaN();
  double mean_policy_prob = std::numeric_limits<double>::quiet_NaN();
  double aid_keep_fraction = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> val_accuracy;
};

// Sub-update boundaries of one step, for cadence assertions.
struct StepInstrumentation {
  std::uint64_t classifier_before = 0;
  std::uint64_t classifier_after_original = 0;
  std::uint64_t classifier_after_policy_update = 0;
  std::uint64_t classifier_after_aid = 0;
  std::uint64_t policy_before = 0;
  std::uint64_t policy_after_classifier_updates = 0;
  std::uint64_t policy_after_update = 0;
  int classifier_updates = 0;
  int policy_updates = 0;
};

template <typename Scalar>
TrainState<Scalar> init_state(const TrainConfig& cfg, int num_classes) {
  TrainState<Scalar> s;
  s.classifier = nn::ClassifierModel<Scalar>(num_classes, cfg.seed);
  s.policy = nn::PolicyModel<Scalar>(cfg.seed);
  nn::AdamHyper hc, hp;
  hc.lr = cfg.lr_classifier;
  hp.lr = cfg.lr_policy;
  s.adam_c = nn::AdamState<Scalar>::init(s.classifier.params(), hc);
  s.adam_p = nn::AdamState<Scalar>::init(s.policy.params(), hp);
  s.baseline.decay = cfg.baseline_decay;
  return s;
}

// ---------------------------------------------------------------------------
// checkpointing

template <typename Scalar>
std::vector<TensorRecord> state_records(const TrainState<Scalar>& s, int num_classes) {
  std::vector<TensorRecord> r;
  r.push_back(record_u64("meta/num_classes", {static_cast<std::uint64_t>(num_classes)}));
  r.push_back(record_u64("meta/precision",
                         {std::is_same_v<Scalar, float> ? std::uint64_t(0) : std::uint64_t(1)}));
  r.push_back(record_u64("trainer/step", {s.step}));
  r.push_back(record_u64("trainer/cursor", {s.cursor.epoch, s.cursor.pos}));
  r.push_back(record_u64("trainer/pretrained", {s.pretrained ? std::uint64_t(1) : 0}));
  r.push_back(record_f64("baseline/value", s.baseline.value));
  r.push_back(record_u64("baseline/initialized", {s.baseline.initialized ? std::uint64_t(1) : 0}));
  r.push_back(record_u64("adam_c/step", {s.adam_c.step}));
  r.push_back(record_u64("adam_p/step", {s.adam_p.step}));
  for (const auto& p : s.classifier.params()) r.push_back(record_from_tensor(p.name, *p.value));
  for (const auto& p : s.policy.params()) r.push_back(record_from_tensor(p.name, *p.value));
  for (std::size_t i = 0; i < s.adam_c.names.size(); ++i) {
    r.push_back(record_from_tensor("adam_c/m/" + s.adam_c.names[i], s.adam_c.m[i]));
    r.push_back(record_from_tensor("adam_c/v/" + s.adam_c.names[i], s.adam_c.v[i]));
  }
  for (std::size_t i = 0; i < s.adam_p.names.size(); ++i) {
    r.push_back(record_from_tensor("adam_p/m/" + s.adam_p.names[i], s.adam_p.m[i]));
    r.push_back(record_from_tensor("adam_p/v/" + s.adam_p.names[i], s.adam_p.v[i]));
  }
  return r;
}

template <typename Scalar>
void save_state(const TrainState<Scalar>& s, int num_classes, const std::string& path) {
  save_records(path, state_records(s, num_classes));
}

template <typename Scalar>
void load_tensor_into(const std::vector<TensorRecord>& records, const std::string& name,
                      Tensor<Scalar>& dst) {
  Tensor<Scalar> t = tensor_from_record<Scalar>(find_record(records, name));
  if (t.shape() != dst.shape())
    throw io_error("checkpoint tensor " + name + " has shape " + shape_str(t.shape()) +
                   ", expected " + shape_str(dst.shape()));
  dst = std::move(t);
}

template <typename Scalar>
TrainState<Scalar> load_state(const TrainConfig& cfg, int num_classes, const std::string& path) {
  auto records = load_records(path);
  const auto n_cls = u64_from_record(find_record(records, "meta/num_classes"))[0];
  if (static_cast<int>(n_cls) != num_classes)
    throw io_error("checkpoint was trained with " + std::to_string(n_cls) + " classes");
  TrainState<Scalar> s = init_state<Scalar>(cfg, num_classes);
  s.step = u64_from_record(find_record(records, "trainer/step"))[0];
  const auto cursor = u64_from_record(find_record(records, "trainer/cursor"));
  s.cursor.epoch = cursor[0];
  s.cursor.pos = cursor[1];
  s.pretrained = u64_from_record(find_record(records, "trainer/pretrained"))[0] != 0;
  s.baseline.value = f64_from_record(find_record(records, "baseline/value"));
  s.baseline.initialized =
      u64_from_record(find_record(records, "baseline/initialized"))[0] != 0;
  s.adam_c.step = u64_from_record(find_record(records, "adam_c/step"))[0];
  s.adam_p.step = u64_from_record(find_record(records, "adam_p/step"))[0];
  for (auto& p : s.classifier.params()) load_tensor_into(records, p.name, *p.value);
  for (auto& p : s.policy.params()) load_tensor_into(records, p.name, *p.value);
  for (std::size_t i = 0; i < s.adam_c.names.size(); ++i) {
    load_tensor_into(records, "adam_c/m/" + s.adam_c.names[i], s.adam_c.m[i]);
    load_tensor_into(records, "adam_c/v/" + s.adam_c.names[i], s.adam_c.v[i]);
  }
  for (std::size_t i = 0; i < s.adam_p.names.size(); ++i) {
    load_tensor_into(records, "adam_p/m/" + s.adam_p.names[i], s.adam_p.m[i]);
    load_tensor_into(records, "adam_p/v/" + s.adam_p.names[i], s.adam_p.v[i]);
  }
  return s;
}

/// Loads just the classifier parameters from any checkpoint (used for the
/// saliency-mask reference model).
template <typename Scalar>
nn::ClassifierModel<Scalar> load_classifier(const std::string& path) {
  auto records = load_records(path);
  const auto n_cls = u64_from_record(find_record(records, "meta/num_classes"))[0];
  nn::ClassifierModel<Scalar> m(static_cast<int>(n_cls), 0);
  for (auto& p : m.params()) load_tensor_into(records, p.name, *p.value);
  return m;
}

// ---------------------------------------------------------------------------
// evaluation

/// Accuracy by argmax over logits, ties broken toward the lower class index.
template <typename Scalar>
double evaluate_accuracy(const nn::ClassifierModel<Scalar>& model,
                         const data::Split<Scalar>& split, Index batch_size) {
  const Index n = split.size();
  if (n == 0) throw error("evaluate_accuracy: empty split");
  Index correct = 0;
  std::vector<Index> idx;
  for (Index at = 0; at < n; at += batch_size) {
    const Index take = std::min(batch_size, n - at);
    idx.resize(static_cast<std::size_t>(take));
    for (Index i = 0; i < take; ++i) idx[static_cast<std::size_t>(i)] = at + i;
    ImageBatch<Scalar> b = gather_batch(split, idx);
    const Tensor<Scalar> logits = model.forward(b);
    const Index k = logits.dim(1);
    for (Index i = 0; i < take; ++i) {
      Index best = 0;
      for (Index j = 1; j < k; ++j)
        if (logits[i * k + j] > logits[i * k + best]) best = j;
      if (static_cast<int>(best) == b.labels[static_cast<std::size_t>(i)]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// updates

namespace detail {

// Cross-entropy update of the classifier on one batch; returns the loss.
template <typename Scalar>
Scalar classifier_update(TrainState<Scalar>& state, const ImageBatch<Scalar>& batch) {
  nn::ClassifierTrace<Scalar> tr;
  const Tensor<Scalar> logits = state.classifier.forward(batch, tr);
  const Scalar loss = class_loss<Scalar>(logits, batch.labels);
  if (!std::isfinite(static_cast<double>(loss)))
    throw numeric_error("non-finite classification loss");
  const Tensor<Scalar> dlogits = class_loss_grad<Scalar>(logits, batch.labels);
  auto grads = state.classifier.backward(tr, dlogits);
  auto params = state.classifier.params();
  nn::adam_step(params, grads, state.adam_c);
  return loss;
}

}  // namespace detail

/// Trains the classifier alone for `epochs` passes over the training split
/// (the "to convergence" phase). Returns the mean loss per epoch. The policy
/// is untouched; the data cursor advances one epoch per pass.
template <typename Scalar>
std::vector<double> pretrain_classifier(TrainState<Scalar>& state,
                                        const data::Split<Scalar>& train, int epochs,
                                        const TrainConfig& cfg) {
  if (train.size() == 0) throw error("pretrain: empty training split");
  std::vector<double> epoch_losses;
  for (int e = 0; e < epochs; ++e) {
    const auto plan = data::epoch_batches(train.size(), cfg.batch_size, cfg.seed,
                                          state.cursor.epoch);
    double acc = 0.0;
    for (const auto& idx : plan) {
      ImageBatch<Scalar> b = data::gather_batch(train, idx);
      acc += static_cast<double>(detail::classifier_update(state, b)) *
             static_cast<double>(idx.size());
    }
    epoch_losses.push_back(acc / static_cast<double>(train.size()));
    state.cursor.epoch += 1;
    state.cursor.pos = 0;
  }
  state.pretrained = true;
  return epoch_losses;
}

/// One joint step (the apga augmentation mode).
template <typename Scalar>
StepMetrics apga_step(TrainState<Scalar>& state, const ImageBatch<Scalar>& batch,
                      const TrainConfig& cfg, StepInstrumentation* instr = nullptr) {
  StepMetrics m;
  auto c_params = state.classifier.params();
  auto p_params = state.policy.params();
  if (instr) {
    instr->classifier_before = nn::param_hash(c_params);
    instr->policy_before = nn::param_hash(p_params);
  }

  // (a) classifier update on originals
  const Scalar l_original = detail::classifier_update(state, batch);
  if (instr) {
    instr->classifier_after_original = nn::param_hash(c_params);
    instr->classifier_updates += 1;
  }

  // (b) adversarial masking and reward; the classifier is treated as fixed
  // here, no gradient reaches it from the reward path
  nn::PolicyTrace<Scalar> ptr;
  const Tensor<Scalar> probs = state.policy.forward(batch, ptr);
  const MaskBatch<Scalar> adv = adversarial_mask(probs);
  const ImageBatch<Scalar> masked = apply_mask(batch, adv);
  const Scalar l_adversarial =
      class_loss<Scalar>(state.classifier.forward(masked), masked.labels);
  if (!std::isfinite(static_cast<double>(l_adversarial)))
    throw numeric_error("non-finite adversarial loss");
  const Scalar reward = adversarial_reward(l_adversarial, l_original);

  // baseline: the advantage uses the pre-update average (first step: the
  // freshly seeded value, i.e. zero advantage)
  double baseline_for_step = state.baseline.initialized
                                 ? state.baseline.value
                                 : static_cast<double>(reward);
  if (!cfg.use_baseline) baseline_for_step = 0.0;
  state.baseline.observe(static_cast<double>(reward));

  // (c) policy update
  MaskBatch<Scalar> target = adv;
  if (cfg.policy_target == PolicyTarget::taken_action)
    target.values.assign(adv.values.shape(), Scalar(1) - adv.values.array());
  const auto terms = policy_loss(probs, target, reward,
                                 static_cast<Scalar>(baseline_for_step),
                                 static_cast<Scalar>(cfg.lambda_zeros));
  if (!std::isfinite(static_cast<double>(terms.total)))
    throw numeric_error("non-finite policy loss");
  const Tensor<Scalar> dprobs =
      policy_loss_grad(probs, target,
                       static_cast<Scalar>(static_cast<double>(reward) - baseline_for_step),
                       static_cast<Scalar>(cfg.lambda_zeros));
  auto p_grads = state.policy.backward(ptr, dprobs);
  if (instr) instr->classifier_after_policy_update = nn::param_hash(c_params);
  nn::adam_step(p_params, p_grads, state.adam_p);
  if (instr) {
    instr->policy_after_update = nn::param_hash(p_params);
    instr->policy_updates += 1;
  }

  // (d) aiding update: fresh forward through the just-updated policy
  const MaskBatch<Scalar> aid = aiding_mask(state.policy.forward(batch));
  const ImageBatch<Scalar> aided = apply_mask(batch, aid);
  const Scalar l_aid = detail::classifier_update(state, aided);
  (void)l_aid;
  if (instr) {
    instr->classifier_after_aid = nn::param_hash(c_params);
    instr->classifier_updates += 1;
    instr->policy_after_classifier_updates = nn::param_hash(p_params);
  }

  state.step += 1;
  m.step = state.step;
  m.l_original = static_cast<double>(l_original);
  m.l_adversarial = static_cast<double>(l_adversarial);
  m.reward = static_cast<double>(reward);
  m.baseline = state.baseline.value;
  m.mean_policy_prob = mean_value(probs);
  m.aid_keep_fraction = mean_value(aid.values);
  return m;
}

/// One step of a non-policy augmentation mode: a classifier update on the
/// originals plus, for cutout/gradcam, a second update on the masked batch
/// (keeping the 1:1 augmentation ratio).
template <typename Scalar>
StepMetrics baseline_step(TrainState<Scalar>& state, const ImageBatch<Scalar>& batch,
                          const TrainConfig& cfg,
                          const nn::ClassifierModel<Scalar>* gradcam_ref) {
  StepMetrics m;
  m.l_original = static_cast<double>(detail::classifier_update(state, batch));
  if (cfg.augmentation == Augmentation::cutout) {
    auto eng = make_engine(cfg.seed, "cutout", state.step);
    detail::classifier_update(state, cutout(batch, cfg.cutout, eng));
  } else if (cfg.augmentation == Augmentation::gradcam) {
    if (!gradcam_ref) throw usage_error("gradcam step without a reference classifier");
    const MaskBatch<Scalar> mask = gradcam_mask(*gradcam_ref, batch);
    detail::classifier_update(state, apply_mask(batch, mask));
  }
  state.step += 1;
  m.step = state.step;
  return m;
}

// ---------------------------------------------------------------------------
// run loop

struct RunResult {
  double final_val_accuracy = std::numeric_limits<double>::quiet_NaN();
  double test_accuracy = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> pretrain_losses;
  std::string metrics_path;
  std::string checkpoint_path;
};

inline std::string metrics_header() {
  return "step,L_original,L_adversarial,R_t,b_t,mean_policy_prob,aid_keep_fraction,val_accuracy";
}

inline std::string metrics_row(const StepMetrics& m) {
  auto cell = [](double v) { return std::isnan(v) ? std::string() : io::format_double(v); };
  std::string row = std::to_string(m.step);
  row += ',' + cell(m.l_original);
  row += ',' + cell(m.l_adversarial);
  row += ',' + cell(m.reward);
  row += ',' + cell(m.baseline);
  row += ',' + cell(m.mean_policy_prob);
  row += ',' + cell(m.aid_keep_fraction);
  row += ',';
  if (m.val_accuracy) row += io::format_double(*m.val_accuracy);
  return row;
}

/// Full run: pretraining (unless resumed past it), then `cfg.steps` joint or
/// baseline steps with metrics, periodic validation and checkpoints. Passing
/// `stop_after_step` ends the run early with a checkpoint, for later resume.
template <typename Scalar>
RunResult run(const TrainConfig& cfg, const data::Dataset<Scalar>& dataset,
              const std::string& out_dir, const std::string& resume_path = "",
              std::uint64_t stop_after_step = 0) {
  cfg.validate();
  if (dataset.train.size() == 0) throw error("run: empty training split");
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  TrainState<Scalar> state = resume_path.empty()
                                 ? init_state<Scalar>(cfg, dataset.classes)
                                 : load_state<Scalar>(cfg, dataset.classes, resume_path);

  RunResult result;
  if (!state.pretrained) {
    result.pretrain_losses = pretrain_classifier(state, dataset.train, cfg.pretrain_epochs, cfg);
    std::ofstream pre(fs::path(out_dir) / "pretrain.csv");
    pre << "epoch,mean_loss\n";
    for (std::size_t e = 0; e < result.pretrain_losses.size(); ++e)
      pre << e + 1 << ',' << io::format_double(result.pretrain_losses[e]) << '\n';
  }

  nn::ClassifierModel<Scalar> gradcam_ref;
  const bool use_gradcam = cfg.augmentation == Augmentation::gradcam;
  if (use_gradcam) gradcam_ref = load_classifier<Scalar>(cfg.gradcam_ref_checkpoint);

  const fs::path metrics_path = fs::path(out_dir) / "metrics.csv";
  std::ofstream metrics(metrics_path);
  if (!metrics) throw io_error("cannot write metrics file: " + metrics_path.string());
  metrics << metrics_header() << '\n';

  const auto checkpoint_name = [&](const std::string& tag) {
    return (fs::path(out_dir) / ("checkpoint_" + tag + ".apga")).string();
  };

  const std::uint64_t total = static_cast<std::uint64_t>(cfg.steps);
  while (state.step < total) {
    ImageBatch<Scalar> batch =
        data::next_batch(dataset.train, cfg.batch_size, cfg.seed, state.cursor);
    StepMetrics m;
    try {
      m = cfg.augmentation == Augmentation::apga
              ? apga_step(state, batch, cfg)
              : baseline_step(state, batch, cfg, use_gradcam ? &gradcam_ref : nullptr);
    } catch (const numeric_error&) {
      save_state(state, dataset.classes, checkpoint_name("diagnostic_step_" +
                                                         std::to_string(state.step)));
      throw;
    }
    const bool eval_now =
        (cfg.eval_interval > 0 && m.step % static_cast<std::uint64_t>(cfg.eval_interval) == 0) ||
        m.step == total;
    if (eval_now && dataset.val.size() > 0)
      m.val_accuracy = evaluate_accuracy(state.classifier, dataset.val, cfg.batch_size);
    metrics << metrics_row(m) << '\n';
    if (cfg.checkpoint_interval > 0 &&
        m.step % static_cast<std::uint64_t>(cfg.checkpoint_interval) == 0)
      save_state(state, dataset.classes, checkpoint_name("step_" + std::to_string(m.step)));
    if (m.val_accuracy) result.final_val_accuracy = *m.val_accuracy;
    if (stop_after_step > 0 && m.step >= stop_after_step && m.step < total) {
      save_state(state, dataset.classes, checkpoint_name("step_" + std::to_string(m.step)));
      result.metrics_path = metrics_path.string();
      result.checkpoint_path = checkpoint_name("step_" + std::to_string(m.step));
      return result;
    }
  }
  metrics.close();

  if (dataset.test.size() > 0)
    result.test_accuracy = evaluate_accuracy(state.classifier, dataset.test, cfg.batch_size);
  result.checkpoint_path = checkpoint_name("final");
  save_state(state, dataset.classes, result.checkpoint_path);
  result.metrics_path = metrics_path.string();
  return result;
}

}  // namespace apga
