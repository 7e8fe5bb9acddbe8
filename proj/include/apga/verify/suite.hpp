#pragma once

#include <random>
#include <string>
#include <vector>

#include "apga/nn/classifier.hpp"
#include "apga/nn/policy.hpp"
#include "apga/objective.hpp"
#include "apga/verify/verify.hpp"

// Canned verification checks shared by the `verify` CLI subcommand and the
// acceptance suite. All numerics run in fp64.

namespace apga::verify {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Random enumerable instance: strictly convex quadratic loss over n pixels,
/// probabilities kept away from 0/1 so likelihood-ratio scores stay bounded.
inline TinyInstance random_instance(int n, std::mt19937_64& eng) {
  std::uniform_real_distribution<double> xe(0.6, 1.4), pe(0.25, 0.75), ce(0.5, 1.5),
      de(-0.5, 0.5);
  TinyInstance inst;
  inst.pixels = Vector(n);
  inst.probs = Vector(n);
  Vector c(n), d(n);
  for (int i = 0; i < n; ++i) {
    inst.pixels[i] = xe(eng);
    inst.probs[i] = pe(eng);
    c[i] = ce(eng);
    d[i] = de(eng);
  }
  inst.loss = [c, d](const Vector& v) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i)
      acc += c[i] * (v[i] - d[i]) * (v[i] - d[i]);
    return acc;
  };
  return inst;
}

/// Estimator-vs-enumeration on `instances` random instances; each estimate
/// must land within `tol` relative L2 error of the exact gradient.
inline CheckResult estimator_check(int instances, int pixels, std::size_t samples, double tol,
                                   std::uint64_t seed = 7) {
  CheckResult r;
  r.name = "reinforce estimator vs enumeration (n=" + std::to_string(pixels) + ", " +
           std::to_string(samples) + " samples, " + std::to_string(instances) + " instances)";
  auto eng = make_engine(seed, "estimator-instances");
  double worst = 0.0;
  for (int k = 0; k < instances; ++k) {
    TinyInstance inst = random_instance(pixels, eng);
    const Vector exact = exact_policy_gradient(inst);
    auto sample_eng = make_engine(seed, "estimator-samples", static_cast<std::uint64_t>(k));
    const Vector est = reinforce_estimate(inst, samples, sample_eng, /*use_baseline=*/false);
    const double rel = (est - exact).norm() / std::max(exact.norm(), 1e-12);
    worst = std::max(worst, rel);
  }
  r.pass = worst < tol;
  r.detail = "worst relative L2 error " + std::to_string(worst) + " (tolerance " +
             std::to_string(tol) + ")";
  return r;
}

inline CheckResult enumeration_identity_check(std::uint64_t seed = 11) {
  CheckResult r;
  r.name = "action probabilities sum to 1 over the action space";
  auto eng = make_engine(seed, "enumeration-identity");
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    TinyInstance inst = random_instance(8, eng);
    worst = std::max(worst, std::abs(total_action_probability(inst) - 1.0));
  }
  r.pass = worst < 1e-12;
  r.detail = "worst |sum-1| = " + std::to_string(worst);
  return r;
}

struct VarianceReport {
  double variance_with_baseline = 0;
  double variance_without_baseline = 0;
  int repetitions = 0;
  std::size_t samples_per_estimate = 0;
};

/// Empirical per-coordinate estimator variance (averaged over coordinates)
/// at equal sample count, with and without the EMA baseline. Reported, not
/// ordered: the artifact is the measurement.
inline VarianceReport estimator_variance_report(int pixels = 6, int repetitions = 30,
                                                std::size_t samples = 2000,
                                                std::uint64_t seed = 13) {
  auto eng = make_engine(seed, "variance-instance");
  TinyInstance inst = random_instance(pixels, eng);
  VarianceReport rep;
  rep.repetitions = repetitions;
  rep.samples_per_estimate = samples;
  for (int mode = 0; mode < 2; ++mode) {
    const bool use_baseline = mode == 0;
    std::vector<Vector> estimates;
    for (int k = 0; k < repetitions; ++k) {
      auto se = make_engine(seed, use_baseline ? "var-b" : "var-nb",
                            static_cast<std::uint64_t>(k));
      estimates.push_back(reinforce_estimate(inst, samples, se, use_baseline));
    }
    Vector mean = Vector::Zero(pixels);
    for (const auto& e : estimates) mean += e;
    mean /= static_cast<double>(repetitions);
    double var = 0.0;
    for (const auto& e : estimates) var += (e - mean).squaredNorm();
    var /= static_cast<double>((repetitions - 1) * pixels);
    (use_baseline ? rep.variance_with_baseline : rep.variance_without_baseline) = var;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// finite-difference checks over the loss pipeline and reference networks

template <typename Fn>
CheckResult fd_scalar_check(const std::string& name, Tensor<double>& x,
                            const Tensor<double>& analytic, Fn&& f, double tol,
                            double h = 1e-6) {
  CheckResult r;
  r.name = name;
  std::function<double()> probe = [&]() { return f(); };
  const FdReport rep = fd_check(probe, std::span<double>(x.data(), static_cast<std::size_t>(x.size())),
                                std::span<const double>(analytic.data(),
                                                        static_cast<std::size_t>(analytic.size())),
                                h);
  r.pass = rep.max_rel_err < tol;
  r.detail = "max relative error " + std::to_string(rep.max_rel_err) + " at index " +
             std::to_string(rep.where) + " (tolerance " + std::to_string(tol) + ")";
  return r;
}

inline CheckResult fd_check_bce(double tol = 1e-6, std::uint64_t seed = 17) {
  auto eng = make_engine(seed, "fd-bce");
  std::uniform_real_distribution<double> pe(0.05, 0.95);
  std::uniform_int_distribution<int> ye(0, 1);
  Tensor<double> pred({40});
  Tensor<double> target({40});
  for (Index i = 0; i < pred.size(); ++i) {
    pred[i] = pe(eng);
    target[i] = ye(eng);
  }
  const Tensor<double> g = bce_grad(pred, target);
  return fd_scalar_check("finite differences: bce", pred, g,
                         [&]() { return bce(pred, target); }, tol);
}

inline CheckResult fd_check_class_loss(double tol = 1e-6, std::uint64_t seed = 19) {
  auto eng = make_engine(seed, "fd-class-loss");
  std::uniform_real_distribution<double> le(-2.0, 2.0);
  Tensor<double> logits({6, 3});
  std::vector<int> labels = {0, 2, 1, 1, 0, 2};
  for (Index i = 0; i < logits.size(); ++i) logits[i] = le(eng);
  const Tensor<double> g = class_loss_grad<double>(logits, labels);
  return fd_scalar_check("finite differences: class_loss", logits, g,
                         [&]() { return class_loss<double>(logits, labels); }, tol);
}

/// Full policy-loss pipeline w.r.t. the probabilities, with the adversarial
/// mask held fixed (the mask is a constant of the step; gradient flows only
/// through P).
inline CheckResult fd_check_policy_loss(double tol = 1e-6, std::uint64_t seed = 23) {
  auto eng = make_engine(seed, "fd-policy-loss");
  std::uniform_real_distribution<double> pe(0.05, 0.95);
  Tensor<double> probs({2, 1, 4, 4});
  for (Index i = 0; i < probs.size(); ++i) probs[i] = pe(eng);
  const MaskBatch<double> adv = adversarial_mask(probs);
  const double reward = 0.7, baseline = 0.2, lambda = 0.1;
  const Tensor<double> g =
      policy_loss_grad(probs, adv, reward - baseline, lambda);
  return fd_scalar_check(
      "finite differences: policy_loss pipeline", probs, g,
      [&]() { return policy_loss(probs, adv, reward, baseline, lambda).total; }, tol);
}

template <typename Model, typename LossFn, typename GradFn>
CheckResult fd_check_model(const std::string& name, Model& model, LossFn&& loss,
                           GradFn&& analytic_grads, double tol, double h = 1e-6) {
  CheckResult r;
  r.name = name;
  const nn::GradSet<double> grads = analytic_grads();
  auto params = model.params();
  double worst = 0.0;
  std::string where = "-";
  std::function<double()> probe = [&]() { return loss(); };
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<double>& p = *params[i].value;
    const FdReport rep =
        fd_check(probe, std::span<double>(p.data(), static_cast<std::size_t>(p.size())),
                 std::span<const double>(grads[i].data(),
                                         static_cast<std::size_t>(grads[i].size())),
                 h);
    if (rep.max_rel_err > worst) {
      worst = rep.max_rel_err;
      where = params[i].name + "[" + std::to_string(rep.where) + "]";
    }
  }
  r.pass = worst < tol;
  r.detail = "max relative error " + std::to_string(worst) + " at " + where + " (tolerance " +
             std::to_string(tol) + ")";
  return r;
}

inline ImageBatch<double> small_random_batch(Index bn, Index hw_side, int classes,
                                             std::uint64_t seed) {
  auto eng = make_engine(seed, "fd-batch");
  std::uniform_real_distribution<double> pe(0.0, 1.0);
  ImageBatch<double> b;
  b.images = Tensor<double>({bn, 1, hw_side, hw_side});
  for (Index i = 0; i < b.images.size(); ++i) b.images[i] = pe(eng);
  b.labels.resize(static_cast<std::size_t>(bn));
  for (Index i = 0; i < bn; ++i) b.labels[static_cast<std::size_t>(i)] = static_cast<int>(i) % classes;
  return b;
}

/// Backprop through the full classifier against finite differences of the
/// cross-entropy loss, every parameter probed.
inline CheckResult fd_check_classifier(double tol = 1e-5, std::uint64_t seed = 29) {
  nn::ClassifierModel<double> model(2, seed);
  const ImageBatch<double> batch = small_random_batch(2, 8, 2, seed);
  auto loss = [&]() { return class_loss<double>(model.forward(batch), batch.labels); };
  auto grads = [&]() {
    nn::ClassifierTrace<double> tr;
    const Tensor<double> logits = model.forward(batch, tr);
    return model.backward(tr, class_loss_grad<double>(logits, batch.labels));
  };
  return fd_check_model("finite differences: classifier network", model, loss, grads, tol);
}

/// Backprop through the full policy network against finite differences of a
/// fixed random linear functional of the output probabilities.
inline CheckResult fd_check_policy(double tol = 1e-5, std::uint64_t seed = 31) {
  nn::PolicyModel<double> model(seed);
  const ImageBatch<double> batch = small_random_batch(2, 8, 2, seed + 1);
  auto weng = make_engine(seed, "fd-policy-weights");
  std::uniform_real_distribution<double> we(-1.0, 1.0);
  Tensor<double> w({2, 1, 8, 8});
  for (Index i = 0; i < w.size(); ++i) w[i] = we(weng);
  auto loss = [&]() {
    const Tensor<double> p = model.forward(batch);
    return (p.array() * w.array()).sum();
  };
  auto grads = [&]() {
    nn::PolicyTrace<double> tr;
    model.forward(batch, tr);
    return model.backward(tr, w);
  };
  return fd_check_model("finite differences: policy network", model, loss, grads, tol);
}

/// The whole battery, acceptance tolerances baked in.
inline std::vector<CheckResult> run_verification_suite(int estimator_instances = 20,
                                                       std::size_t estimator_samples = 100000) {
  std::vector<CheckResult> results;
  results.push_back(enumeration_identity_check());
  results.push_back(estimator_check(estimator_instances, 6, estimator_samples, 0.05));
  results.push_back(fd_check_bce(1e-6));
  results.push_back(fd_check_class_loss(1e-6));
  results.push_back(fd_check_policy_loss(1e-6));
  results.push_back(fd_check_classifier(1e-5));
  results.push_back(fd_check_policy(1e-5));
  return results;
}

}  // namespace apga::verify
