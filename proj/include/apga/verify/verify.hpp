#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>

#include "apga/errors.hpp"
#include "apga/objective.hpp"

// Independent oracles for the policy-gradient machinery, all in fp64.
//
// A TinyInstance is an enumerable stand-in for one training step: n pixels,
// a Bernoulli erase policy (action a_i = 1 erases pixel i with probability
// p_i) and an explicit differentiable loss over the masked pixel vector. The
// reward of an action is R(a) = L(x * (1-a)) - L(x), so the no-erase action
// has reward exactly zero.

namespace apga::verify {

using Vector = Eigen::VectorXd;

struct TinyInstance {
  Vector pixels;                              // x
  Vector probs;                               // p in (0,1)^n
  std::function<double(const Vector&)> loss;  // differentiable scalar loss

  int n() const { return static_cast<int>(pixels.size()); }
};

inline constexpr int kMaxEnumerablePixels = 12;

inline void check_instance(const TinyInstance& inst) {
  if (inst.n() == 0 || inst.probs.size() != inst.pixels.size())
    throw shape_error("tiny instance: pixels/probs size mismatch");
  if (inst.n() > kMaxEnumerablePixels)
    throw error("tiny instance has " + std::to_string(inst.n()) +
                " pixels; enumeration is limited to " + std::to_string(kMaxEnumerablePixels));
  for (int i = 0; i < inst.n(); ++i)
    if (!(inst.probs[i] > 0.0 && inst.probs[i] < 1.0))
      throw error("tiny instance probabilities must lie in (0,1)");
}

inline Vector masked_pixels(const TinyInstance& inst, std::uint32_t action_bits) {
  Vector v = inst.pixels;
  for (int i = 0; i < inst.n(); ++i)
    if (action_bits & (1u << i)) v[i] = 0.0;
  return v;
}

inline double action_reward(const TinyInstance& inst, std::uint32_t action_bits) {
  return inst.loss(masked_pixels(inst, action_bits)) - inst.loss(inst.pixels);
}

inline double action_probability(const TinyInstance& inst, std::uint32_t action_bits) {
  double p = 1.0;
  for (int i = 0; i < inst.n(); ++i)
    p *= (action_bits & (1u << i)) ? inst.probs[i] : 1.0 - inst.probs[i];
  return p;
}

/// J(p) = sum_a P(a) R(a) by full enumeration of the 2^n actions.
inline double exact_expected_reward(const TinyInstance& inst) {
  check_instance(inst);
  const std::uint32_t count = 1u << inst.n();
  double j = 0.0;
  for (std::uint32_t a = 0; a < count; ++a)
    j += action_probability(inst, a) * action_reward(inst, a);
  return j;
}

/// dJ/dp by enumeration, using dP(a)/dp_i = P(a) (a_i/p_i - (1-a_i)/(1-p_i)).
inline Vector exact_policy_gradient(const TinyInstance& inst) {
  check_instance(inst);
  const std::uint32_t count = 1u << inst.n();
  Vector g = Vector::Zero(inst.n());
  for (std::uint32_t a = 0; a < count; ++a) {
    const double pr = action_probability(inst, a);
    const double r = action_reward(inst, a);
    for (int i = 0; i < inst.n(); ++i) {
      const double score = (a & (1u << i)) ? 1.0 / inst.probs[i] : -1.0 / (1.0 - inst.probs[i]);
      g[i] += pr * score * r;
    }
  }
  return g;
}

/// Likelihood-ratio estimate of dJ/dp: the mean over sampled actions of
/// grad log P(a) * (R(a) - b). With use_baseline, b is the running EMA of
/// rewards maintained exactly as in training (seeded by the first reward, so
/// the first sample contributes zero).
inline Vector reinforce_estimate(const TinyInstance& inst, std::size_t samples,
                                 std::mt19937_64& eng, bool use_baseline,
                                 double baseline_decay = 0.5) {
  check_instance(inst);
  if (samples == 0) throw error("reinforce_estimate: sample count must be positive");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RewardBaseline baseline;
  baseline.decay = baseline_decay;
  Vector acc = Vector::Zero(inst.n());
  for (std::size_t s = 0; s < samples; ++s) {
    std::uint32_t a = 0;
    for (int i = 0; i < inst.n(); ++i)
      if (u(eng) < inst.probs[i]) a |= (1u << i);
    const double r = action_reward(inst, a);
    double adv = r;
    if (use_baseline) {
      adv = baseline.initialized ? r - baseline.value : 0.0;
      baseline.observe(r);
    }
    for (int i = 0; i < inst.n(); ++i) {
      const double score = (a & (1u << i)) ? 1.0 / inst.probs[i] : -1.0 / (1.0 - inst.probs[i]);
      acc[i] += score * adv;
    }
  }
  return acc / static_cast<double>(samples);
}

// ---------------------------------------------------------------------------
// Central finite differences

struct FdReport {
  double max_rel_err = 0.0;
  Eigen::Index where = -1;  // parameter index of the worst mismatch
  double analytic = 0.0;
  double numeric = 0.0;
};

inline double relative_error(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Compares an analytic gradient against central differences of `f` at
/// `params` (perturbed in place and restored). fp64 only.
inline FdReport fd_check(const std::function<double()>& f, std::span<double> params,
                         std::span<const double> analytic_grad, double h = 1e-6,
                         double floor = 1e-8) {
  if (h < 1e-7 || h > 1e-3) throw error("fd_check: step size must lie in [1e-7, 1e-3]");
  if (params.size() != analytic_grad.size())
    throw shape_error("fd_check: gradient size does not match parameters");
  FdReport rep;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + h;
    const double fp = f();
    params[i] = saved - h;
    const double fm = f();
    params[i] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw numeric_error("fd_check: non-finite loss during probing");
    const double numeric = (fp - fm) / (2.0 * h);
    const double rel = relative_error(analytic_grad[i], numeric, floor);
    if (rel > rep.max_rel_err) {
      rep.max_rel_err = rel;
      rep.where = static_cast<Eigen::Index>(i);
      rep.analytic = analytic_grad[i];
      rep.numeric = numeric;
    }
  }
  return rep;
}

/// Sum of P(a) over the full action space; 1 within fp64 tolerance.
inline double total_action_probability(const TinyInstance& inst) {
  check_instance(inst);
  const std::uint32_t count = 1u << inst.n();
  double total = 0.0;
  for (std::uint32_t a = 0; a < count; ++a) total += action_probability(inst, a);
  return total;
}

}  // namespace apga::verify
