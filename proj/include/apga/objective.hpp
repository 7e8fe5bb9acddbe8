#pragma once

#include <cmath>
#include <span>
#include <string>

#include "apga/masking.hpp"
#include "apga/tensor.hpp"

// Loss and reward arithmetic for the joint training scheme: pixel-wise BCE,
// softmax cross-entropy, the adversarial reward, its moving-average baseline,
// and the regularized policy loss.

namespace apga {

namespace detail {
template <typename Scalar>
Scalar clamp_prob(Scalar p) {
  const Scalar lo = Scalar(1e-7), hi = Scalar(1) - Scalar(1e-7);
  return std::min(hi, std::max(lo, p));
}
}  // namespace detail

/// Mean binary cross-entropy over all elements. Predictions are clamped to
/// [1e-7, 1-1e-7] before the logs.
template <typename Scalar>
Scalar bce(const Tensor<Scalar>& pred, const Tensor<Scalar>& target) {
  if (!pred.same_shape(target))
    throw shape_error("bce: prediction shape " + shape_str(pred.shape()) +
                      " does not match target " + shape_str(target.shape()));
  if (pred.size() == 0) throw shape_error("bce: empty input");
  double acc = 0.0;
  for (Index i = 0; i < pred.size(); ++i) {
    const double p = static_cast<double>(detail::clamp_prob(pred[i]));
    const double y = static_cast<double>(target[i]);
    acc += y * std::log(p) + (1.0 - y) * std::log1p(-p);
  }
  return static_cast<Scalar>(-acc / static_cast<double>(pred.size()));
}

// d(mean BCE)/d(pred); zero where the clamp saturates.
template <typename Scalar>
Tensor<Scalar> bce_grad(const Tensor<Scalar>& pred, const Tensor<Scalar>& target) {
  if (!pred.same_shape(target)) throw shape_error("bce_grad: shape mismatch");
  const Scalar lo = Scalar(1e-7), hi = Scalar(1) - Scalar(1e-7);
  const Scalar inv_n = Scalar(1) / static_cast<Scalar>(pred.size());
  Tensor<Scalar> g(pred.shape());
  for (Index i = 0; i < pred.size(); ++i) {
    const Scalar p = pred[i];
    if (p < lo || p > hi) {
      g[i] = Scalar(0);
      continue;
    }
    g[i] = (p - target[i]) / (p * (Scalar(1) - p)) * inv_n;
  }
  return g;
}

/// Mean over the batch of -log softmax(logits)[label].
template <typename Scalar>
Scalar class_loss(const Tensor<Scalar>& logits, std::span<const int> labels) {
  if (logits.rank() != 2) throw shape_error("class_loss expects [B,K] logits");
  const Index bn = logits.dim(0), k = logits.dim(1);
  if (k < 2) throw shape_error("class_loss requires K >= 2 classes");
  if (static_cast<Index>(labels.size()) != bn)
    throw shape_error("class_loss: label count does not match batch");
  double acc = 0.0;
  for (Index b = 0; b < bn; ++b) {
    const int y = labels[static_cast<std::size_t>(b)];
    if (y < 0 || y >= k)
      throw error("class_loss: label " + std::to_string(y) + " out of range [0," +
                  std::to_string(k) + ")");
    const Scalar* row = logits.data() + b * k;
    double mx = static_cast<double>(row[0]);
    for (Index j = 1; j < k; ++j) mx = std::max(mx, static_cast<double>(row[j]));
    double se = 0.0;
    for (Index j = 0; j < k; ++j) se += std::exp(static_cast<double>(row[j]) - mx);
    acc += mx + std::log(se) - static_cast<double>(row[y]);
  }
  return static_cast<Scalar>(acc / static_cast<double>(bn));
}

template <typename Scalar>
Tensor<Scalar> class_loss_grad(const Tensor<Scalar>& logits, std::span<const int> labels) {
  const Index bn = logits.dim(0), k = logits.dim(1);
  Tensor<Scalar> g(logits.shape());
  const Scalar inv_b = Scalar(1) / static_cast<Scalar>(bn);
  for (Index b = 0; b < bn; ++b) {
    const Scalar* row = logits.data() + b * k;
    Scalar* grow = g.data() + b * k;
    double mx = static_cast<double>(row[0]);
    for (Index j = 1; j < k; ++j) mx = std::max(mx, static_cast<double>(row[j]));
    double se = 0.0;
    for (Index j = 0; j < k; ++j) se += std::exp(static_cast<double>(row[j]) - mx);
    for (Index j = 0; j < k; ++j)
      grow[j] = static_cast<Scalar>(std::exp(static_cast<double>(row[j]) - mx) / se) * inv_b;
    grow[labels[static_cast<std::size_t>(b)]] -= inv_b;
  }
  return g;
}

/// R_t = L_adversarial - L_original. Zero exactly when the adversarial mask
/// erased nothing; may be negative.
template <typename Scalar>
Scalar adversarial_reward(Scalar loss_adversarial, Scalar loss_original) {
  if (!std::isfinite(static_cast<double>(loss_adversarial)) ||
      !std::isfinite(static_cast<double>(loss_original)))
    throw numeric_error("adversarial_reward: non-finite loss");
  return loss_adversarial - loss_original;
}

/// Exponential moving average of the reward. The first observation seeds the
/// average; afterwards b <- decay*b + (1-decay)*R. Kept in double regardless
/// of training precision so a metrics log replays the recurrence exactly.
struct RewardBaseline {
  double value = 0.0;
  double decay = 0.5;
  bool initialized = false;

  void observe(double reward) {
    if (!initialized) {
      value = reward;
      initialized = true;
    } else {
      value = decay * value + (1.0 - decay) * reward;
    }
  }
};

template <typename Scalar>
struct PolicyLossTerms {
  Scalar l_prob = 0;     // BCE(P, mask target)
  Scalar l_extreme = 0;  // BCE(P, all-zeros target)
  Scalar reward = 0;
  Scalar baseline = 0;
  Scalar lambda_zeros = 0;
  Scalar total = 0;
};

/// Regularized policy-gradient loss
///   total = L_prob * (R - b) + L_extreme * lambda_zeros
/// with L_prob = bce(P, A) for the adversarial keep-mask A and L_extreme the
/// all-zeros penalty. Gradient flows only through P; A is a constant.
template <typename Scalar>
PolicyLossTerms<Scalar> policy_loss(const Tensor<Scalar>& probs, const MaskBatch<Scalar>& adv_mask,
                                    Scalar reward, Scalar baseline, Scalar lambda_zeros) {
  PolicyLossTerms<Scalar> t;
  t.l_prob = bce(probs, adv_mask.values);
  Tensor<Scalar> zeros(probs.shape());
  t.l_extreme = bce(probs, zeros);
  t.reward = reward;
  t.baseline = baseline;
  t.lambda_zeros = lambda_zeros;
  t.total = t.l_prob * (reward - baseline) + t.l_extreme * lambda_zeros;
  return t;
}

template <typename Scalar>
Tensor<Scalar> policy_loss_grad(const Tensor<Scalar>& probs, const MaskBatch<Scalar>& adv_mask,
                                Scalar advantage, Scalar lambda_zeros) {
  Tensor<Scalar> g = bce_grad(probs, adv_mask.values);
  Tensor<Scalar> zeros(probs.shape());
  Tensor<Scalar> ge = bce_grad(probs, zeros);
  g.array() = g.array() * advantage + ge.array() * lambda_zeros;
  return g;
}

}  // namespace apga
