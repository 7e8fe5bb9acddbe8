#pragma once

#include <random>

#include "apga/image.hpp"
#include "apga/tensor.hpp"

namespace apga {

enum class MaskMode { adversarial, aiding };

/// Binary keep/erase decisions: 1 keeps a pixel, 0 erases it. Shape matches
/// the policy output that produced it.
template <typename Scalar>
struct MaskBatch {
  Tensor<Scalar> values;  // each element exactly 0 or 1
  MaskMode mode = MaskMode::adversarial;
};

// Keep-mask of the pixels predicted unimportant: 1 where p < 0.5, strict.
// Applying it erases the predicted-important features.
template <typename Scalar>
MaskBatch<Scalar> adversarial_mask(const Tensor<Scalar>& probs) {
  MaskBatch<Scalar> m;
  m.mode = MaskMode::adversarial;
  m.values.assign(probs.shape(),
                  (probs.array() < Scalar(0.5)).template cast<Scalar>());
  return m;
}

// Keep-mask of the pixels predicted important: 1 where p > 0.5, strict.
// A pixel at exactly 0.5 is erased in both modes.
template <typename Scalar>
MaskBatch<Scalar> aiding_mask(const Tensor<Scalar>& probs) {
  MaskBatch<Scalar> m;
  m.mode = MaskMode::aiding;
  m.values.assign(probs.shape(),
                  (probs.array() > Scalar(0.5)).template cast<Scalar>());
  return m;
}

template <typename Scalar>
ImageBatch<Scalar> apply_mask(const ImageBatch<Scalar>& batch, const MaskBatch<Scalar>& mask) {
  if (!batch.images.same_shape(mask.values))
    throw shape_error("apply_mask: mask shape " + shape_str(mask.values.shape()) +
                      " does not match images " + shape_str(batch.images.shape()));
  ImageBatch<Scalar> out;
  out.labels = batch.labels;
  out.images.assign(batch.images.shape(), batch.images.array() * mask.values.array());
  return out;
}

// Stochastic variant used only by the estimator verification: draws erase
// actions a_i ~ Bernoulli(p_i) (a_i = 1 erases pixel i) and returns them.
// The production path never samples; masks there are deterministic thresholds.
template <typename Scalar>
Tensor<Scalar> sample_erase_actions(const Tensor<Scalar>& probs, std::mt19937_64& eng) {
  Tensor<Scalar> a(probs.shape());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (Index i = 0; i < probs.size(); ++i)
    a[i] = (u(eng) < static_cast<double>(probs[i])) ? Scalar(1) : Scalar(0);
  return a;
}

template <typename Scalar>
MaskBatch<Scalar> mask_from_erase_actions(const Tensor<Scalar>& actions) {
  MaskBatch<Scalar> m;
  m.mode = MaskMode::adversarial;
  m.values.assign(actions.shape(), Scalar(1) - actions.array());
  return m;
}

}  // namespace apga
