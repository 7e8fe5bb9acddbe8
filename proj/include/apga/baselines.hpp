#pragma once

#include <cmath>
#include <iostream>
#include <random>

#include "apga/data/folder.hpp"
#include "apga/masking.hpp"
#include "apga/nn/classifier.hpp"

// Comparison augmenters: random-patch cutout and saliency (Grad-CAM style)
// masking derived from a trained classifier.

namespace apga {

struct CutoutConfig {
  double min_frac = 0.1;  // patch side as a fraction of H and W
  double max_frac = 0.5;
  int patches = 1;

  void validate() const {
    if (!(min_frac > 0.0) || min_frac > max_frac || max_frac > 1.0)
      throw config_error("cutout: fraction range must satisfy 0 < min <= max <= 1");
    if (patches < 1) throw config_error("cutout: patch count must be >= 1");
  }
};

/// Zeroes a uniformly placed axis-aligned rectangle per image, side lengths
/// drawn from the configured fraction range. Rectangles always lie fully
/// inside the image, so the zeroed area equals the sampled area exactly.
template <typename Scalar>
ImageBatch<Scalar> cutout(const ImageBatch<Scalar>& batch, const CutoutConfig& cfg,
                          std::mt19937_64& eng) {
  cfg.validate();
  validate_image_batch(batch, "cutout");
  ImageBatch<Scalar> out = batch;
  const Index bn = batch.batch_size(), h = batch.height(), w = batch.width();
  std::uniform_real_distribution<double> frac(cfg.min_frac, cfg.max_frac);
  for (Index b = 0; b < bn; ++b) {
    Scalar* img = out.images.data() + b * h * w;
    for (int p = 0; p < cfg.patches; ++p) {
      const Index ph = std::max<Index>(1, std::lround(frac(eng) * static_cast<double>(h)));
      const Index pw = std::max<Index>(1, std::lround(frac(eng) * static_cast<double>(w)));
      std::uniform_int_distribution<Index> top_dist(0, h - ph), left_dist(0, w - pw);
      const Index top = top_dist(eng), left = left_dist(eng);
      for (Index y = top; y < top + ph; ++y)
        for (Index x = left; x < left + pw; ++x) img[y * w + x] = Scalar(0);
    }
  }
  return out;
}

/// Continuous class-activation map per image, min-max normalized to [0,1].
/// Channel weights are the spatially averaged gradients of the predicted
/// class logit at the last conv layer; the weighted sum is ReLU'd and
/// bilinearly upsampled to the input size. A flat map normalizes to zeros.
template <typename Scalar>
Tensor<Scalar> gradcam_map(const nn::ClassifierModel<Scalar>& model,
                           const ImageBatch<Scalar>& batch, bool* degenerate = nullptr) {
  if (!model.has_conv_layers())
    throw usage_error("gradcam requires a classifier with conv layers");
  nn::ClassifierTrace<Scalar> tr;
  const Tensor<Scalar> logits = model.forward(batch, tr);
  const Index bn = logits.dim(0), k = logits.dim(1);

  Tensor<Scalar> dlogits(logits.shape());
  for (Index b = 0; b < bn; ++b) {
    Index best = 0;
    for (Index j = 1; j < k; ++j)
      if (logits[b * k + j] > logits[b * k + best]) best = j;  // ties keep the lower index
    dlogits[b * k + best] = Scalar(1);
  }
  Tensor<Scalar> dact;
  model.backward(tr, dlogits, &dact);

  const Index c = tr.act3.dim(1), fh = tr.act3.dim(2), fw = tr.act3.dim(3), fhw = fh * fw;
  const Index h = batch.height(), w = batch.width();
  Tensor<Scalar> cam({bn, 1, h, w});
  bool any_flat = false;
  std::vector<Scalar> raw(static_cast<std::size_t>(fhw));
  std::vector<double> alphas(static_cast<std::size_t>(c));
  for (Index b = 0; b < bn; ++b) {
    for (Index ch = 0; ch < c; ++ch) {
      double alpha = 0.0;
      const Scalar* gplane = dact.data() + (b * c + ch) * fhw;
      for (Index t = 0; t < fhw; ++t) alpha += static_cast<double>(gplane[t]);
      alphas[static_cast<std::size_t>(ch)] = alpha / static_cast<double>(fhw);
    }
    for (Index s = 0; s < fhw; ++s) {
      double acc = 0.0;
      for (Index ch = 0; ch < c; ++ch)
        acc += alphas[static_cast<std::size_t>(ch)] *
               static_cast<double>(tr.act3[(b * c + ch) * fhw + s]);
      raw[static_cast<std::size_t>(s)] = static_cast<Scalar>(std::max(0.0, acc));
    }
    auto up = data::bilinear_resize(raw, fh, fw, h, w);
    Scalar lo = up[0], hi = up[0];
    for (Scalar v : up) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    Scalar* dst = cam.data() + b * h * w;
    if (hi <= lo) {
      any_flat = true;  // degenerate map: nothing stands out
      for (Index s = 0; s < h * w; ++s) dst[s] = Scalar(0);
    } else {
      const Scalar inv = Scalar(1) / (hi - lo);
      for (Index s = 0; s < h * w; ++s) dst[s] = (up[static_cast<std::size_t>(s)] - lo) * inv;
    }
  }
  if (degenerate) *degenerate = any_flat;
  return cam;
}

/// Binary keep-mask from the discretized saliency map (cam > 0.5). Pure in
/// (classifier params, input).
template <typename Scalar>
MaskBatch<Scalar> gradcam_mask(const nn::ClassifierModel<Scalar>& model,
                               const ImageBatch<Scalar>& batch) {
  bool degenerate = false;
  Tensor<Scalar> cam = gradcam_map(model, batch, &degenerate);
  if (degenerate)
    std::cerr << "[apga] warning: flat saliency map, emitting all-zeros keep-mask\n";
  MaskBatch<Scalar> m;
  m.mode = MaskMode::aiding;
  m.values.assign(cam.shape(), (cam.array() > Scalar(0.5)).template cast<Scalar>());
  return m;
}

}  // namespace apga
