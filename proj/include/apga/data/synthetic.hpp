#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "apga/data/dataset.hpp"
#include "apga/errors.hpp"

// Synthetic ground-truth-ROI task. Each image carries one region of interest
// (disc or square) filled with a stripe texture whose orientation decides the
// class: horizontal stripes = class 0, vertical = class 1. Distractor patches
// with label-independent random orientation sit outside the ROI, so pixels
// outside the ROI carry no label information while looking locally identical
// to the ROI texture.

namespace apga::data {

enum class RoiShape { disc, square };

struct SyntheticSpec {
  Index height = 32;
  Index width = 32;
  int classes = 2;
  RoiShape roi_shape = RoiShape::disc;
  Index roi_min_radius = 6;
  Index roi_max_radius = 9;
  int distractor_count = 3;
  Index distractor_min_side = 5;
  Index distractor_max_side = 10;
  double background = 0.5;
  double stripe_lo = 0.15;
  double stripe_hi = 0.85;
  Index stripe_half_period = 2;  // stripe thickness in pixels
  double noise_sigma = 0.02;
  Index train_count = 200;
  Index val_count = 100;
  Index test_count = 100;
  std::uint64_t seed = 0;

  void validate() const {
    if (height < 8 || width < 8) throw config_error("synthetic: image size too small");
    if (classes != 2) throw config_error("synthetic: only 2 classes supported");
    if (roi_min_radius < 3 || roi_max_radius < roi_min_radius)
      throw config_error("synthetic: bad ROI radius range");
    if (roi_max_radius * 2 + 4 >= std::min(height, width))
      throw config_error("synthetic: ROI does not fit the image");
    if (train_count <= 0 || val_count <= 0 || test_count <= 0)
      throw config_error("synthetic: sample counts must be positive");
    if (noise_sigma < 0) throw config_error("synthetic: negative noise sigma");
    if (stripe_half_period < 1) throw config_error("synthetic: bad stripe period");
  }
};

namespace detail {

// Values are snapped to the 8-bit grid so the in-memory dataset and its PNG
// round-trip are identical.
inline std::uint8_t quantize8(double v) {
  v = std::min(1.0, std::max(0.0, v));
  return static_cast<std::uint8_t>(std::lround(v * 255.0));
}

inline bool rect_overlaps_roi(const SyntheticSpec& spec, Index cx, Index cy, Index r, Index x0,
                              Index y0, Index w, Index h) {
  if (spec.roi_shape == RoiShape::square) {
    return x0 <= cx + r && x0 + w - 1 >= cx - r && y0 <= cy + r && y0 + h - 1 >= cy - r;
  }
  const Index nx = std::clamp(cx, x0, x0 + w - 1);
  const Index ny = std::clamp(cy, y0, y0 + h - 1);
  const Index dx = nx - cx, dy = ny - cy;
  return dx * dx + dy * dy <= r * r;
}

inline bool inside_roi(const SyntheticSpec& spec, Index cx, Index cy, Index r, Index x, Index y) {
  if (spec.roi_shape == RoiShape::square)
    return std::abs(x - cx) <= r && std::abs(y - cy) <= r;
  const Index dx = x - cx, dy = y - cy;
  return dx * dx + dy * dy <= r * r;
}

inline double stripe_value(const SyntheticSpec& spec, bool horizontal, Index x, Index y) {
  const Index coord = horizontal ? y : x;
  return ((coord / spec.stripe_half_period) % 2 == 0) ? spec.stripe_hi : spec.stripe_lo;
}

}  // namespace detail

/// Renders one sample into row-major h*w buffers. Label decides the stripe
/// orientation inside the ROI; everything else is label-independent.
inline void render_sample(const SyntheticSpec& spec, int label, std::mt19937_64& eng,
                          std::vector<std::uint8_t>& image, std::vector<std::uint8_t>& roi) {
  const Index h = spec.height, w = spec.width;
  std::vector<double> canvas(static_cast<std::size_t>(h * w), spec.background);
  roi.assign(static_cast<std::size_t>(h * w), 0);

  std::uniform_int_distribution<Index> rad_dist(spec.roi_min_radius, spec.roi_max_radius);
  const Index r = rad_dist(eng);
  std::uniform_int_distribution<Index> cx_dist(r + 2, w - 3 - r);
  std::uniform_int_distribution<Index> cy_dist(r + 2, h - 3 - r);
  const Index cx = cx_dist(eng);
  const Index cy = cy_dist(eng);

  std::uniform_int_distribution<Index> side_dist(spec.distractor_min_side,
                                                 spec.distractor_max_side);
  std::uniform_int_distribution<int> coin(0, 1);
  for (int d = 0; d < spec.distractor_count; ++d) {
    const Index dw = side_dist(eng), dh = side_dist(eng);
    const bool horizontal = coin(eng) == 1;
    std::uniform_int_distribution<Index> x_dist(0, w - dw);
    std::uniform_int_distribution<Index> y_dist(0, h - dh);
    for (int attempt = 0; attempt < 40; ++attempt) {
      const Index x0 = x_dist(eng), y0 = y_dist(eng);
      if (detail::rect_overlaps_roi(spec, cx, cy, r, x0, y0, dw, dh)) continue;
      for (Index y = y0; y < y0 + dh; ++y)
        for (Index x = x0; x < x0 + dw; ++x)
          canvas[static_cast<std::size_t>(y * w + x)] =
              detail::stripe_value(spec, horizontal, x - x0, y - y0);
      break;
    }
  }

  const bool roi_horizontal = (label == 0);
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x)
      if (detail::inside_roi(spec, cx, cy, r, x, y)) {
        canvas[static_cast<std::size_t>(y * w + x)] =
            detail::stripe_value(spec, roi_horizontal, x - cx, y - cy);
        roi[static_cast<std::size_t>(y * w + x)] = 1;
      }

  image.resize(static_cast<std::size_t>(h * w));
  if (spec.noise_sigma > 0) {
    std::normal_distribution<double> noise(0.0, spec.noise_sigma);
    for (std::size_t i = 0; i < canvas.size(); ++i)
      image[i] = detail::quantize8(canvas[i] + noise(eng));
  } else {
    for (std::size_t i = 0; i < canvas.size(); ++i) image[i] = detail::quantize8(canvas[i]);
  }
}

template <typename Scalar>
Split<Scalar> generate_split(const SyntheticSpec& spec, const std::string& split_name, Index count,
                             int id_offset) {
  Split<Scalar> s = make_split<Scalar>(count, spec.height, spec.width, true);
  const Index hw = spec.height * spec.width;
  std::vector<std::uint8_t> img, roi;
  for (Index i = 0; i < count; ++i) {
    const int label = static_cast<int>(i) % spec.classes;  // balanced within +-1
    auto eng = make_engine(spec.seed, "synthetic/" + split_name,
                           static_cast<std::uint64_t>(i));
    render_sample(spec, label, eng, img, roi);
    for (Index p = 0; p < hw; ++p) {
      s.images[i * hw + p] = static_cast<Scalar>(img[static_cast<std::size_t>(p)]) / Scalar(255);
      s.rois[i * hw + p] = static_cast<Scalar>(roi[static_cast<std::size_t>(p)]);
    }
    s.labels[static_cast<std::size_t>(i)] = label;
    char name[32];
    std::snprintf(name, sizeof(name), "%05d.png", id_offset + static_cast<int>(i));
    s.ids[static_cast<std::size_t>(i)] = name;
  }
  return s;
}

/// Draws the full dataset deterministically from the spec seed; sample i of a
/// split depends only on (seed, split, i).
template <typename Scalar>
Dataset<Scalar> generate(const SyntheticSpec& spec) {
  spec.validate();
  Dataset<Scalar> d;
  d.height = spec.height;
  d.width = spec.width;
  d.classes = spec.classes;
  d.train = generate_split<Scalar>(spec, "train", spec.train_count, 0);
  d.val = generate_split<Scalar>(spec, "val", spec.val_count,
                                 static_cast<int>(spec.train_count));
  d.test = generate_split<Scalar>(spec, "test", spec.test_count,
                                  static_cast<int>(spec.train_count + spec.val_count));
  return d;
}

// ---------------------------------------------------------------------------
// Rule oracle: classifies from stripe orientation inside a given ROI mask.
// Returns -1 when the ROI carries no orientation signal (e.g. masked out).

struct OracleReading {
  int label = -1;
  double vertical_energy = 0;    // |dI/dy| inside ROI; large for horizontal stripes
  double horizontal_energy = 0;  // |dI/dx| inside ROI; large for vertical stripes
};

template <typename Scalar>
OracleReading rule_oracle(const Tensor<Scalar>& image_hw, const Tensor<Scalar>& roi_hw) {
  if (image_hw.size() != roi_hw.size()) throw shape_error("rule_oracle: image/roi size mismatch");
  const Index h = image_hw.dim(image_hw.rank() - 2), w = image_hw.dim(image_hw.rank() - 1);
  OracleReading r;
  const Scalar* img = image_hw.data();
  const Scalar* roi = roi_hw.data();
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x) {
      const Index i = y * w + x;
      if (roi[i] == Scalar(0)) continue;
      if (y + 1 < h && roi[i + w] != Scalar(0))
        r.vertical_energy += std::abs(static_cast<double>(img[i + w]) - img[i]);
      if (x + 1 < w && roi[i + 1] != Scalar(0))
        r.horizontal_energy += std::abs(static_cast<double>(img[i + 1]) - img[i]);
    }
  if (r.vertical_energy == r.horizontal_energy) return r;  // no information
  r.label = r.vertical_energy > r.horizontal_energy ? 0 : 1;
  return r;
}

}  // namespace apga::data
