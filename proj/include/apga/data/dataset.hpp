#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "apga/image.hpp"
#include "apga/rng.hpp"
#include "apga/tensor.hpp"

namespace apga::data {

/// One split of a dataset. Ground-truth ROI masks, when present, are kept
/// apart from the training surface: batches gathered for training carry only
/// images and labels.
template <typename Scalar>
struct Split {
  Tensor<Scalar> images;  // [N,1,H,W]
  std::vector<int> labels;
  Tensor<Scalar> rois;  // [N,1,H,W] binary, evaluation-only
  bool has_roi = false;
  std::vector<std::string> ids;

  Index size() const { return static_cast<Index>(labels.size()); }
};

template <typename Scalar>
struct Dataset {
  Split<Scalar> train, val, test;
  Index height = 0;
  Index width = 0;
  int classes = 0;
};

template <typename Scalar>
Split<Scalar> make_split(Index n, Index h, Index w, bool with_roi) {
  Split<Scalar> s;
  s.images = Tensor<Scalar>({n, 1, h, w});
  s.labels.assign(static_cast<std::size_t>(n), 0);
  if (with_roi) s.rois = Tensor<Scalar>({n, 1, h, w});
  s.has_roi = with_roi;
  s.ids.resize(static_cast<std::size_t>(n));
  return s;
}

inline std::vector<Index> epoch_permutation(Index n, std::uint64_t seed, std::uint64_t epoch) {
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index(0));
  auto eng = make_engine(seed, "shuffle", epoch);
  std::shuffle(perm.begin(), perm.end(), eng);
  return perm;
}

/// Batch index plan for one epoch: a (seed,epoch)-determined permutation cut
/// into batch_size chunks, final short batch kept. batch_size beyond the
/// split size degenerates to a single batch.
inline std::vector<std::vector<Index>> epoch_batches(Index n, Index batch_size,
                                                     std::uint64_t seed, std::uint64_t epoch) {
  if (n <= 0) throw error("epoch_batches: empty split");
  if (batch_size <= 0) throw error("epoch_batches: batch size must be positive");
  auto perm = epoch_permutation(n, seed, epoch);
  std::vector<std::vector<Index>> out;
  for (Index at = 0; at < n; at += batch_size) {
    const Index take = std::min(batch_size, n - at);
    out.emplace_back(perm.begin() + at, perm.begin() + at + take);
  }
  return out;
}

template <typename Scalar>
ImageBatch<Scalar> gather_batch(const Split<Scalar>& split, std::span<const Index> idx) {
  const Index h = split.images.dim(2), w = split.images.dim(3), hw = h * w;
  ImageBatch<Scalar> b;
  b.images = Tensor<Scalar>({static_cast<Index>(idx.size()), 1, h, w});
  b.labels.resize(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::copy_n(split.images.data() + idx[i] * hw, hw,
                b.images.data() + static_cast<Index>(i) * hw);
    b.labels[i] = split.labels[static_cast<std::size_t>(idx[i])];
  }
  return b;
}

/// Walks the training stream: epochs of (seed,epoch)-determined permutations.
/// The cursor is the only state; a permutation is always recomputable, so
/// resuming from (epoch,pos) reproduces the stream exactly.
struct BatchCursor {
  std::uint64_t epoch = 0;
  std::uint64_t pos = 0;
};

template <typename Scalar>
ImageBatch<Scalar> next_batch(const Split<Scalar>& split, Index batch_size, std::uint64_t seed,
                              BatchCursor& cursor) {
  const Index n = split.size();
  if (n == 0) throw error("next_batch: empty split");
  if (cursor.pos >= static_cast<std::uint64_t>(n)) {
    cursor.epoch += 1;
    cursor.pos = 0;
  }
  auto perm = epoch_permutation(n, seed, cursor.epoch);
  const Index at = static_cast<Index>(cursor.pos);
  const Index take = std::min(batch_size, n - at);
  cursor.pos += static_cast<std::uint64_t>(take);
  return gather_batch(split, std::span<const Index>(perm.data() + at, static_cast<std::size_t>(take)));
}

}  // namespace apga::data
