#pragma once

#include <vector>

#include "apga/tensor.hpp"

namespace apga {

/// A batch of grayscale images in [0,1] with class labels; images are NCHW
/// with a single channel.
template <typename Scalar>
struct ImageBatch {
  Tensor<Scalar> images;  // [B,1,H,W]
  std::vector<int> labels;

  Index batch_size() const { return images.rank() == 4 ? images.dim(0) : 0; }
  Index height() const { return images.dim(2); }
  Index width() const { return images.dim(3); }
};

template <typename Scalar>
void validate_image_batch(const ImageBatch<Scalar>& b, const std::string& what) {
  if (b.images.rank() != 4 || b.images.dim(1) != 1)
    throw shape_error(what + ": expected [B,1,H,W] images, got " + shape_str(b.images.shape()));
  if (static_cast<Index>(b.labels.size()) != b.images.dim(0))
    throw shape_error(what + ": label count " + std::to_string(b.labels.size()) +
                      " does not match batch size " + std::to_string(b.images.dim(0)));
}

}  // namespace apga
