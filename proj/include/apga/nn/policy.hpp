#pragma once

#include <string>
#include <vector>

#include "apga/image.hpp"
#include "apga/nn/ops.hpp"
#include "apga/nn/params.hpp"

namespace apga::nn {

template <typename Scalar>
struct PolicyTrace {
  bool valid = false;
  Tensor<Scalar> input;
  Tensor<Scalar> pre_enc1, act_enc1;
  Tensor<Scalar> pooled;
  std::vector<Index> argmax;
  Tensor<Scalar> pre_enc2, act_enc2;
  Tensor<Scalar> upsampled;
  Tensor<Scalar> merged;
  Tensor<Scalar> pre_dec1, act_dec1;
  Tensor<Scalar> probs;  // clamped sigmoid output
};

/// Two-level encoder-decoder with a skip connection. Produces a per-pixel
/// usefulness probability in the open interval (0,1):
///   enc1: conv3x3(1->16)+relu --skip--> concat
///   pool2 -> enc2: conv3x3(16->32)+relu -> upsample2
///   concat(up,skip) -> dec1: conv3x3(48->16)+relu -> conv1x1(16->1) -> sigmoid.
template <typename Scalar>
class PolicyModel {
 public:
  PolicyModel() = default;

  explicit PolicyModel(std::uint64_t seed) {
    enc1_ = make_conv<Scalar>(1, 16, 3, 1);
    enc2_ = make_conv<Scalar>(16, 32, 3, 1);
    dec1_ = make_conv<Scalar>(48, 16, 3, 1);
    head_ = make_conv<Scalar>(16, 1, 1, 0);
    auto eng = make_engine(seed, "policy-init");
    fill_fan_in_uniform(enc1_.weight, 1 * 9, eng);
    fill_fan_in_uniform(enc2_.weight, 16 * 9, eng);
    fill_fan_in_uniform(dec1_.weight, 48 * 9, eng);
    fill_fan_in_uniform(head_.weight, 16, eng);
  }

  std::vector<std::string> descriptor() const {
    return {"enc1:conv3x3(1->16)+relu", "maxpool2", "enc2:conv3x3(16->32)+relu",
            "upsample2(nearest)", "concat(skip)", "dec1:conv3x3(48->16)+relu",
            "head:conv1x1(16->1)", "sigmoid"};
  }

  Tensor<Scalar> forward(const ImageBatch<Scalar>& batch) const {
    PolicyTrace<Scalar> tr;
    return forward(batch, tr);
  }

  Tensor<Scalar> forward(const ImageBatch<Scalar>& batch, PolicyTrace<Scalar>& tr) const {
    validate_image_batch(batch, "policy forward");
    tr.input = batch.images;
    tr.pre_enc1 = conv2d(enc1_, tr.input);
    tr.act_enc1 = relu(tr.pre_enc1);
    tr.pooled = maxpool2(tr.act_enc1, tr.argmax);
    tr.pre_enc2 = conv2d(enc2_, tr.pooled);
    tr.act_enc2 = relu(tr.pre_enc2);
    tr.upsampled = upsample2(tr.act_enc2);
    tr.merged = concat_channels(tr.upsampled, tr.act_enc1);
    tr.pre_dec1 = conv2d(dec1_, tr.merged);
    tr.act_dec1 = relu(tr.pre_dec1);
    tr.probs = sigmoid_clamped(conv2d(head_, tr.act_dec1));
    tr.valid = true;
    return tr.probs;
  }

  GradSet<Scalar> backward(const PolicyTrace<Scalar>& tr, const Tensor<Scalar>& dprobs) const {
    if (!tr.valid) throw usage_error("policy backward called without a recorded forward");
    require_shape(dprobs, tr.probs.shape(), "policy backward gradient");
    GradSet<Scalar> g(8);
    Tensor<Scalar> dhead_in = sigmoid_backward(tr.probs, dprobs);
    Tensor<Scalar> dact_dec1 = conv2d_backward(head_, tr.act_dec1, dhead_in, g[6], g[7]);
    Tensor<Scalar> dpre_dec1 = relu_backward(tr.pre_dec1, dact_dec1);
    Tensor<Scalar> dmerged = conv2d_backward(dec1_, tr.merged, dpre_dec1, g[4], g[5]);
    Tensor<Scalar> dupsampled, dskip;
    split_channels_backward(dmerged, tr.upsampled.dim(1), dupsampled, dskip);
    Tensor<Scalar> dact_enc2 = upsample2_backward(tr.act_enc2.shape(), dupsampled);
    Tensor<Scalar> dpre_enc2 = relu_backward(tr.pre_enc2, dact_enc2);
    Tensor<Scalar> dpooled = conv2d_backward(enc2_, tr.pooled, dpre_enc2, g[2], g[3]);
    Tensor<Scalar> dact_enc1 = maxpool2_backward(tr.act_enc1.shape(), tr.argmax, dpooled);
    dact_enc1.array() += dskip.array();
    Tensor<Scalar> dpre_enc1 = relu_backward(tr.pre_enc1, dact_enc1);
    Tensor<Scalar> dw1, db1;
    conv2d_backward(enc1_, tr.input, dpre_enc1, dw1, db1);
    g[0] = std::move(dw1);
    g[1] = std::move(db1);
    return g;
  }

  ParamRefs<Scalar> params() {
    return {{"policy/enc1/weight", &enc1_.weight}, {"policy/enc1/bias", &enc1_.bias},
            {"policy/enc2/weight", &enc2_.weight}, {"policy/enc2/bias", &enc2_.bias},
            {"policy/dec1/weight", &dec1_.weight}, {"policy/dec1/bias", &dec1_.bias},
            {"policy/head/weight", &head_.weight}, {"policy/head/bias", &head_.bias}};
  }

  ParamRefs<Scalar> params() const { return const_cast<PolicyModel*>(this)->params(); }

  Conv2d<Scalar>& head() { return head_; }

 private:
  Conv2d<Scalar> enc1_, enc2_, dec1_, head_;
};

}  // namespace apga::nn
