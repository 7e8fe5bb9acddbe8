#pragma once

#include <string>
#include <vector>

#include "apga/image.hpp"
#include "apga/nn/ops.hpp"
#include "apga/nn/params.hpp"

namespace apga::nn {

// Forward intermediates recorded for backprop. A trace is valid only for the
// parameters it was produced with.
template <typename Scalar>
struct ClassifierTrace {
  bool valid = false;
  Tensor<Scalar> input;
  Tensor<Scalar> pre1, pooled1;
  std::vector<Index> argmax1;
  Tensor<Scalar> pre2, pooled2;
  std::vector<Index> argmax2;
  Tensor<Scalar> pre3, act3;
  Tensor<Scalar> gap;
  Tensor<Scalar> logits;
};

/// Small reference classifier:
///   [conv3x3(16) + relu + maxpool2] x2 -> conv3x3(32) + relu -> GAP -> dense(K).
/// Spatial size is free as long as two maxpools divide it.
template <typename Scalar>
class ClassifierModel {
 public:
  ClassifierModel() = default;

  ClassifierModel(int num_classes, std::uint64_t seed) : num_classes_(num_classes) {
    conv1_ = make_conv<Scalar>(1, 16, 3, 1);
    conv2_ = make_conv<Scalar>(16, 16, 3, 1);
    conv3_ = make_conv<Scalar>(16, 32, 3, 1);
    fc_ = make_dense<Scalar>(32, num_classes);
    auto eng = make_engine(seed, "classifier-init");
    fill_fan_in_uniform(conv1_.weight, 1 * 9, eng);
    fill_fan_in_uniform(conv2_.weight, 16 * 9, eng);
    fill_fan_in_uniform(conv3_.weight, 16 * 9, eng);
    fill_fan_in_uniform(fc_.weight, 32, eng);
  }

  int num_classes() const { return num_classes_; }

  std::vector<std::string> descriptor() const {
    return {"conv3x3(1->16)", "relu", "maxpool2", "conv3x3(16->16)", "relu", "maxpool2",
            "conv3x3(16->32)", "relu", "global_avg_pool",
            "dense(32->" + std::to_string(num_classes_) + ")"};
  }

  bool has_conv_layers() const { return true; }

  Tensor<Scalar> forward(const ImageBatch<Scalar>& batch) const {
    ClassifierTrace<Scalar> tr;
    return forward(batch, tr);
  }

  Tensor<Scalar> forward(const ImageBatch<Scalar>& batch, ClassifierTrace<Scalar>& tr) const {
    validate_image_batch(batch, "classifier forward");
    tr.input = batch.images;
    tr.pre1 = conv2d(conv1_, tr.input);
    tr.pooled1 = maxpool2(relu(tr.pre1), tr.argmax1);
    tr.pre2 = conv2d(conv2_, tr.pooled1);
    tr.pooled2 = maxpool2(relu(tr.pre2), tr.argmax2);
    tr.pre3 = conv2d(conv3_, tr.pooled2);
    tr.act3 = relu(tr.pre3);
    tr.gap = global_avg_pool(tr.act3);
    tr.logits = dense(fc_, tr.gap);
    tr.valid = true;
    return tr.logits;
  }

  // Gradients ordered as params(). Also exposes d(objective)/d(act3) via
  // `d_last_conv_act` when non-null (used by saliency maps).
  GradSet<Scalar> backward(const ClassifierTrace<Scalar>& tr, const Tensor<Scalar>& dlogits,
                           Tensor<Scalar>* d_last_conv_act = nullptr) const {
    if (!tr.valid) throw usage_error("classifier backward called without a recorded forward");
    require_shape(dlogits, tr.logits.shape(), "classifier backward gradient");
    GradSet<Scalar> g(8);
    Tensor<Scalar> dgap = dense_backward(fc_, tr.gap, dlogits, g[6], g[7]);
    Tensor<Scalar> dact3 = global_avg_pool_backward(tr.act3.shape(), dgap);
    if (d_last_conv_act) *d_last_conv_act = dact3;
    Tensor<Scalar> dpre3 = relu_backward(tr.pre3, dact3);
    Tensor<Scalar> dpooled2 = conv2d_backward(conv3_, tr.pooled2, dpre3, g[4], g[5]);
    Tensor<Scalar> dact2 = maxpool2_backward(tr.pre2.shape(), tr.argmax2, dpooled2);
    Tensor<Scalar> dpre2 = relu_backward(tr.pre2, dact2);
    Tensor<Scalar> dpooled1 = conv2d_backward(conv2_, tr.pooled1, dpre2, g[2], g[3]);
    Tensor<Scalar> dact1 = maxpool2_backward(tr.pre1.shape(), tr.argmax1, dpooled1);
    Tensor<Scalar> dpre1 = relu_backward(tr.pre1, dact1);
    Tensor<Scalar> dweight1, dbias1;
    conv2d_backward(conv1_, tr.input, dpre1, dweight1, dbias1);
    g[0] = std::move(dweight1);
    g[1] = std::move(dbias1);
    return g;
  }

  ParamRefs<Scalar> params() {
    return {{"classifier/conv1/weight", &conv1_.weight}, {"classifier/conv1/bias", &conv1_.bias},
            {"classifier/conv2/weight", &conv2_.weight}, {"classifier/conv2/bias", &conv2_.bias},
            {"classifier/conv3/weight", &conv3_.weight}, {"classifier/conv3/bias", &conv3_.bias},
            {"classifier/fc/weight", &fc_.weight},       {"classifier/fc/bias", &fc_.bias}};
  }

  ParamRefs<Scalar> params() const {
    return const_cast<ClassifierModel*>(this)->params();
  }

  const Dense<Scalar>& fc() const { return fc_; }
  Dense<Scalar>& fc() { return fc_; }
  Conv2d<Scalar>& conv(int i) {
    switch (i) {
      case 1: return conv1_;
      case 2: return conv2_;
      default: return conv3_;
    }
  }

 private:
  int num_classes_ = 0;
  Conv2d<Scalar> conv1_, conv2_, conv3_;
  Dense<Scalar> fc_;
};

}  // namespace apga::nn
