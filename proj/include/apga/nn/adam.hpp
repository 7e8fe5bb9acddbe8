#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "apga/nn/params.hpp"
#include "apga/tensor.hpp"

namespace apga::nn {

struct AdamHyper {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam moments for one parameter set. Moment tensors are
/// shape-congruent with their parameters; `step` counts completed updates.
template <typename Scalar>
struct AdamState {
  AdamHyper hyper;
  std::uint64_t step = 0;
  std::vector<std::string> names;
  std::vector<Tensor<Scalar>> m;
  std::vector<Tensor<Scalar>> v;

  static AdamState init(const ParamRefs<Scalar>& params, AdamHyper hyper) {
    AdamState s;
    s.hyper = hyper;
    for (const auto& p : params) {
      s.names.push_back(p.name);
      s.m.emplace_back(p.value->shape());
      s.v.emplace_back(p.value->shape());
    }
    return s;
  }
};

template <typename Scalar>
void adam_step(ParamRefs<Scalar>& params, const GradSet<Scalar>& grads, AdamState<Scalar>& state) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw shape_error("adam_step: parameter/gradient/state arity mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i].value->shape())
      throw shape_error("adam_step: gradient shape mismatch for " + params[i].name);
    if (!all_finite(grads[i]))
      throw numeric_error("adam_step: non-finite gradient for " + params[i].name);
  }
  state.step += 1;
  const Scalar b1 = static_cast<Scalar>(state.hyper.beta1);
  const Scalar b2 = static_cast<Scalar>(state.hyper.beta2);
  const Scalar lr = static_cast<Scalar>(state.hyper.lr);
  const Scalar eps = static_cast<Scalar>(state.hyper.eps);
  const Scalar corr1 =
      static_cast<Scalar>(1.0 - std::pow(state.hyper.beta1, static_cast<double>(state.step)));
  const Scalar corr2 =
      static_cast<Scalar>(1.0 - std::pow(state.hyper.beta2, static_cast<double>(state.step)));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.m[i].array();
    auto& v = state.v[i].array();
    const auto& g = grads[i].array();
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.square();
    params[i].value->array() -= lr * (m / corr1) / ((v / corr2).sqrt() + eps);
  }
}

}  // namespace apga::nn
