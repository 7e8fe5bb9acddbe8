#pragma once

#include <random>
#include <string>
#include <vector>

#include "apga/rng.hpp"
#include "apga/tensor.hpp"

namespace apga::nn {

template <typename Scalar>
struct NamedParam {
  std::string name;
  Tensor<Scalar>* value;
};

template <typename Scalar>
using ParamRefs = std::vector<NamedParam<Scalar>>;

template <typename Scalar>
using GradSet = std::vector<Tensor<Scalar>>;

template <typename Scalar>
Index param_count(const ParamRefs<Scalar>& params) {
  Index n = 0;
  for (const auto& p : params) n += p.value->size();
  return n;
}

// Fingerprint of the raw parameter bytes; used to assert which sub-updates
// touched which model.
template <typename Scalar>
std::uint64_t param_hash(const ParamRefs<Scalar>& params) {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& p : params) {
    h ^= fnv1a64(p.name);
    h = splitmix64(h ^ fnv1a64(p.value->data(), sizeof(Scalar) * static_cast<std::size_t>(
                                                    p.value->size())));
  }
  return h;
}

// Fan-in scaled uniform init, U(-1/sqrt(fan_in), 1/sqrt(fan_in)). Draws are
// made in double so fp32 and fp64 models share the same underlying values.
template <typename Scalar>
void fill_fan_in_uniform(Tensor<Scalar>& w, Index fan_in, std::mt19937_64& eng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Index i = 0; i < w.size(); ++i) w[i] = static_cast<Scalar>(dist(eng));
}

}  // namespace apga::nn
