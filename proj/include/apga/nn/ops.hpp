#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "apga/tensor.hpp"

// Forward/backward pairs for the small set of layer primitives the reference
// networks need. Everything is stride-1 and single precision-agnostic; heavy
// lifting (conv, dense) goes through Eigen GEMM via im2col.

namespace apga::nn {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// ---------------------------------------------------------------------------
// conv2d

template <typename Scalar>
struct Conv2d {
  Tensor<Scalar> weight;  // [out_ch, in_ch*k*k]
  Tensor<Scalar> bias;    // [out_ch]
  Index in_ch = 0;
  Index out_ch = 0;
  Index ksize = 3;
  Index pad = 1;
};

template <typename Scalar>
Conv2d<Scalar> make_conv(Index in_ch, Index out_ch, Index ksize, Index pad) {
  Conv2d<Scalar> c;
  c.in_ch = in_ch;
  c.out_ch = out_ch;
  c.ksize = ksize;
  c.pad = pad;
  c.weight = Tensor<Scalar>({out_ch, in_ch * ksize * ksize});
  c.bias = Tensor<Scalar>({out_ch});
  return c;
}

inline Index conv_out_extent(Index in, Index ksize, Index pad) {
  return in + 2 * pad - ksize + 1;
}

template <typename Scalar>
void im2col(const Tensor<Scalar>& x, Index ksize, Index pad, Matrix<Scalar>& cols) {
  const Index b_count = x.dim(0), c_count = x.dim(1), h = x.dim(2), w = x.dim(3);
  const Index ho = conv_out_extent(h, ksize, pad), wo = conv_out_extent(w, ksize, pad);
  const Index patch = c_count * ksize * ksize;
  cols.resize(patch, b_count * ho * wo);
  const Scalar* px = x.data();
  Index m = 0;
  for (Index b = 0; b < b_count; ++b) {
    for (Index oh = 0; oh < ho; ++oh) {
      for (Index ow = 0; ow < wo; ++ow, ++m) {
        Scalar* col = cols.data() + m * patch;
        Index r = 0;
        for (Index c = 0; c < c_count; ++c) {
          const Scalar* plane = px + (b * c_count + c) * h * w;
          for (Index ki = 0; ki < ksize; ++ki) {
            const Index ih = oh - pad + ki;
            if (ih < 0 || ih >= h) {
              for (Index kj = 0; kj < ksize; ++kj) col[r++] = Scalar(0);
              continue;
            }
            const Scalar* row = plane + ih * w;
            for (Index kj = 0; kj < ksize; ++kj) {
              const Index iw = ow - pad + kj;
              col[r++] = (iw >= 0 && iw < w) ? row[iw] : Scalar(0);
            }
          }
        }
      }
    }
  }
}

template <typename Scalar>
Shape conv2d_out_shape(const Conv2d<Scalar>& c, const Shape& in) {
  if (in.size() != 4) throw shape_error("conv2d expects NCHW input, got " + shape_str(in));
  if (in[1] != c.in_ch)
    throw shape_error("conv2d: input has " + std::to_string(in[1]) + " channels, layer expects " +
                      std::to_string(c.in_ch));
  const Index ho = conv_out_extent(in[2], c.ksize, c.pad);
  const Index wo = conv_out_extent(in[3], c.ksize, c.pad);
  if (ho <= 0 || wo <= 0) throw shape_error("conv2d: input " + shape_str(in) + " too small");
  return {in[0], c.out_ch, ho, wo};
}

template <typename Scalar>
Tensor<Scalar> conv2d(const Conv2d<Scalar>& c, const Tensor<Scalar>& x) {
  const Shape out_shape = conv2d_out_shape(c, x.shape());
  const Index b_count = out_shape[0], ho = out_shape[2], wo = out_shape[3];
  const Index spatial = ho * wo;

  Matrix<Scalar> cols;
  im2col(x, c.ksize, c.pad, cols);
  auto wmap = row_map(c.weight, c.out_ch, c.in_ch * c.ksize * c.ksize);
  Matrix<Scalar> ymat = wmap * cols;  // [out_ch, B*ho*wo]

  Tensor<Scalar> y(out_shape);
  Scalar* py = y.data();
  for (Index b = 0; b < b_count; ++b) {
    for (Index oc = 0; oc < c.out_ch; ++oc) {
      const Scalar beta = c.bias[oc];
      Scalar* dst = py + (b * c.out_ch + oc) * spatial;
      for (Index s = 0; s < spatial; ++s) dst[s] = ymat(oc, b * spatial + s) + beta;
    }
  }
  return y;
}

// Gradients w.r.t. weight, bias and input. `x` is the forward input; the
// im2col buffer is recomputed rather than cached to keep traces small.
template <typename Scalar>
Tensor<Scalar> conv2d_backward(const Conv2d<Scalar>& c, const Tensor<Scalar>& x,
                               const Tensor<Scalar>& dy, Tensor<Scalar>& dweight,
                               Tensor<Scalar>& dbias) {
  const Shape out_shape = conv2d_out_shape(c, x.shape());
  require_shape(dy, out_shape, "conv2d_backward upstream gradient");
  const Index b_count = x.dim(0), h = x.dim(2), w = x.dim(3);
  const Index ho = out_shape[2], wo = out_shape[3], spatial = ho * wo;
  const Index patch = c.in_ch * c.ksize * c.ksize;

  Matrix<Scalar> dymat(c.out_ch, b_count * spatial);
  const Scalar* pdy = dy.data();
  for (Index b = 0; b < b_count; ++b)
    for (Index oc = 0; oc < c.out_ch; ++oc) {
      const Scalar* src = pdy + (b * c.out_ch + oc) * spatial;
      for (Index s = 0; s < spatial; ++s) dymat(oc, b * spatial + s) = src[s];
    }

  Matrix<Scalar> cols;
  im2col(x, c.ksize, c.pad, cols);

  dweight = Tensor<Scalar>({c.out_ch, patch});
  row_map(dweight, c.out_ch, patch) = dymat * cols.transpose();
  dbias = Tensor<Scalar>({c.out_ch});
  Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>(dbias.data(), c.out_ch) =
      dymat.rowwise().sum();

  auto wmap = row_map(c.weight, c.out_ch, patch);
  Matrix<Scalar> dcols = wmap.transpose() * dymat;  // [patch, B*ho*wo]

  Tensor<Scalar> dx(x.shape());
  Scalar* pdx = dx.data();
  Index m = 0;
  for (Index b = 0; b < b_count; ++b) {
    for (Index oh = 0; oh < ho; ++oh) {
      for (Index ow = 0; ow < wo; ++ow, ++m) {
        const Scalar* col = dcols.data() + m * patch;
        Index r = 0;
        for (Index ci = 0; ci < c.in_ch; ++ci) {
          Scalar* plane = pdx + (b * c.in_ch + ci) * h * w;
          for (Index ki = 0; ki < c.ksize; ++ki) {
            const Index ih = oh - c.pad + ki;
            if (ih < 0 || ih >= h) {
              r += c.ksize;
              continue;
            }
            Scalar* row = plane + ih * w;
            for (Index kj = 0; kj < c.ksize; ++kj, ++r) {
              const Index iw = ow - c.pad + kj;
              if (iw >= 0 && iw < w) row[iw] += col[r];
            }
          }
        }
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// relu

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& x) {
  Tensor<Scalar> y;
  y.assign(x.shape(), x.array().max(Scalar(0)));
  return y;
}

// `pre` is the forward input (pre-activation). Subgradient at 0 is 0.
template <typename Scalar>
Tensor<Scalar> relu_backward(const Tensor<Scalar>& pre, const Tensor<Scalar>& dy) {
  require_shape(dy, pre.shape(), "relu_backward upstream gradient");
  Tensor<Scalar> dx;
  dx.assign(pre.shape(), (pre.array() > Scalar(0)).select(dy.array(), Scalar(0)));
  return dx;
}

// ---------------------------------------------------------------------------
// maxpool 2x2 stride 2

inline Shape maxpool2_out_shape(const Shape& in) {
  if (in.size() != 4) throw shape_error("maxpool2 expects NCHW input, got " + shape_str(in));
  if (in[2] % 2 != 0 || in[3] % 2 != 0)
    throw shape_error("maxpool2 requires even spatial dims, got " + shape_str(in));
  return {in[0], in[1], in[2] / 2, in[3] / 2};
}

// argmax holds the flat input offset of each output's winner (first max in
// scan order, which keeps backward deterministic).
template <typename Scalar>
Tensor<Scalar> maxpool2(const Tensor<Scalar>& x, std::vector<Index>& argmax) {
  const Shape out_shape = maxpool2_out_shape(x.shape());
  const Index planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  const Index ho = out_shape[2], wo = out_shape[3];
  Tensor<Scalar> y(out_shape);
  argmax.assign(static_cast<std::size_t>(y.size()), 0);
  const Scalar* px = x.data();
  Scalar* py = y.data();
  Index o = 0;
  for (Index p = 0; p < planes; ++p) {
    const Scalar* plane = px + p * h * w;
    const Index base = p * h * w;
    for (Index oh = 0; oh < ho; ++oh) {
      for (Index ow = 0; ow < wo; ++ow, ++o) {
        const Index i0 = (2 * oh) * w + 2 * ow;
        Index best = i0;
        Scalar bv = plane[i0];
        const Index cands[3] = {i0 + 1, i0 + w, i0 + w + 1};
        for (Index cand : cands)
          if (plane[cand] > bv) {
            bv = plane[cand];
            best = cand;
          }
        py[o] = bv;
        argmax[static_cast<std::size_t>(o)] = base + best;
      }
    }
  }
  return y;
}

template <typename Scalar>
Tensor<Scalar> maxpool2_backward(const Shape& in_shape, const std::vector<Index>& argmax,
                                 const Tensor<Scalar>& dy) {
  Tensor<Scalar> dx(in_shape);
  Scalar* pdx = dx.data();
  const Scalar* pdy = dy.data();
  for (Index o = 0; o < dy.size(); ++o) pdx[argmax[static_cast<std::size_t>(o)]] += pdy[o];
  return dx;
}

// ---------------------------------------------------------------------------
// nearest-neighbour 2x upsample

template <typename Scalar>
Tensor<Scalar> upsample2(const Tensor<Scalar>& x) {
  if (x.rank() != 4) throw shape_error("upsample2 expects NCHW input, got " + shape_str(x.shape()));
  const Index planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor<Scalar> y({x.dim(0), x.dim(1), h * 2, w * 2});
  const Scalar* px = x.data();
  Scalar* py = y.data();
  for (Index p = 0; p < planes; ++p) {
    const Scalar* splane = px + p * h * w;
    Scalar* dplane = py + p * 4 * h * w;
    for (Index i = 0; i < h; ++i)
      for (Index j = 0; j < w; ++j) {
        const Scalar v = splane[i * w + j];
        Scalar* d = dplane + (2 * i) * (2 * w) + 2 * j;
        d[0] = v;
        d[1] = v;
        d[2 * w] = v;
        d[2 * w + 1] = v;
      }
  }
  return y;
}

template <typename Scalar>
Tensor<Scalar> upsample2_backward(const Shape& in_shape, const Tensor<Scalar>& dy) {
  const Index planes = in_shape[0] * in_shape[1], h = in_shape[2], w = in_shape[3];
  require_shape(dy, {in_shape[0], in_shape[1], h * 2, w * 2}, "upsample2_backward gradient");
  Tensor<Scalar> dx(in_shape);
  const Scalar* pdy = dy.data();
  Scalar* pdx = dx.data();
  for (Index p = 0; p < planes; ++p) {
    const Scalar* dplane = pdy + p * 4 * h * w;
    Scalar* splane = pdx + p * h * w;
    for (Index i = 0; i < h; ++i)
      for (Index j = 0; j < w; ++j) {
        const Scalar* d = dplane + (2 * i) * (2 * w) + 2 * j;
        splane[i * w + j] = d[0] + d[1] + d[2 * w] + d[2 * w + 1];
      }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// channel concat

template <typename Scalar>
Tensor<Scalar> concat_channels(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.rank() != 4 || b.rank() != 4 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) ||
      a.dim(3) != b.dim(3))
    throw shape_error("concat_channels: incompatible shapes " + shape_str(a.shape()) + " and " +
                      shape_str(b.shape()));
  const Index bn = a.dim(0), ca = a.dim(1), cb = b.dim(1), hw = a.dim(2) * a.dim(3);
  Tensor<Scalar> y({bn, ca + cb, a.dim(2), a.dim(3)});
  Scalar* py = y.data();
  for (Index n = 0; n < bn; ++n) {
    std::copy_n(a.data() + n * ca * hw, ca * hw, py + n * (ca + cb) * hw);
    std::copy_n(b.data() + n * cb * hw, cb * hw, py + n * (ca + cb) * hw + ca * hw);
  }
  return y;
}

template <typename Scalar>
void split_channels_backward(const Tensor<Scalar>& dy, Index ca, Tensor<Scalar>& da,
                             Tensor<Scalar>& db) {
  const Index bn = dy.dim(0), c = dy.dim(1), hw = dy.dim(2) * dy.dim(3);
  const Index cb = c - ca;
  da = Tensor<Scalar>({bn, ca, dy.dim(2), dy.dim(3)});
  db = Tensor<Scalar>({bn, cb, dy.dim(2), dy.dim(3)});
  for (Index n = 0; n < bn; ++n) {
    std::copy_n(dy.data() + n * c * hw, ca * hw, da.data() + n * ca * hw);
    std::copy_n(dy.data() + n * c * hw + ca * hw, cb * hw, db.data() + n * cb * hw);
  }
}

// ---------------------------------------------------------------------------
// global average pool: [B,C,H,W] -> [B,C]

template <typename Scalar>
Tensor<Scalar> global_avg_pool(const Tensor<Scalar>& x) {
  if (x.rank() != 4) throw shape_error("global_avg_pool expects NCHW input");
  const Index bn = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  Tensor<Scalar> y({bn, c});
  const Scalar inv = Scalar(1) / static_cast<Scalar>(hw);
  for (Index p = 0; p < bn * c; ++p) {
    const Scalar* plane = x.data() + p * hw;
    Scalar acc = 0;
    for (Index s = 0; s < hw; ++s) acc += plane[s];
    y[p] = acc * inv;
  }
  return y;
}

template <typename Scalar>
Tensor<Scalar> global_avg_pool_backward(const Shape& in_shape, const Tensor<Scalar>& dy) {
  const Index bn = in_shape[0], c = in_shape[1], hw = in_shape[2] * in_shape[3];
  require_shape(dy, {bn, c}, "global_avg_pool_backward gradient");
  Tensor<Scalar> dx(in_shape);
  const Scalar inv = Scalar(1) / static_cast<Scalar>(hw);
  for (Index p = 0; p < bn * c; ++p) {
    const Scalar g = dy[p] * inv;
    Scalar* plane = dx.data() + p * hw;
    for (Index s = 0; s < hw; ++s) plane[s] = g;
  }
  return dx;
}

// ---------------------------------------------------------------------------
// dense

template <typename Scalar>
struct Dense {
  Tensor<Scalar> weight;  // [out_f, in_f]
  Tensor<Scalar> bias;    // [out_f]
  Index in_f = 0;
  Index out_f = 0;
};

template <typename Scalar>
Dense<Scalar> make_dense(Index in_f, Index out_f) {
  Dense<Scalar> d;
  d.in_f = in_f;
  d.out_f = out_f;
  d.weight = Tensor<Scalar>({out_f, in_f});
  d.bias = Tensor<Scalar>({out_f});
  return d;
}

template <typename Scalar>
Tensor<Scalar> dense(const Dense<Scalar>& d, const Tensor<Scalar>& x) {
  if (x.rank() != 2 || x.dim(1) != d.in_f)
    throw shape_error("dense: expected [B," + std::to_string(d.in_f) + "] input, got " +
                      shape_str(x.shape()));
  const Index bn = x.dim(0);
  Tensor<Scalar> y({bn, d.out_f});
  auto xm = row_map(x, bn, d.in_f);
  auto wm = row_map(d.weight, d.out_f, d.in_f);
  auto bm = Eigen::Map<const Eigen::Matrix<Scalar, 1, Eigen::Dynamic>>(d.bias.data(), d.out_f);
  row_map(y, bn, d.out_f) = (xm * wm.transpose()).rowwise() + bm;
  return y;
}

template <typename Scalar>
Tensor<Scalar> dense_backward(const Dense<Scalar>& d, const Tensor<Scalar>& x,
                              const Tensor<Scalar>& dy, Tensor<Scalar>& dweight,
                              Tensor<Scalar>& dbias) {
  const Index bn = x.dim(0);
  require_shape(dy, {bn, d.out_f}, "dense_backward gradient");
  auto xm = row_map(x, bn, d.in_f);
  auto dym = row_map(dy, bn, d.out_f);
  auto wm = row_map(d.weight, d.out_f, d.in_f);
  dweight = Tensor<Scalar>({d.out_f, d.in_f});
  row_map(dweight, d.out_f, d.in_f) = dym.transpose() * xm;
  dbias = Tensor<Scalar>({d.out_f});
  Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>(dbias.data(), d.out_f) =
      dym.colwise().sum().transpose();
  Tensor<Scalar> dx({bn, d.in_f});
  row_map(dx, bn, d.in_f) = dym * wm;
  return dx;
}

// ---------------------------------------------------------------------------
// sigmoid squash clamped to [eps, 1-eps]

template <typename Scalar>
constexpr Scalar kProbEps = Scalar(1e-7);

template <typename Scalar>
Scalar stable_sigmoid(Scalar z) {
  if (z >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-z));
  const Scalar e = std::exp(z);
  return e / (Scalar(1) + e);
}

// Output lands in the open interval (0,1) in every precision; clamped tails
// carry zero gradient (see sigmoid_backward).
template <typename Scalar>
Tensor<Scalar> sigmoid_clamped(const Tensor<Scalar>& z) {
  Tensor<Scalar> p(z.shape());
  const Scalar lo = kProbEps<Scalar>, hi = Scalar(1) - kProbEps<Scalar>;
  for (Index i = 0; i < z.size(); ++i)
    p[i] = std::min(hi, std::max(lo, stable_sigmoid(z[i])));
  return p;
}

template <typename Scalar>
Tensor<Scalar> sigmoid_backward(const Tensor<Scalar>& p, const Tensor<Scalar>& dp) {
  require_shape(dp, p.shape(), "sigmoid_backward gradient");
  const Scalar lo = kProbEps<Scalar>, hi = Scalar(1) - kProbEps<Scalar>;
  Tensor<Scalar> dz(p.shape());
  for (Index i = 0; i < p.size(); ++i) {
    const Scalar pi = p[i];
    dz[i] = (pi <= lo || pi >= hi) ? Scalar(0) : dp[i] * pi * (Scalar(1) - pi);
  }
  return dz;
}

}  // namespace apga::nn
