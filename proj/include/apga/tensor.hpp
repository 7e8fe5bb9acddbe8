#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "apga/errors.hpp"

namespace apga {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

inline Index shape_count(const Shape& s) {
  Index n = 1;
  for (Index d : s) {
    if (d < 0) throw shape_error("negative dimension in shape");
    n *= d;
  }
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ')';
  return os.str();
}

/// Dense N-dimensional array over a scalar type, stored flat in row-major
/// (last index fastest) order. Image batches use NCHW.
template <typename Scalar>
class Tensor {
 public:
  using ArrayType = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  Tensor() = default;

  explicit Tensor(Shape shape)
      : shape_(std::move(shape)), data_(ArrayType::Zero(shape_count(shape_))) {}

  Tensor(Shape shape, Scalar fill)
      : shape_(std::move(shape)),
        data_(ArrayType::Constant(shape_count(shape_), fill)) {}

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, Scalar v) { return Tensor(std::move(shape), v); }

  static Tensor from(Shape shape, std::initializer_list<Scalar> values) {
    Tensor t(std::move(shape));
    if (static_cast<Index>(values.size()) != t.size())
      throw shape_error("initializer size does not match shape " + shape_str(t.shape_));
    Index i = 0;
    for (Scalar v : values) t.data_[i++] = v;
    return t;
  }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index dim(Index i) const { return shape_.at(static_cast<std::size_t>(i)); }
  Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  Scalar& operator[](Index i) { return data_[i]; }
  Scalar operator[](Index i) const { return data_[i]; }

  /// Flat storage as an Eigen array; the main hook for expression-style math.
  ArrayType& array() { return data_; }
  const ArrayType& array() const { return data_; }

  /// Reinterprets the flat storage with a new shape of equal element count.
  void set_shape(Shape shape) {
    if (shape_count(shape) != size())
      throw shape_error("set_shape " + shape_str(shape) + " does not preserve size");
    shape_ = std::move(shape);
  }

  Tensor reshaped(Shape shape) const {
    Tensor t = *this;
    t.set_shape(std::move(shape));
    return t;
  }

  template <typename Other>
  Tensor<Other> cast() const {
    Tensor<Other> t;
    t.assign(shape_, data_.template cast<Other>());
    return t;
  }

  template <typename Expr>
  void assign(const Shape& shape, const Expr& e) {
    shape_ = shape;
    data_ = e;
    if (data_.size() != shape_count(shape_))
      throw shape_error("expression size does not match shape " + shape_str(shape_));
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

 private:
  Shape shape_;
  ArrayType data_;
};

template <typename Scalar>
using RowMatrixMap =
    Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename Scalar>
using ConstRowMatrixMap =
    Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

/// Views a tensor's flat data as a rows x cols row-major matrix.
template <typename Scalar>
RowMatrixMap<Scalar> row_map(Tensor<Scalar>& t, Index rows, Index cols) {
  if (rows * cols != t.size())
    throw shape_error("row_map " + std::to_string(rows) + "x" + std::to_string(cols) +
                      " does not cover tensor of size " + std::to_string(t.size()));
  return RowMatrixMap<Scalar>(t.data(), rows, cols);
}

template <typename Scalar>
ConstRowMatrixMap<Scalar> row_map(const Tensor<Scalar>& t, Index rows, Index cols) {
  if (rows * cols != t.size())
    throw shape_error("row_map " + std::to_string(rows) + "x" + std::to_string(cols) +
                      " does not cover tensor of size " + std::to_string(t.size()));
  return ConstRowMatrixMap<Scalar>(t.data(), rows, cols);
}

template <typename Scalar>
bool all_finite(const Tensor<Scalar>& t) {
  return t.array().isFinite().all();
}

template <typename Scalar>
void require_finite(const Tensor<Scalar>& t, const std::string& what) {
  if (!all_finite(t)) throw numeric_error("non-finite values in " + what);
}

template <typename Scalar>
void require_shape(const Tensor<Scalar>& t, const Shape& shape, const std::string& what) {
  if (t.shape() != shape)
    throw shape_error(what + ": expected shape " + shape_str(shape) + ", got " +
                      shape_str(t.shape()));
}

template <typename Scalar>
Scalar min_value(const Tensor<Scalar>& t) {
  return t.array().minCoeff();
}

template <typename Scalar>
Scalar max_value(const Tensor<Scalar>& t) {
  return t.array().maxCoeff();
}

template <typename Scalar>
double sum_value(const Tensor<Scalar>& t) {
  return t.array().template cast<double>().sum();
}

template <typename Scalar>
double mean_value(const Tensor<Scalar>& t) {
  if (t.size() == 0) throw shape_error("mean of empty tensor");
  return sum_value(t) / static_cast<double>(t.size());
}

template <typename Scalar>
bool bit_equal(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.shape() != b.shape()) return false;
  return std::memcmp(a.data(), b.data(), sizeof(Scalar) * static_cast<std::size_t>(a.size())) == 0;
}

inline Index nchw_index(Index c_count, Index h_count, Index w_count, Index n, Index c,
                        Index h, Index w) {
  return ((n * c_count + c) * h_count + h) * w_count + w;
}

}  // namespace apga
