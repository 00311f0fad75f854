// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "tensorlm/error.hpp"

namespace tensorlm {

using Shape = std::vector<std::size_t>;
using Vector = std::vector<double>;

/// Arbitrary-order real tensor stored row-major (last index fastest).
/// An order-0 tensor is a scalar with exactly one entry.
class DenseTensor {
 public:
  DenseTensor() : data_(1, 0.0) {}
  DenseTensor(Shape shape, std::vector<double> data);

  static DenseTensor zeros(Shape shape);
  static DenseTensor filled(Shape shape, double value);
  static DenseTensor scalar(double value);
  static DenseTensor vector(std::span<const double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t order() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  double at(std::span<const std::size_t> index) const;
  double at(std::initializer_list<std::size_t> index) const {
    return at(std::span<const std::size_t>(index.begin(), index.size()));
  }
  double& at(std::span<const std::size_t> index);
  double& at(std::initializer_list<std::size_t> index) {
    return at(std::span<const std::size_t>(index.begin(), index.size()));
  }

  /// Row-major flat offset of a multi-index. Throws on out-of-range indices.
  std::size_t offset(std::span<const std::size_t> index) const;

  /// Same data viewed under a different shape with equal entry count.
  DenseTensor reshaped(Shape shape) const;

  friend bool operator==(const DenseTensor&, const DenseTensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Product of the dimensions, checked against kMaxDenseEntries.
std::size_t checked_entry_count(std::span<const std::size_t> shape);

/// Row-major dense matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> values);

  static Matrix identity(std::size_t n);

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const {
    return data[i * cols + j];
  }
  std::span<const double> row(std::size_t i) const {
    return {data.data() + i * cols, cols};
  }
  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }

  Matrix transposed() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

Matrix matmul(const Matrix& a, const Matrix& b);
Vector matvec(const Matrix& a, std::span<const double> x);
/// aᵀ·x without materializing the transpose.
Vector matvec_transposed(const Matrix& a, std::span<const double> x);
double frobenius_norm(const Matrix& a);
double dot(std::span<const double> a, std::span<const double> b);

/// Entry (i.., j..) = a[i..]·b[j..]; shape is the concatenation.
DenseTensor tensor_product(const DenseTensor& a, const DenseTensor& b);

/// v₁ ⊗ v₂ ⊗ … ⊗ vₙ. Requires at least one vector.
DenseTensor rank_one(std::span<const Vector> vectors);

/// Sum of elementwise products; shapes must match exactly.
double inner_product(const DenseTensor& a, const DenseTensor& b);

/// Order-n tensor over dimension m that is 1 on the super-diagonal.
DenseTensor delta_tensor(std::size_t order, std::size_t dim);

/// Unfold along the last mode: (m₁·…·mₙ₋₁) × mₙ.
Matrix matricize_last(const DenseTensor& t);

/// Inverse of matricize_last for a known target shape.
DenseTensor fold_last(const Matrix& m, Shape shape);

/// Contracts every mode of `t` except the last with one vector each,
/// returning a vector of length shape.back(). Vectors pair with leading
/// modes in order.
Vector contract_leading(const DenseTensor& t, std::span<const Vector> vectors);

}  // namespace tensorlm
