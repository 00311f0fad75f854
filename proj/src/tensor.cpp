// SPDX-License-Identifier: Apache-2.0
#include "tensorlm/tensor.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace tensorlm {

namespace {

std::string shape_string(std::span<const std::size_t> shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

}  // namespace

std::size_t checked_entry_count(std::span<const std::size_t> shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d == 0) {
      throw Error(ErrorCode::kInvalidArgument,
                  "tensor mode dimension must be positive, got shape " +
                      shape_string(shape));
    }
    if (n > kMaxDenseEntries / d) {
      throw Error(ErrorCode::kResourceLimit,
                  "dense tensor of shape " + shape_string(shape) +
                      " exceeds the entry limit");
    }
    n *= d;
  }
  return n;
}

DenseTensor::DenseTensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (checked_entry_count(shape_) != data_.size()) {
    throw Error(ErrorCode::kShapeMismatch,
                "data length " + std::to_string(data_.size()) +
                    " does not match shape " + shape_string(shape_));
  }
}

DenseTensor DenseTensor::zeros(Shape shape) { return filled(std::move(shape), 0.0); }

DenseTensor DenseTensor::filled(Shape shape, double value) {
  const std::size_t n = checked_entry_count(shape);
  return DenseTensor(std::move(shape), std::vector<double>(n, value));
}

DenseTensor DenseTensor::scalar(double value) { return DenseTensor({}, {value}); }

DenseTensor DenseTensor::vector(std::span<const double> values) {
  return DenseTensor({values.size()}, {values.begin(), values.end()});
}

std::size_t DenseTensor::offset(std::span<const std::size_t> index) const {
  if (index.size() != shape_.size()) {
    throw Error(ErrorCode::kShapeMismatch,
                "index of length " + std::to_string(index.size()) +
                    " used on order-" + std::to_string(shape_.size()) + " tensor");
  }
  std::size_t off = 0;
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= shape_[i]) {
      throw Error(ErrorCode::kInvalidArgument, "tensor index out of range");
    }
    off = off * shape_[i] + index[i];
  }
  return off;
}

double DenseTensor::at(std::span<const std::size_t> index) const {
  return data_[offset(index)];
}

double& DenseTensor::at(std::span<const std::size_t> index) {
  return data_[offset(index)];
}

DenseTensor DenseTensor::reshaped(Shape shape) const {
  return DenseTensor(std::move(shape), data_);
}

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> values)
    : rows(r), cols(c), data(std::move(values)) {
  if (data.size() != r * c) {
    throw Error(ErrorCode::kShapeMismatch, "matrix data length mismatch");
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::transposed() const {
  Matrix t(cols, rows);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) t(j, i) = (*this)(i, j);
  return t;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) {
    throw Error(ErrorCode::kShapeMismatch, "matmul inner dimensions differ");
  }
  Matrix c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols; ++j) c(i, j) += aik * b(k, j);
    }
  }
  return c;
}

Vector matvec(const Matrix& a, std::span<const double> x) {
  if (a.cols != x.size()) {
    throw Error(ErrorCode::kShapeMismatch, "matvec dimension mismatch");
  }
  Vector y(a.rows, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i) y[i] = dot(a.row(i), x);
  return y;
}

Vector matvec_transposed(const Matrix& a, std::span<const double> x) {
  if (a.rows != x.size()) {
    throw Error(ErrorCode::kShapeMismatch, "matvec_transposed dimension mismatch");
  }
  Vector y(a.cols, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double xi = x[i];
    const auto row = a.row(i);
    for (std::size_t j = 0; j < a.cols; ++j) y[j] += row[j] * xi;
  }
  return y;
}

double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  for (double v : a.data) s += v * v;
  return std::sqrt(s);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

DenseTensor tensor_product(const DenseTensor& a, const DenseTensor& b) {
  Shape shape = a.shape();
  shape.insert(shape.end(), b.shape().begin(), b.shape().end());
  const std::size_t n = checked_entry_count(shape);
  std::vector<double> data;
  data.reserve(n);
  for (double x : a.data())
    for (double y : b.data()) data.push_back(x * y);
  return DenseTensor(std::move(shape), std::move(data));
}

DenseTensor rank_one(std::span<const Vector> vectors) {
  if (vectors.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "rank_one needs at least one vector");
  }
  Shape shape;
  for (const auto& v : vectors) shape.push_back(v.size());
  const std::size_t n = checked_entry_count(shape);

  // Expand one mode at a time; the running block is the product of the
  // vectors seen so far.
  std::vector<double> data(vectors[0].begin(), vectors[0].end());
  data.reserve(n);
  for (std::size_t k = 1; k < vectors.size(); ++k) {
    const auto& v = vectors[k];
    std::vector<double> next;
    next.reserve(data.size() * v.size());
    for (double x : data)
      for (double y : v) next.push_back(x * y);
    data = std::move(next);
  }
  return DenseTensor(std::move(shape), std::move(data));
}

double inner_product(const DenseTensor& a, const DenseTensor& b) {
  if (a.shape() != b.shape()) {
    throw Error(ErrorCode::kShapeMismatch,
                "inner_product of shapes " + shape_string(a.shape()) + " and " +
                    shape_string(b.shape()));
  }
  return dot(a.data(), b.data());
}

DenseTensor delta_tensor(std::size_t order, std::size_t dim) {
  if (order < 1 || dim < 1) {
    throw Error(ErrorCode::kInvalidArgument, "delta_tensor needs order, dim >= 1");
  }
  DenseTensor t = DenseTensor::zeros(Shape(order, dim));
  // Offset of (i,…,i) is i·(1 + m + … + m^(n-1)).
  std::size_t stride = 0;
  std::size_t p = 1;
  for (std::size_t k = 0; k < order; ++k, p *= dim) stride += p;
  auto data = t.data();
  for (std::size_t i = 0; i < dim; ++i) data[i * stride] = 1.0;
  return t;
}

Matrix matricize_last(const DenseTensor& t) {
  if (t.order() < 2) {
    throw Error(ErrorCode::kInvalidArgument,
                "matricize_last needs order >= 2, got " + std::to_string(t.order()));
  }
  const std::size_t cols = t.shape().back();
  const std::size_t rows = t.size() / cols;
  return Matrix(rows, cols, {t.data().begin(), t.data().end()});
}

DenseTensor fold_last(const Matrix& m, Shape shape) {
  if (shape.empty() || shape.back() != m.cols) {
    throw Error(ErrorCode::kShapeMismatch, "fold_last: column count differs from last mode");
  }
  return DenseTensor(std::move(shape), m.data);
}

Vector contract_leading(const DenseTensor& t, std::span<const Vector> vectors) {
  if (t.order() != vectors.size() + 1) {
    throw Error(ErrorCode::kShapeMismatch,
                "contract_leading: tensor order must be one more than vector count");
  }
  for (std::size_t k = 0; k < vectors.size(); ++k) {
    if (vectors[k].size() != t.shape()[k]) {
      throw Error(ErrorCode::kShapeMismatch, "contract_leading: vector length mismatch");
    }
  }
  // Contract the leading mode repeatedly: block of size rest is weighted by
  // v[d] and summed.
  std::vector<double> cur(t.data().begin(), t.data().end());
  for (const auto& v : vectors) {
    const std::size_t rest = cur.size() / v.size();
    std::vector<double> next(rest, 0.0);
    for (std::size_t d = 0; d < v.size(); ++d) {
      const double w = v[d];
      const double* block = cur.data() + d * rest;
      for (std::size_t j = 0; j < rest; ++j) next[j] += w * block[j];
    }
    cur = std::move(next);
  }
  return cur;
}

}  // namespace tensorlm
