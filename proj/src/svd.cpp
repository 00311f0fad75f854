// SPDX-License-Identifier: Apache-2.0
#include "tensorlm/svd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tensorlm {

namespace {

constexpr double kOffDiagonalTol = 1e-12;
constexpr int kMaxSweeps = 100;

// Hestenes one-sided Jacobi on a tall matrix (rows >= cols). On return the
// columns of `a` are mutually orthogonal and a_in = a_out · vᵀ.
void orthogonalize_columns(Matrix& a, Matrix& v) {
  const std::size_t m = a.rows;
  const std::size_t n = a.cols;
  v = Matrix::identity(n);

  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          const double ap = a(i, p), aq = a(i, q);
          alpha += ap * ap;
          beta += aq * aq;
          gamma += ap * aq;
        }
        if (gamma == 0.0 ||
            std::abs(gamma) <= kOffDiagonalTol * std::sqrt(alpha) * std::sqrt(beta)) {
          continue;
        }
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) /
                         (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double ap = a(i, p), aq = a(i, q);
          a(i, p) = c * ap - s * aq;
          a(i, q) = s * ap + c * aq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vp = v(i, p), vq = v(i, q);
          v(i, p) = c * vp - s * vq;
          v(i, q) = s * vp + c * vq;
        }
      }
    }
    if (!rotated) return;
  }
  throw Error(ErrorCode::kNumerical, "Jacobi SVD did not converge");
}

// Replaces column j of u by a unit vector orthogonal to columns [0, j).
void complete_column(Matrix& u, std::size_t j) {
  const std::size_t m = u.rows;
  Vector best;
  double best_norm = -1.0;
  for (std::size_t e = 0; e < m; ++e) {
    Vector x(m, 0.0);
    x[e] = 1.0;
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < j; ++k) {
        double proj = 0.0;
        for (std::size_t i = 0; i < m; ++i) proj += u(i, k) * x[i];
        for (std::size_t i = 0; i < m; ++i) x[i] -= proj * u(i, k);
      }
    }
    const double nrm = std::sqrt(dot(x, x));
    if (nrm > best_norm) {
      best_norm = nrm;
      best = std::move(x);
    }
  }
  for (std::size_t i = 0; i < m; ++i) u(i, j) = best[i] / best_norm;
}

SvdResult svd_tall(const Matrix& input) {
  Matrix a = input;
  Matrix v;
  orthogonalize_columns(a, v);

  const std::size_t m = a.rows;
  const std::size_t n = a.cols;
  Vector sigma(n);
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += a(i, j) * a(i, j);
    sigma[j] = std::sqrt(s);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  SvdResult out{Matrix(m, n), Vector(n), Matrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    out.singular_values[k] = sigma[j];
    for (std::size_t i = 0; i < n; ++i) out.v(k, i) = v(i, j);
    if (sigma[j] > 0.0) {
      for (std::size_t i = 0; i < m; ++i) out.u(i, k) = a(i, j) / sigma[j];
    }
  }
  // Zero singular values sort last; give them orthonormal partners.
  for (std::size_t k = 0; k < n; ++k) {
    if (out.singular_values[k] == 0.0) complete_column(out.u, k);
  }
  return out;
}

void normalize_signs(SvdResult& s) {
  for (std::size_t k = 0; k < s.rank(); ++k) {
    std::size_t arg = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < s.u.rows; ++i) {
      if (std::abs(s.u(i, k)) > best) {
        best = std::abs(s.u(i, k));
        arg = i;
      }
    }
    if (s.u(arg, k) < 0.0) {
      for (std::size_t i = 0; i < s.u.rows; ++i) s.u(i, k) = -s.u(i, k);
      for (std::size_t j = 0; j < s.v.cols; ++j) s.v(k, j) = -s.v(k, j);
    }
  }
}

}  // namespace

SvdResult svd(const Matrix& a) {
  if (a.rows == 0 || a.cols == 0) {
    throw Error(ErrorCode::kInvalidArgument, "svd of an empty matrix");
  }
  for (double x : a.data) {
    if (!std::isfinite(x)) {
      throw Error(ErrorCode::kNumerical, "svd input contains non-finite entries");
    }
  }

  SvdResult out;
  if (a.rows >= a.cols) {
    out = svd_tall(a);
  } else {
    SvdResult t = svd_tall(a.transposed());
    out.u = t.v.transposed();
    out.singular_values = std::move(t.singular_values);
    out.v = t.u.transposed();
  }
  normalize_signs(out);
  return out;
}

Matrix svd_reconstruct(const SvdResult& s) {
  Matrix scaled = s.u;
  for (std::size_t i = 0; i < scaled.rows; ++i)
    for (std::size_t k = 0; k < scaled.cols; ++k) scaled(i, k) *= s.singular_values[k];
  return matmul(scaled, s.v);
}

}  // namespace tensorlm
