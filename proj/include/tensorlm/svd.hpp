// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tensorlm/tensor.hpp"

namespace tensorlm {

/// Thin SVD a = u · diag(singular_values) · v with k = min(rows, cols).
/// u is rows×k with orthonormal columns, v is k×cols with orthonormal rows.
struct SvdResult {
  Matrix u;
  Vector singular_values;
  Matrix v;

  std::size_t rank() const noexcept { return singular_values.size(); }
};

/// One-sided Jacobi SVD. Singular values are sorted nonincreasing; each pair
/// (u_i, v_i) is sign-normalized so the largest-magnitude entry of u_i is
/// positive (first such entry on exact ties). Equal singular values keep the
/// order the sweep produced them in, so ties are deterministic for a given
/// input but not canonical.
///
/// Throws ErrorCode::kNumerical on non-finite input.
SvdResult svd(const Matrix& a);

/// u · diag(s) · v
Matrix svd_reconstruct(const SvdResult& s);

}  // namespace tensorlm
