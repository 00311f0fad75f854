// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "tensorlm/tensor.hpp"

namespace tensorlm {

/// Recursive decomposition of an order-n tensor with all modes of size m:
///
///   T          = Σ_i λ_i S(n)_i ⊗ u_i
///   S(j)_k     = Σ_i G_j[k, d, i] · S(j-1)_i ⊗ e_d        (j = 2..n)
///   S(1)_i     = seed_i
///
/// `cores` holds G_2 … G_n in that order; G_j has shape
/// (rank of S(j), m, rank of S(j-1)). The shared-factor form used by the
/// recurrent model is the special case G[k, d, i] = W[k, i]·U[i, d] with a
/// single U and W at every level (see shared_chain).
struct DecompChain {
  std::size_t rank = 0;  // truncation rank the chain was built with
  std::size_t dim = 0;   // mode size m
  Vector lambda;         // top-level weights, one per row of u_mat
  Matrix u_mat;          // top-level factor, rows are u_i
  std::vector<DenseTensor> cores;
  Vector seed;
  /// Σ of squared singular values dropped at each truncation, top level first.
  /// Empty for chains not produced by recursive_decompose.
  Vector discarded_energy;

  std::size_t order() const noexcept { return cores.size() + 1; }
  double total_discarded_energy() const;
};

/// TT-SVD style decomposition peeling the last mode first. The top level keeps
/// at most `rank` components; each deeper level keeps at most `rank` times the
/// rank of the level above it, which is what decomposing every S(n)_k
/// separately at rank r would span. With rank == m the decomposition is exact.
///
/// ‖T - reconstruct(chain)‖²_F equals chain.total_discarded_energy() up to
/// rounding.
DecompChain recursive_decompose(const DenseTensor& t, std::size_t rank);

/// Builds the chain Σ_i λ_i S(n)_i ⊗ u_i where every level reuses the same
/// U (r×m) and W (r×r).
DecompChain shared_chain(const Matrix& u_mat, const Matrix& w_mat,
                         std::span<const double> lambda, std::span<const double> seed,
                         std::size_t order);

/// Materializes the order-`order` tensor described by `chain`.
DenseTensor reconstruct(const DecompChain& chain, std::size_t order);

/// Rows are S(n)_k flattened (row-major over d_1..d_{n-1}); for order 1 this
/// is the seed as an r×1 matrix. Used by reconstruct and by the model's
/// parameter-tensor builder.
Matrix expand_states(const DecompChain& chain);

}  // namespace tensorlm
