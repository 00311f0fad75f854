// SPDX-License-Identifier: Apache-2.0
#include "tensorlm/decomposition.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <string>

#include "tensorlm/svd.hpp"

namespace tensorlm {

namespace {

double tail_energy(const Vector& s, std::size_t keep) {
  double e = 0.0;
  for (std::size_t i = keep; i < s.size(); ++i) e += s[i] * s[i];
  return e;
}

void check_chain(const DecompChain& c, std::size_t order) {
  auto fail = [](const std::string& what) {
    throw Error(ErrorCode::kShapeMismatch, "inconsistent DecompChain: " + what);
  };
  if (order != c.order()) {
    fail("requested order " + std::to_string(order) + " but chain has " +
         std::to_string(c.cores.size()) + " cores");
  }
  if (c.dim == 0) fail("zero mode dimension");
  if (c.u_mat.cols != c.dim) fail("u_mat columns differ from mode dimension");
  if (c.lambda.size() != c.u_mat.rows) fail("lambda length differs from u_mat rows");
  std::size_t inner = c.seed.size();
  if (inner == 0) fail("empty seed");
  for (const auto& g : c.cores) {
    if (g.order() != 3 || g.shape()[1] != c.dim || g.shape()[2] != inner) {
      fail("core shape does not chain");
    }
    inner = g.shape()[0];
  }
  if (inner != c.u_mat.rows) fail("outermost rank differs from u_mat rows");
}

}  // namespace

double DecompChain::total_discarded_energy() const {
  return std::accumulate(discarded_energy.begin(), discarded_energy.end(), 0.0);
}

DecompChain recursive_decompose(const DenseTensor& t, std::size_t rank) {
  if (t.order() < 1) {
    throw Error(ErrorCode::kInvalidArgument, "recursive_decompose needs order >= 1");
  }
  const std::size_t m = t.shape().front();
  for (std::size_t d : t.shape()) {
    if (d != m) {
      throw Error(ErrorCode::kShapeMismatch,
                  "recursive_decompose needs all modes of equal size");
    }
  }
  if (rank < 1 || rank > m) {
    throw Error(ErrorCode::kInvalidArgument,
                "decomposition rank must lie in [1, " + std::to_string(m) + "], got " +
                    std::to_string(rank));
  }

  const std::size_t n = t.order();
  DecompChain chain;
  chain.rank = rank;
  chain.dim = m;

  // Top level: T ≈ X · U with X = left singular vectors scaled by λ.
  const Matrix top_in =
      n == 1 ? Matrix(1, m, {t.data().begin(), t.data().end()}) : matricize_last(t);
  SvdResult top = svd(top_in);
  const std::size_t r_top = std::min(rank, top.rank());
  chain.discarded_energy.push_back(tail_energy(top.singular_values, r_top));
  chain.lambda.assign(top.singular_values.begin(), top.singular_values.begin() + r_top);
  chain.u_mat = Matrix(r_top, m);
  for (std::size_t k = 0; k < r_top; ++k)
    for (std::size_t d = 0; d < m; ++d) chain.u_mat(k, d) = top.v(k, d);

  // x holds S(j) weighted so that its truncation error equals the error in T:
  // rows enumerate (d_1..d_{j-1}), columns enumerate k.
  Matrix x(top_in.rows, r_top);
  for (std::size_t a = 0; a < x.rows; ++a)
    for (std::size_t k = 0; k < r_top; ++k) x(a, k) = top.u(a, k) * top.singular_values[k];

  if (n == 1) {
    // S(1) is the (scalar) left factor itself.
    chain.seed.assign(r_top, 0.0);
    for (std::size_t k = 0; k < r_top; ++k) chain.seed[k] = top.u(0, k);
    return chain;
  }

  std::vector<DenseTensor> cores_outer_first;
  std::size_t r_cur = r_top;
  for (std::size_t j = n; j >= 3; --j) {
    // Same data read as rows (d_1..d_{j-2}) × cols (d_{j-1}, k).
    const std::size_t rows = x.rows / m;
    Matrix unfold(rows, m * r_cur, x.data);
    SvdResult s = svd(unfold);
    const std::size_t r_next = std::min(rank * r_cur, s.rank());
    chain.discarded_energy.push_back(tail_energy(s.singular_values, r_next));

    DenseTensor core = DenseTensor::zeros({r_cur, m, r_next});
    for (std::size_t i = 0; i < r_next; ++i)
      for (std::size_t d = 0; d < m; ++d)
        for (std::size_t k = 0; k < r_cur; ++k)
          core.at({k, d, i}) = s.v(i, d * r_cur + k);
    cores_outer_first.push_back(std::move(core));

    Matrix next(rows, r_next);
    for (std::size_t a = 0; a < rows; ++a)
      for (std::size_t i = 0; i < r_next; ++i)
        next(a, i) = s.u(a, i) * s.singular_values[i];
    x = std::move(next);
    r_cur = r_next;
  }

  // Innermost level: S(2)_k[d_1] = x(d_1, k) against a unit seed.
  DenseTensor inner = DenseTensor::zeros({r_cur, m, 1});
  for (std::size_t d = 0; d < m; ++d)
    for (std::size_t k = 0; k < r_cur; ++k) inner.at({k, d, 0}) = x(d, k);
  cores_outer_first.push_back(std::move(inner));
  chain.seed = {1.0};

  chain.cores.assign(std::make_move_iterator(cores_outer_first.rbegin()),
                     std::make_move_iterator(cores_outer_first.rend()));

  // Undo the λ weighting on the outermost core so S(n)_k is unweighted.
  DenseTensor& outer = chain.cores.back();
  const std::size_t block = outer.size() / r_top;
  auto data = outer.data();
  for (std::size_t k = 0; k < r_top; ++k) {
    const double l = chain.lambda[k];
    for (std::size_t e = 0; e < block; ++e) {
      double& v = data[k * block + e];
      v = l > 0.0 ? v / l : 0.0;
    }
  }
  return chain;
}

DecompChain shared_chain(const Matrix& u_mat, const Matrix& w_mat,
                         std::span<const double> lambda, std::span<const double> seed,
                         std::size_t order) {
  const std::size_t r = u_mat.rows;
  const std::size_t m = u_mat.cols;
  if (order < 1) throw Error(ErrorCode::kInvalidArgument, "order must be >= 1");
  if (w_mat.rows != r || w_mat.cols != r || lambda.size() != r || seed.size() != r) {
    throw Error(ErrorCode::kShapeMismatch, "shared_chain factor dimensions disagree");
  }
  DecompChain chain;
  chain.rank = r;
  chain.dim = m;
  chain.lambda.assign(lambda.begin(), lambda.end());
  chain.u_mat = u_mat;
  chain.seed.assign(seed.begin(), seed.end());

  DenseTensor core = DenseTensor::zeros({r, m, r});
  for (std::size_t k = 0; k < r; ++k)
    for (std::size_t d = 0; d < m; ++d)
      for (std::size_t i = 0; i < r; ++i) core.at({k, d, i}) = w_mat(k, i) * u_mat(i, d);
  chain.cores.assign(order - 1, core);
  return chain;
}

Matrix expand_states(const DecompChain& chain) {
  const std::size_t m = chain.dim;
  Matrix s(chain.seed.size(), 1, chain.seed);
  for (const auto& g : chain.cores) {
    const std::size_t r_out = g.shape()[0];
    const std::size_t r_in = g.shape()[2];
    checked_entry_count(std::array<std::size_t, 3>{r_out, s.cols, m});
    Matrix next(r_out, s.cols * m);
    const auto gd = g.data();
    for (std::size_t k = 0; k < r_out; ++k) {
      for (std::size_t d = 0; d < m; ++d) {
        for (std::size_t i = 0; i < r_in; ++i) {
          const double w = gd[(k * m + d) * r_in + i];
          if (w == 0.0) continue;
          const auto src = s.row(i);
          for (std::size_t a = 0; a < s.cols; ++a) next(k, a * m + d) += w * src[a];
        }
      }
    }
    s = std::move(next);
  }
  return s;
}

DenseTensor reconstruct(const DecompChain& chain, std::size_t order) {
  check_chain(chain, order);
  const std::size_t m = chain.dim;
  const Shape shape(order, m);
  checked_entry_count(shape);

  const Matrix s = expand_states(chain);
  const std::size_t lead = s.cols;
  std::vector<double> out(lead * m, 0.0);
  for (std::size_t k = 0; k < chain.lambda.size(); ++k) {
    const double l = chain.lambda[k];
    const auto row = s.row(k);
    for (std::size_t a = 0; a < lead; ++a) {
      const double w = l * row[a];
      if (w == 0.0) continue;
      for (std::size_t d = 0; d < m; ++d) out[a * m + d] += w * chain.u_mat(k, d);
    }
  }
  return DenseTensor(shape, std::move(out));
}

}  // namespace tensorlm
