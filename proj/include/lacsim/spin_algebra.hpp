#pragma once

// Dense complex linear algebra and angular-momentum operators.
//
// Every multi-spin basis in the toolkit is a tensor product of single-spin
// bases ordered m = +s, s-1, ..., -s, with the first factor varying slowest.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include "lacsim/error.hpp"

namespace lacsim {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

inline constexpr double kTwoPi = 6.283185307179586476925286766559;
inline constexpr Complex kI{0.0, 1.0};

struct SpinMatrices {
  ComplexMatrix x;
  ComplexMatrix y;
  ComplexMatrix z;
};

/// Angular-momentum matrices for spin s in {1/2, 1, 3}.
inline SpinMatrices spin_matrices(double s) {
  const bool supported = s == 0.5 || s == 1.0 || s == 3.0;
  if (!supported) throw Error("unsupported spin: " + std::to_string(s));
  const int n = static_cast<int>(std::lround(2.0 * s)) + 1;
  ComplexMatrix raise = ComplexMatrix::Zero(n, n);
  ComplexMatrix sz = ComplexMatrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const double m = s - i;
    sz(i, i) = m;
    if (i > 0) raise(i - 1, i) = std::sqrt(s * (s + 1.0) - m * (m + 1.0));
  }
  const ComplexMatrix lower = raise.adjoint();
  SpinMatrices out;
  out.x = 0.5 * (raise + lower);
  out.y = Complex(0.0, -0.5) * (raise - lower);
  out.z = std::move(sz);
  return out;
}

inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  return Eigen::kroneckerProduct(a, b).eval();
}

/// Lifts `op` onto factor `slot` of a tensor product with subsystem sizes `dims`.
inline ComplexMatrix embed(const ComplexMatrix& op, std::size_t slot,
                           const std::vector<int>& dims) {
  if (slot >= dims.size()) throw Error("embed: slot out of range");
  if (op.rows() != op.cols() || op.rows() != dims[slot]) {
    throw Error("embed: dimension mismatch");
  }
  ComplexMatrix out = ComplexMatrix::Identity(1, 1);
  for (std::size_t k = 0; k < dims.size(); ++k) {
    out = k == slot ? kron(out, op) : kron(out, ComplexMatrix::Identity(dims[k], dims[k]));
  }
  return out;
}

inline double hermiticity_defect(const ComplexMatrix& m) {
  return (m - m.adjoint()).norm();
}

inline bool is_hermitian(const ComplexMatrix& m, double rel_tol = 1e-12) {
  if (m.rows() != m.cols()) return false;
  return hermiticity_defect(m) <= rel_tol * m.norm();
}

struct EigenSystem {
  RealVector values;      // ascending
  ComplexMatrix vectors;  // column k pairs with values[k]
};

namespace detail {

// Fixes the arbitrary phase of each eigenvector: the first component whose
// magnitude is within 1e-9 of the column maximum is made real and positive.
inline void canonicalize_phases(ComplexMatrix& vectors) {
  for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
    const double peak = vectors.col(c).cwiseAbs().maxCoeff();
    for (Eigen::Index r = 0; r < vectors.rows(); ++r) {
      const double mag = std::abs(vectors(r, c));
      if (mag >= peak - 1e-9) {
        vectors.col(c) *= std::conj(vectors(r, c)) / mag;
        break;
      }
    }
  }
}

inline void require_hermitian(const ComplexMatrix& m, const char* who) {
  if (m.rows() != m.cols()) throw Error(std::string(who) + ": matrix is not square");
  if (hermiticity_defect(m) > 1e-10 * m.norm()) {
    throw Error(std::string(who) + ": matrix is not Hermitian");
  }
}

}  // namespace detail

inline EigenSystem hermitian_eig(const ComplexMatrix& m) {
  detail::require_hermitian(m, "hermitian_eig");
  const ComplexMatrix sym = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(sym);
  if (solver.info() != Eigen::Success) throw Error("hermitian_eig: solver failed");
  EigenSystem out{solver.eigenvalues(), solver.eigenvectors()};
  detail::canonicalize_phases(out.vectors);
  return out;
}

/// Index sets of the connected components of the graph whose edges are the
/// off-diagonal entries of `m` above `rel_cutoff * max|m|`. Components are
/// ordered by their smallest index.
inline std::vector<std::vector<int>> connected_blocks(const ComplexMatrix& m,
                                                     double rel_cutoff = 1e-13) {
  const int n = static_cast<int>(m.rows());
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  const double cutoff = rel_cutoff * (n > 0 ? m.cwiseAbs().maxCoeff() : 0.0);
  for (int r = 0; r < n; ++r) {
    for (int c = r + 1; c < n; ++c) {
      if (std::abs(m(r, c)) > cutoff || std::abs(m(c, r)) > cutoff) {
        const int a = find(r), b = find(c);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }
    }
  }
  std::vector<std::vector<int>> blocks;
  std::vector<int> slot(n, -1);
  for (int i = 0; i < n; ++i) {
    const int root = find(i);
    if (slot[root] < 0) {
      slot[root] = static_cast<int>(blocks.size());
      blocks.emplace_back();
    }
    blocks[slot[root]].push_back(i);
  }
  return blocks;
}

/// Hermitian eigendecomposition performed separately on each connected block.
/// Eigenvectors never mix states that the matrix does not couple, so
/// degenerate levels from uncoupled sectors stay sector-pure.
inline EigenSystem block_hermitian_eig(const ComplexMatrix& m) {
  detail::require_hermitian(m, "block_hermitian_eig");
  const auto n = m.rows();
  RealVector values(n);
  ComplexMatrix vectors = ComplexMatrix::Zero(n, n);
  Eigen::Index col = 0;
  for (const auto& block : connected_blocks(m)) {
    const auto k = static_cast<Eigen::Index>(block.size());
    ComplexMatrix sub(k, k);
    for (Eigen::Index i = 0; i < k; ++i)
      for (Eigen::Index j = 0; j < k; ++j) sub(i, j) = m(block[i], block[j]);
    const EigenSystem part = hermitian_eig(sub);
    for (Eigen::Index c = 0; c < k; ++c, ++col) {
      values[col] = part.values[c];
      for (Eigen::Index i = 0; i < k; ++i) vectors(block[i], col) = part.vectors(i, c);
    }
  }
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](auto a, auto b) { return values[a] < values[b]; });
  EigenSystem out{RealVector(n), ComplexMatrix(n, n)};
  for (Eigen::Index c = 0; c < n; ++c) {
    out.values[c] = values[order[c]];
    out.vectors.col(c) = vectors.col(order[c]);
  }
  return out;
}

}  // namespace lacsim
