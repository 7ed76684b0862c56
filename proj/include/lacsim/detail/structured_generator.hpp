#pragma once

// Matrix-free machinery for Lindblad generators whose jump operators are all
// single transitions c|i><j|. Such a generator splits into
//
//   L(rho) = -i 2pi (K rho - rho K^+) + 2pi Diag(G diag(rho)),
//   K = H - (i/2) diag(r),
//
// where r_j is the total out-rate of state j and G is the population gain
// matrix. K is block diagonal over the connected components of H, so the
// implicit-Euler systems X - a L(X) = B reduce to triangular Lyapunov solves in the
// Schur basis of each block plus one dense solve on the populations.

#include <algorithm>
#include <vector>

#include <Eigen/Eigenvalues>

#include "lacsim/lindblad.hpp"

namespace lacsim::detail {

// Solves U1 Y + Y U2^+ = C for upper-triangular U1, U2.
inline ComplexMatrix triangular_lyapunov(const ComplexMatrix& u1, const ComplexMatrix& u2,
                                         const ComplexMatrix& c) {
  const Eigen::Index m1 = u1.rows(), m2 = u2.rows();
  ComplexMatrix y(m1, m2);
  ComplexVector rhs(m1);
  for (Eigen::Index j = m2 - 1; j >= 0; --j) {
    rhs = c.col(j);
    const Eigen::Index tail = m2 - 1 - j;
    if (tail > 0) {
      rhs.noalias() -= y.rightCols(tail) * u2.row(j).tail(tail).adjoint();
    }
    const Complex shift = std::conj(u2(j, j));
    for (Eigen::Index i = m1 - 1; i >= 0; --i) {
      Complex acc = rhs[i];
      for (Eigen::Index k = i + 1; k < m1; ++k) acc -= u1(i, k) * y(k, j);
      y(i, j) = acc / (u1(i, i) + shift);
    }
  }
  return y;
}

class StructuredGenerator {
 public:
  static bool supports(const std::vector<JumpOperator>& jumps) {
    return std::all_of(jumps.begin(), jumps.end(),
                       [](const JumpOperator& j) { return j.single_entry(); });
  }

  StructuredGenerator(const ComplexMatrix& h, const std::vector<JumpOperator>& jumps) {
    n_ = h.rows();
    check_generator_dims(h, jumps, n_);
    if (!supports(jumps)) throw Error("structured generator needs single-transition jumps");

    blocks_ = connected_blocks(h);
    perm_.reserve(n_);
    for (const auto& b : blocks_) {
      offsets_.push_back(static_cast<Eigen::Index>(perm_.size()));
      perm_.insert(perm_.end(), b.begin(), b.end());
    }
    offsets_.push_back(n_);
    inverse_.assign(n_, 0);
    for (Eigen::Index k = 0; k < n_; ++k) inverse_[perm_[k]] = static_cast<int>(k);

    decay_ = RealVector::Zero(n_);
    gain_ = RealMatrix::Zero(n_, n_);
    for (const auto& j : jumps) {
      const auto& e = j.entries.front();
      const double w = j.rate * std::norm(e.value);
      decay_[inverse_[e.col]] += w;
      gain_(inverse_[e.row], inverse_[e.col]) += w;
    }

    for (std::size_t c = 0; c < blocks_.size(); ++c) {
      const Eigen::Index off = offsets_[c], size = offsets_[c + 1] - off;
      ComplexMatrix k(size, size);
      for (Eigen::Index a = 0; a < size; ++a)
        for (Eigen::Index b = 0; b < size; ++b) k(a, b) = h(perm_[off + a], perm_[off + b]);
      for (Eigen::Index a = 0; a < size; ++a) k(a, a) -= Complex(0.0, 0.5 * decay_[off + a]);
      Eigen::ComplexSchur<ComplexMatrix> schur(k);
      k_blocks_.push_back(k);
      schur_q_.push_back(schur.matrixU());
      schur_t_.push_back(schur.matrixT());
    }
  }

  Eigen::Index dim() const { return n_; }

  ComplexMatrix to_internal(const ComplexMatrix& rho) const {
    ComplexMatrix out(n_, n_);
    for (Eigen::Index a = 0; a < n_; ++a)
      for (Eigen::Index b = 0; b < n_; ++b) out(a, b) = rho(perm_[a], perm_[b]);
    return out;
  }

  ComplexMatrix to_external(const ComplexMatrix& x) const {
    ComplexMatrix out(n_, n_);
    for (Eigen::Index a = 0; a < n_; ++a)
      for (Eigen::Index b = 0; b < n_; ++b) out(perm_[a], perm_[b]) = x(a, b);
    return out;
  }

  /// Generator applied in the internal (block-permuted) ordering.
  ComplexMatrix apply(const ComplexMatrix& x) const {
    ComplexMatrix out(n_, n_);
    for (std::size_t c = 0; c < blocks_.size(); ++c) {
      const Eigen::Index off = offsets_[c], size = offsets_[c + 1] - off;
      out.middleRows(off, size).noalias() = -kI * (k_blocks_[c] * x.middleRows(off, size));
    }
    for (std::size_t c = 0; c < blocks_.size(); ++c) {
      const Eigen::Index off = offsets_[c], size = offsets_[c + 1] - off;
      out.middleCols(off, size).noalias() += kI * (x.middleCols(off, size) * k_blocks_[c].adjoint());
    }
    const ComplexVector g = gain_ * x.diagonal();
    out.diagonal() += g;
    return kTwoPi * out;
  }

  /// Solver for X - alpha L(X) = B at one fixed alpha.
  class Shifted {
   public:
    Shifted(const StructuredGenerator& gen, double alpha) : gen_(&gen), beta_(kTwoPi * alpha) {
      const Eigen::Index n = gen.n_;
      for (std::size_t c = 0; c < gen.blocks_.size(); ++c) {
        const auto& t = gen.schur_t_[c];
        ComplexMatrix u = Complex(0.0, beta_) * t;
        u.diagonal().array() += 0.5;
        u_.push_back(std::move(u));
      }
      // Population response of the Lyapunov part to unit diagonal sources.
      RealMatrix xi = RealMatrix::Zero(n, n);
      for (std::size_t c = 0; c < gen.blocks_.size(); ++c) {
        const Eigen::Index off = gen.offsets_[c], size = gen.offsets_[c + 1] - off;
        const ComplexMatrix& q = gen.schur_q_[c];
        for (Eigen::Index k = 0; k < size; ++k) {
          const ComplexVector v = q.row(k).adjoint();
          const ComplexMatrix y = triangular_lyapunov(u_[c], u_[c], v * v.adjoint());
          const ComplexMatrix qy = q * y;
          for (Eigen::Index j = 0; j < size; ++j)
            xi(off + j, off + k) = qy.row(j).dot(q.row(j)).real();
        }
      }
      RealMatrix m = RealMatrix::Identity(n, n) - beta_ * xi * gen.gain_;
      lu_ = Eigen::PartialPivLU<RealMatrix>(m);
    }

    ComplexMatrix solve(const ComplexMatrix& rhs) const {
      const StructuredGenerator& g = *gen_;
      const std::size_t nb = g.blocks_.size();
      ComplexMatrix x(g.n_, g.n_);
      for (std::size_t c = 0; c < nb; ++c) {
        for (std::size_t d = 0; d < nb; ++d) {
          const Eigen::Index oc = g.offsets_[c], sc = g.offsets_[c + 1] - oc;
          const Eigen::Index od = g.offsets_[d], sd = g.offsets_[d + 1] - od;
          x.block(oc, od, sc, sd) = block_solve(c, d, rhs.block(oc, od, sc, sd));
        }
      }
      const ComplexVector p0 = x.diagonal();
      ComplexVector p(g.n_);
      p.real() = lu_.solve(RealVector(p0.real()));
      p.imag() = lu_.solve(RealVector(p0.imag()));
      const ComplexVector source = beta_ * (g.gain_ * p);
      for (std::size_t c = 0; c < nb; ++c) {
        const Eigen::Index oc = g.offsets_[c], sc = g.offsets_[c + 1] - oc;
        ComplexMatrix b = rhs.block(oc, oc, sc, sc);
        b.diagonal() += source.segment(oc, sc);
        x.block(oc, oc, sc, sc) = block_solve(c, c, b);
      }
      return x;
    }

   private:
    ComplexMatrix block_solve(std::size_t c, std::size_t d, const ComplexMatrix& b) const {
      const auto& qc = gen_->schur_q_[c];
      const auto& qd = gen_->schur_q_[d];
      const ComplexMatrix y = triangular_lyapunov(u_[c], u_[d], qc.adjoint() * b * qd);
      return qc * y * qd.adjoint();
    }

    const StructuredGenerator* gen_;
    double beta_;
    std::vector<ComplexMatrix> u_;
    Eigen::PartialPivLU<RealMatrix> lu_;
  };

 private:
  Eigen::Index n_ = 0;
  std::vector<std::vector<int>> blocks_;
  std::vector<int> perm_;
  std::vector<int> inverse_;
  std::vector<Eigen::Index> offsets_;
  RealVector decay_;
  RealMatrix gain_;
  std::vector<ComplexMatrix> k_blocks_;
  std::vector<ComplexMatrix> schur_q_;
  std::vector<ComplexMatrix> schur_t_;
};

}  // namespace lacsim::detail
