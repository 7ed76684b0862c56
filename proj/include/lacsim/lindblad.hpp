#pragma once

// Optical-cycle open-system model: block Hamiltonian over
// [ground | excited | shelving], incoherent jump operators, and the
// Lindblad generator
//
//   d(rho)/dt = 2 pi * ( -i[H, rho] + sum_k G_k (L_k rho L_k^+ - {L_k^+ L_k, rho}/2) )
//
// with H and G_k in MHz and t in microseconds.

#include <cmath>
#include <string>
#include <vector>

#include "lacsim/hamiltonian.hpp"

namespace lacsim {

/// State indexing of the optical-cycle model for `n_nuclei` spin-1 nuclei.
struct ModelLayout {
  int n_nuclei = kDefaultNuclei;

  int nuclear() const { return nuclear_dim(n_nuclei); }
  int manifold() const { return 3 * nuclear(); }
  int dim() const { return 7 * nuclear(); }
  int ground_offset() const { return 0; }
  int excited_offset() const { return manifold(); }
  int shelving_offset() const { return 2 * manifold(); }
  /// ms_index 0, 1, 2 <-> m_s = +1, 0, -1.
  int ground(int ms_index, int nuc) const { return ms_index * nuclear() + nuc; }
  int excited(int ms_index, int nuc) const { return manifold() + ms_index * nuclear() + nuc; }
  int shelving(int nuc) const { return 2 * manifold() + nuc; }

  static ModelLayout for_dim(int dim) {
    for (int n = 1; n <= 6; ++n)
      if (7 * nuclear_dim(n) == dim) return {n};
    throw Error("dimension mismatch: " + std::to_string(dim) + " is not an optical-cycle model size");
  }
};

struct MatrixEntry {
  int row;
  int col;
  Complex value;
};

/// Sparse jump operator with its rate (MHz).
struct JumpOperator {
  int dim = 0;
  std::vector<MatrixEntry> entries;
  double rate = 0.0;

  /// |to><from| at the given rate.
  static JumpOperator transition(int dim, int to, int from, double rate) {
    return {dim, {{to, from, Complex(1.0, 0.0)}}, rate};
  }

  bool single_entry() const { return entries.size() == 1; }

  ComplexMatrix matrix() const {
    ComplexMatrix m = ComplexMatrix::Zero(dim, dim);
    for (const auto& e : entries) m(e.row, e.col) += e.value;
    return m;
  }
};

/// Trace-one Hermitian positive-semidefinite state.
class DensityMatrix {
 public:
  DensityMatrix() = default;
  explicit DensityMatrix(ComplexMatrix rho) : rho_(std::move(rho)) {
    if (rho_.rows() != rho_.cols()) throw Error("density matrix must be square");
  }

  static DensityMatrix maximally_mixed(int dim) {
    return DensityMatrix(ComplexMatrix::Identity(dim, dim) / static_cast<double>(dim));
  }
  static DensityMatrix basis_state(int dim, int k) {
    ComplexMatrix m = ComplexMatrix::Zero(dim, dim);
    m(k, k) = 1.0;
    return DensityMatrix(std::move(m));
  }

  int dim() const { return static_cast<int>(rho_.rows()); }
  const ComplexMatrix& matrix() const { return rho_; }
  RealVector populations() const { return rho_.diagonal().real(); }

  double trace_error() const { return std::abs(rho_.trace() - Complex(1.0, 0.0)); }
  double hermiticity_error() const {
    const double n = rho_.norm();
    return n > 0 ? hermiticity_defect(rho_) / n : 0.0;
  }
  double min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(0.5 * (rho_ + rho_.adjoint()),
                                                    Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  }
  bool satisfies_invariants() const {
    return hermiticity_error() < 1e-10 && trace_error() < 1e-9 && min_eigenvalue() >= -1e-8;
  }

 private:
  ComplexMatrix rho_;
};

/// Block-diagonal [ground | excited | shelving] Hamiltonian (shelving block zero).
inline ComplexMatrix build_block_hamiltonian(const SystemParams& p, double b,
                                             int n_nuclei = kDefaultNuclei) {
  const ModelLayout lay{n_nuclei};
  ComplexMatrix h = ComplexMatrix::Zero(lay.dim(), lay.dim());
  const int m = lay.manifold();
  h.block(lay.ground_offset(), lay.ground_offset(), m, m) =
      build_manifold_hamiltonian(p, Manifold::ground, b, n_nuclei);
  h.block(lay.excited_offset(), lay.excited_offset(), m, m) =
      build_manifold_hamiltonian(p, Manifold::excited, b, n_nuclei);
  return h;
}

/// Jump operators of the optical cycle, in this order: pump, radiative decay,
/// ISC into shelving, shelving return, shelving nuclear mixing.
inline std::vector<JumpOperator> build_jump_operators(const SystemParams& p,
                                                      int n_nuclei = kDefaultNuclei) {
  validate(p);
  const ModelLayout lay{n_nuclei};
  const int n = lay.dim(), nd = lay.nuclear();
  const RateSet& r = p.rates;
  auto spin_rate = [](int ms_index, double zero, double plus_minus) {
    return ms_index == 1 ? zero : plus_minus;
  };
  std::vector<JumpOperator> out;
  out.reserve(12 * nd + nd * (nd - 1));
  for (int s = 0; s < 3; ++s)
    for (int k = 0; k < nd; ++k)
      out.push_back(JumpOperator::transition(n, lay.excited(s, k), lay.ground(s, k), p.pump_rate));
  for (int s = 0; s < 3; ++s)
    for (int k = 0; k < nd; ++k)
      out.push_back(JumpOperator::transition(n, lay.ground(s, k), lay.excited(s, k), r.gamma_r));
  for (int s = 0; s < 3; ++s)
    for (int k = 0; k < nd; ++k)
      out.push_back(JumpOperator::transition(n, lay.shelving(k), lay.excited(s, k),
                                             spin_rate(s, r.gamma_0, r.gamma_1)));
  for (int s = 0; s < 3; ++s)
    for (int k = 0; k < nd; ++k)
      out.push_back(JumpOperator::transition(n, lay.ground(s, k), lay.shelving(k),
                                             spin_rate(s, r.kappa_0, r.kappa_1)));
  for (int to = 0; to < nd; ++to)
    for (int from = 0; from < nd; ++from)
      if (to != from)
        out.push_back(JumpOperator::transition(n, lay.shelving(to), lay.shelving(from), r.gamma_mix));
  return out;
}

inline void check_generator_dims(const ComplexMatrix& h, const std::vector<JumpOperator>& jumps,
                                 Eigen::Index dim) {
  if (h.rows() != dim || h.cols() != dim) throw Error("dimension mismatch: Hamiltonian vs state");
  for (const auto& j : jumps) {
    if (j.dim != dim) throw Error("dimension mismatch: jump operator vs state");
    for (const auto& e : j.entries)
      if (e.row < 0 || e.col < 0 || e.row >= dim || e.col >= dim)
        throw Error("jump operator entry out of range");
  }
}

/// d(rho)/dt in 1/us. Never forms the superoperator.
inline ComplexMatrix lindblad_rhs(const ComplexMatrix& h, const std::vector<JumpOperator>& jumps,
                                  const ComplexMatrix& rho) {
  if (rho.rows() != rho.cols()) throw Error("dimension mismatch: state is not square");
  check_generator_dims(h, jumps, rho.rows());
  ComplexMatrix out = -kI * (h * rho - rho * h);
  for (const auto& jump : jumps) {
    if (jump.rate == 0.0) continue;
    const double g = jump.rate;
    for (const auto& a : jump.entries) {
      for (const auto& b : jump.entries) {
        // L rho L^+
        out(a.row, b.row) += g * a.value * std::conj(b.value) * rho(a.col, b.col);
        // -(1/2){L^+ L, rho}; (L^+ L)(a.col, b.col) gets conj(a) b when rows agree
        if (a.row == b.row) {
          const Complex m = std::conj(a.value) * b.value * (0.5 * g);
          out.row(a.col) -= m * rho.row(b.col);
          out.col(b.col) -= m * rho.col(a.col);
        }
      }
    }
  }
  return kTwoPi * out;
}

}  // namespace lacsim
