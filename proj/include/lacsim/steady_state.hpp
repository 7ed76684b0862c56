#pragma once

#include <queue>
#include <string>

#include <Eigen/LU>

#include "lacsim/detail/structured_generator.hpp"
#include "lacsim/propagation.hpp"

namespace lacsim {

enum class SteadyStateMethod { integrate, nullspace, secular };

inline const char* to_string(SteadyStateMethod m) {
  switch (m) {
    case SteadyStateMethod::integrate: return "integrate";
    case SteadyStateMethod::nullspace: return "nullspace";
    case SteadyStateMethod::secular: return "secular";
  }
  return "?";
}

inline SteadyStateMethod parse_steady_state_method(const std::string& name) {
  if (name == "integrate") return SteadyStateMethod::integrate;
  if (name == "nullspace") return SteadyStateMethod::nullspace;
  if (name == "secular") return SteadyStateMethod::secular;
  throw Error("unknown steady-state method: " + name);
}

struct SteadyStateOptions {
  /// integrate: stop once ||d(rho)/dt||_F < defect_tol * ||rho||_F.
  double defect_tol = 1e-8;
  /// integrate: local error per unit time (general jump operators only).
  double integration_tol = 1e-6;
  /// integrate: first implicit step (us); later steps double.
  double first_step = 1e-3;
  /// integrate: give up after this much simulated time (us).
  double max_time = 1e5;
};

inline constexpr int kNullspaceMaxDim = 32;

namespace detail {

inline void require_positive_rate(const std::vector<JumpOperator>& jumps) {
  for (const auto& j : jumps)
    if (j.rate > 0.0) return;
  throw Error("steady_state: needs at least one jump operator with positive rate");
}

inline DensityMatrix normalized_state(ComplexMatrix rho) {
  hermitize(rho);
  rho /= rho.trace().real();
  return DensityMatrix(std::move(rho));
}

// Row-major vectorization: vec(rho)[i * n + j] = rho(i, j).
inline ComplexMatrix dense_liouvillian(const ComplexMatrix& h, const std::vector<JumpOperator>& jumps) {
  const Eigen::Index n = h.rows();
  const ComplexMatrix id = ComplexMatrix::Identity(n, n);
  ComplexMatrix l = -kI * (kron(h, id) - kron(id, h.transpose()));
  for (const auto& j : jumps) {
    if (j.rate == 0.0) continue;
    const ComplexMatrix m = j.matrix();
    const ComplexMatrix mdm = m.adjoint() * m;
    l += j.rate * (kron(m, m.conjugate()) - 0.5 * kron(mdm, id) - 0.5 * kron(id, mdm.transpose()));
  }
  return kTwoPi * l;
}

inline DensityMatrix steady_nullspace(const ComplexMatrix& h, const std::vector<JumpOperator>& jumps) {
  const Eigen::Index n = h.rows();
  if (n > kNullspaceMaxDim) throw Error("nullspace restricted to oracle sizes");
  ComplexMatrix l = dense_liouvillian(h, jumps);
  Eigen::FullPivLU<ComplexMatrix> rank_check(l);
  rank_check.setThreshold(1e-10);
  if (rank_check.rank() < n * n - 1) throw Error("non-unique steady state");
  // Trace preservation makes the population rows linearly dependent; the
  // first one is replaced by the normalization condition.
  ComplexVector rhs = ComplexVector::Zero(n * n);
  l.row(0).setZero();
  for (Eigen::Index i = 0; i < n; ++i) l(0, i * n + i) = 1.0;
  rhs[0] = 1.0;
  const ComplexVector v = l.partialPivLu().solve(rhs);
  ComplexMatrix rho(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) rho(i, j) = v[i * n + j];
  return normalized_state(std::move(rho));
}

// Number of closed communicating classes of the rate graph (W(b, a) = rate a -> b).
inline int closed_classes(const RealMatrix& w, double cutoff) {
  const Eigen::Index n = w.rows();
  // Tarjan's strongly connected components, iterative.
  std::vector<int> index(n, -1), low(n, 0), comp(n, -1);
  std::vector<char> on_stack(n, 0);
  std::vector<Eigen::Index> stack;
  int counter = 0, n_comp = 0;
  for (Eigen::Index root = 0; root < n; ++root) {
    if (index[root] >= 0) continue;
    std::vector<std::pair<Eigen::Index, Eigen::Index>> work{{root, 0}};
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = 1;
    while (!work.empty()) {
      auto& [v, next] = work.back();
      bool descended = false;
      for (; next < n; ++next) {
        if (next == v || w(next, v) <= cutoff) continue;
        const Eigen::Index u = next;
        if (index[u] < 0) {
          index[u] = low[u] = counter++;
          stack.push_back(u);
          on_stack[u] = 1;
          ++next;
          work.push_back({u, 0});
          descended = true;
          break;
        }
        if (on_stack[u]) low[v] = std::min(low[v], index[u]);
      }
      if (descended) continue;
      if (low[v] == index[v]) {
        while (true) {
          const Eigen::Index u = stack.back();
          stack.pop_back();
          on_stack[u] = 0;
          comp[u] = n_comp;
          if (u == v) break;
        }
        ++n_comp;
      }
      const Eigen::Index done = v;
      work.pop_back();
      if (!work.empty()) {
        const Eigen::Index parent = work.back().first;
        low[parent] = std::min(low[parent], low[done]);
      }
    }
  }
  std::vector<char> leaks(n_comp, 0);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b)
      if (a != b && w(b, a) > cutoff && comp[a] != comp[b]) leaks[comp[a]] = 1;
  int closed = 0;
  for (int c = 0; c < n_comp; ++c) closed += leaks[c] ? 0 : 1;
  return closed;
}

inline DensityMatrix steady_secular(const ComplexMatrix& h, const std::vector<JumpOperator>& jumps) {
  const Eigen::Index n = h.rows();
  const EigenSystem es = block_hermitian_eig(h);
  const ComplexMatrix& u = es.vectors;
  // w(b, a): rate from eigenstate a to eigenstate b.
  RealMatrix w = RealMatrix::Zero(n, n);
  const RealMatrix u2 = u.cwiseAbs2();
  for (const auto& j : jumps) {
    if (j.rate == 0.0) continue;
    if (j.single_entry()) {
      const auto& e = j.entries.front();
      w.noalias() += (j.rate * std::norm(e.value)) * u2.row(e.row).transpose() * u2.row(e.col);
    } else {
      const ComplexMatrix m = u.adjoint() * j.matrix() * u;
      w += j.rate * m.cwiseAbs2();
    }
  }
  w.diagonal().setZero();
  const double cutoff = 1e-14 * std::max(1.0, w.maxCoeff());
  if (closed_classes(w, cutoff) != 1) throw Error("non-unique steady state");
  RealMatrix rates = w;
  rates.diagonal() = -w.colwise().sum().transpose();
  rates.row(0).setOnes();
  RealVector rhs = RealVector::Zero(n);
  rhs[0] = 1.0;
  RealVector p = rates.fullPivLu().solve(rhs);
  p = p.cwiseMax(0.0);
  p /= p.sum();
  ComplexMatrix rho = u * p.cast<Complex>().asDiagonal() * u.adjoint();
  return normalized_state(std::move(rho));
}

// Implicit-Euler time stepping from the maximally mixed state with step sizes
// doubling from `first_step`. Each step is completely positive and trace
// preserving, the exact steady state is its fixed point, and the limit is the
// spectral projection of the initial state, so non-unique cases resolve the
// same way as under the exact flow.
inline DensityMatrix steady_implicit(const ComplexMatrix& h, const std::vector<JumpOperator>& jumps,
                                     const SteadyStateOptions& opt) {
  const int n = static_cast<int>(h.rows());
  const StructuredGenerator gen(h, jumps);
  ComplexMatrix x = gen.to_internal(DensityMatrix::maximally_mixed(n).matrix());
  double step = opt.first_step, elapsed = 0.0;
  while (elapsed < opt.max_time) {
    step = std::min(step, opt.max_time - elapsed);
    x = StructuredGenerator::Shifted(gen, step).solve(x);
    hermitize(x);
    x /= x.trace().real();
    elapsed += step;
    const ComplexMatrix rho = gen.to_external(x);
    if (lindblad_rhs(h, jumps, rho).norm() < opt.defect_tol * rho.norm()) return DensityMatrix(rho);
    step *= 2.0;
  }
  throw Error("steady_state: integration did not reach the defect tolerance");
}

inline DensityMatrix steady_integrate(const ComplexMatrix& h, const std::vector<JumpOperator>& jumps,
                                      const SteadyStateOptions& opt) {
  if (StructuredGenerator::supports(jumps)) return steady_implicit(h, jumps, opt);
  const int n = static_cast<int>(h.rows());
  EvolveOptions eo;
  bool reached = false;
  eo.stop_when = [&](double, const ComplexMatrix& rho) {
    reached = lindblad_rhs(h, jumps, rho).norm() < opt.defect_tol * rho.norm();
    return reached;
  };
  DensityMatrix out =
      evolve(h, jumps, DensityMatrix::maximally_mixed(n), opt.max_time, opt.integration_tol, eo);
  if (!reached) throw Error("steady_state: integration did not reach the defect tolerance");
  return out;
}

}  // namespace detail

inline DensityMatrix steady_state(const ComplexMatrix& h, const std::vector<JumpOperator>& jumps,
                                  SteadyStateMethod method, const SteadyStateOptions& opt = {}) {
  check_generator_dims(h, jumps, h.rows());
  detail::require_positive_rate(jumps);
  switch (method) {
    case SteadyStateMethod::integrate: return detail::steady_integrate(h, jumps, opt);
    case SteadyStateMethod::nullspace: return detail::steady_nullspace(h, jumps);
    case SteadyStateMethod::secular: return detail::steady_secular(h, jumps);
  }
  throw Error("unknown steady-state method");
}

}  // namespace lacsim
