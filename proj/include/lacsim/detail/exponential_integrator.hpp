#pragma once

// Exponential Runge-Kutta propagation for generators whose jumps are single
// transitions. In the eigenbasis of each connected block of H the generator
// splits as
//
//   L(Y) = Z o Y + N(Y),   Z_ab = -i 2pi (e_a - e_b) - pi (rbar_a + rbar_b),
//
// with rbar the mean out-rate of the block a state belongs to. The Hadamard
// part carries the GHz coherent dynamics and is integrated exactly; N holds
// the population gains and the spread of decay rates around each block mean,
// both of which are mild. Cox-Matthews ETDRK4 with an embedded second-order
// solution for step control.

#include <cmath>
#include <map>
#include <vector>

#include <Eigen/Eigenvalues>

#include "lacsim/lindblad.hpp"

namespace lacsim::detail {

// phi_0..phi_3 of a complex scalar.
struct PhiValues {
  Complex p0, p1, p2, p3;
};

inline PhiValues phi_functions(Complex z) {
  if (std::abs(z) < 1.0) {
    // Taylor series: phi_k(z) = sum_m z^m / (m + k)!
    Complex p1 = 0.0, p2 = 0.0, p3 = 0.0, power = 1.0;
    double f1 = 1.0, f2 = 0.5, f3 = 1.0 / 6.0;
    for (int m = 0; m < 20; ++m) {
      p1 += power * f1;
      p2 += power * f2;
      p3 += power * f3;
      power *= z;
      f1 /= m + 2;
      f2 /= m + 3;
      f3 /= m + 4;
    }
    return {std::exp(z), p1, p2, p3};
  }
  const Complex e = std::exp(z);
  const Complex p1 = (e - 1.0) / z;
  const Complex p2 = (p1 - 1.0) / z;
  const Complex p3 = (p2 - 0.5) / z;
  return {e, p1, p2, p3};
}

class ExponentialPropagator {
 public:
  static bool supports(const std::vector<JumpOperator>& jumps) {
    for (const auto& j : jumps)
      if (!j.single_entry()) return false;
    return true;
  }

  ExponentialPropagator(const ComplexMatrix& h, const std::vector<JumpOperator>& jumps) {
    n_ = h.rows();
    check_generator_dims(h, jumps, n_);
    if (!supports(jumps)) throw Error("exponential propagator needs single-transition jumps");

    const auto blocks = connected_blocks(h);
    for (const auto& b : blocks) {
      offsets_.push_back(static_cast<Eigen::Index>(perm_.size()));
      perm_.insert(perm_.end(), b.begin(), b.end());
    }
    offsets_.push_back(n_);
    std::vector<int> inverse(n_);
    for (Eigen::Index k = 0; k < n_; ++k) inverse[perm_[k]] = static_cast<int>(k);

    RealVector decay = RealVector::Zero(n_);
    gain_ = RealMatrix::Zero(n_, n_);
    for (const auto& j : jumps) {
      const auto& e = j.entries.front();
      const double w = j.rate * std::norm(e.value);
      decay[inverse[e.col]] += w;
      gain_(inverse[e.row], inverse[e.col]) += w;
    }
    gain_ *= kTwoPi;

    energies_.resize(n_);
    mean_decay_.resize(n_);
    explicit_rate_ = gain_.colwise().sum().maxCoeff();
    for (std::size_t c = 0; c + 1 < offsets_.size(); ++c) {
      const Eigen::Index off = offsets_[c], size = offsets_[c + 1] - off;
      ComplexMatrix hc(size, size);
      for (Eigen::Index a = 0; a < size; ++a)
        for (Eigen::Index b = 0; b < size; ++b) hc(a, b) = h(perm_[off + a], perm_[off + b]);
      Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(0.5 * (hc + hc.adjoint()));
      energies_.segment(off, size) = es.eigenvalues();
      vectors_.push_back(es.eigenvectors());
      const RealVector r = decay.segment(off, size);
      const double mean = r.mean();
      mean_decay_.segment(off, size).setConstant(mean);
      const RealVector spread = r.array() - mean;
      if (spread.cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, mean)) {
        spread_.push_back(kPi_ * es.eigenvectors().adjoint() * spread.cast<Complex>().asDiagonal() *
                          es.eigenvectors());
        explicit_rate_ = std::max(explicit_rate_, kTwoPi * spread.cwiseAbs().maxCoeff());
      } else {
        spread_.emplace_back();
      }
    }
  }

  Eigen::Index dim() const { return n_; }
  /// Rate scale (1/us) of the part that is not integrated exactly.
  double explicit_rate() const { return explicit_rate_; }

  ComplexMatrix to_internal(const ComplexMatrix& rho) const {
    ComplexMatrix p(n_, n_);
    for (Eigen::Index a = 0; a < n_; ++a)
      for (Eigen::Index b = 0; b < n_; ++b) p(a, b) = rho(perm_[a], perm_[b]);
    return conjugate_blocks(p, true);
  }

  ComplexMatrix to_external(const ComplexMatrix& y) const {
    const ComplexMatrix p = conjugate_blocks(y, false);
    ComplexMatrix out(n_, n_);
    for (Eigen::Index a = 0; a < n_; ++a)
      for (Eigen::Index b = 0; b < n_; ++b) out(perm_[a], perm_[b]) = p(a, b);
    return out;
  }

  /// Coefficient of the exactly integrated part, per unit time.
  Complex linear(Eigen::Index a, Eigen::Index b) const {
    return Complex(-kPi_ * (mean_decay_[a] + mean_decay_[b]),
                   -kTwoPi * (energies_[a] - energies_[b]));
  }

  ComplexMatrix nonlinear(const ComplexMatrix& y) const {
    ComplexMatrix out = ComplexMatrix::Zero(n_, n_);
    RealVector pops(n_);
    const std::size_t nb = vectors_.size();
    for (std::size_t c = 0; c < nb; ++c) {
      const Eigen::Index off = offsets_[c], size = offsets_[c + 1] - off;
      const ComplexMatrix& v = vectors_[c];
      const ComplexMatrix w = v * y.block(off, off, size, size);
      pops.segment(off, size) = w.cwiseProduct(v.conjugate()).rowwise().sum().real();
    }
    // Decay spread, -(S Y + Y S) blockwise. Coherences between blocks never
    // feed the populations, so block pairs that are exactly zero stay zero.
    for (std::size_t c = 0; c < nb; ++c) {
      for (std::size_t d = 0; d < nb; ++d) {
        const bool left = spread_[c].size() > 0, right = spread_[d].size() > 0;
        if (!left && !right) continue;
        const Eigen::Index oc = offsets_[c], sc = offsets_[c + 1] - oc;
        const Eigen::Index od = offsets_[d], sd = offsets_[d + 1] - od;
        const auto yb = y.block(oc, od, sc, sd);
        if (c != d && (yb.array() == Complex(0.0, 0.0)).all()) continue;
        auto ob = out.block(oc, od, sc, sd);
        if (left) ob.noalias() -= spread_[c] * yb;
        if (right) ob.noalias() -= yb * spread_[d];
      }
    }
    const RealVector g = gain_ * pops;
    for (std::size_t c = 0; c + 1 < offsets_.size(); ++c) {
      const Eigen::Index off = offsets_[c], size = offsets_[c + 1] - off;
      const ComplexMatrix& v = vectors_[c];
      out.block(off, off, size, size).noalias() +=
          v.adjoint() * g.segment(off, size).cast<Complex>().asDiagonal() * v;
    }
    return out;
  }

  ComplexMatrix apply(const ComplexMatrix& y) const {
    ComplexMatrix out = nonlinear(y);
    for (Eigen::Index b = 0; b < n_; ++b)
      for (Eigen::Index a = 0; a < n_; ++a) out(a, b) += linear(a, b) * y(a, b);
    return out;
  }

  /// Hadamard coefficients of one ETDRK4 step of size h.
  struct StepCoefficients {
    ComplexMatrix full, half, half_phi1, f1, f2, f3, err1, err3;
  };

  StepCoefficients coefficients(double h) const {
    StepCoefficients s;
    for (ComplexMatrix* m : {&s.full, &s.half, &s.half_phi1, &s.f1, &s.f2, &s.f3, &s.err1, &s.err3})
      m->resize(n_, n_);
    for (Eigen::Index b = 0; b < n_; ++b) {
      for (Eigen::Index a = 0; a < n_; ++a) {
        const Complex z = h * linear(a, b);
        const PhiValues p = phi_functions(z);
        const PhiValues q = phi_functions(0.5 * z);
        s.full(a, b) = p.p0;
        s.half(a, b) = q.p0;
        s.half_phi1(a, b) = 0.5 * h * q.p1;
        s.f1(a, b) = h * (p.p1 - 3.0 * p.p2 + 4.0 * p.p3);
        s.f2(a, b) = h * (p.p2 - 2.0 * p.p3);
        s.f3(a, b) = h * (4.0 * p.p3 - p.p2);
        s.err1(a, b) = s.f1(a, b) - h * (p.p1 - p.p2);
        s.err3(a, b) = s.f3(a, b) - h * p.p2;
      }
    }
    return s;
  }

  /// Coefficients for a step size on a 2^(1/4) grid at or below `h`; the
  /// grid lets the step controller reuse them.
  std::pair<double, const StepCoefficients*> grid_coefficients(double h) const {
    const int level = static_cast<int>(std::floor(4.0 * std::log2(h)));
    const double hq = std::exp2(level / 4.0);
    auto it = cache_.find(level);
    if (it == cache_.end()) {
      if (cache_.size() >= kCacheSize) {
        cache_.erase(cache_order_.front());
        cache_order_.erase(cache_order_.begin());
      }
      it = cache_.emplace(level, coefficients(hq)).first;
      cache_order_.push_back(level);
    }
    return {hq, &it->second};
  }

  struct StepResult {
    ComplexMatrix y;
    double error;  // Frobenius norm of the embedded error estimate
  };

  StepResult step(const ComplexMatrix& y, const StepCoefficients& s) const {
    const ComplexMatrix nu = nonlinear(y);
    const ComplexMatrix ey = s.half.cwiseProduct(y);
    const ComplexMatrix a = ey + s.half_phi1.cwiseProduct(nu);
    const ComplexMatrix na = nonlinear(a);
    const ComplexMatrix b = ey + s.half_phi1.cwiseProduct(na);
    const ComplexMatrix nb = nonlinear(b);
    const ComplexMatrix c = s.half.cwiseProduct(a) + s.half_phi1.cwiseProduct(2.0 * nb - nu);
    const ComplexMatrix nc = nonlinear(c);
    const ComplexMatrix nab = na + nb;
    StepResult out;
    out.y = s.full.cwiseProduct(y) + s.f1.cwiseProduct(nu) + 2.0 * s.f2.cwiseProduct(nab) +
            s.f3.cwiseProduct(nc);
    out.error = (s.err1.cwiseProduct(nu) + 2.0 * s.f2.cwiseProduct(nab) + s.err3.cwiseProduct(nc)).norm();
    return out;
  }

 private:
  static constexpr double kPi_ = 0.5 * kTwoPi;

  // Block-diagonal change of basis: V^+ X V (to eigenbasis) or V X V^+.
  ComplexMatrix conjugate_blocks(const ComplexMatrix& x, bool to_eigen) const {
    ComplexMatrix tmp(n_, n_), out(n_, n_);
    for (std::size_t c = 0; c + 1 < offsets_.size(); ++c) {
      const Eigen::Index off = offsets_[c], size = offsets_[c + 1] - off;
      const ComplexMatrix& v = vectors_[c];
      if (to_eigen) {
        tmp.middleRows(off, size).noalias() = v.adjoint() * x.middleRows(off, size);
      } else {
        tmp.middleRows(off, size).noalias() = v * x.middleRows(off, size);
      }
    }
    for (std::size_t c = 0; c + 1 < offsets_.size(); ++c) {
      const Eigen::Index off = offsets_[c], size = offsets_[c + 1] - off;
      const ComplexMatrix& v = vectors_[c];
      if (to_eigen) {
        out.middleCols(off, size).noalias() = tmp.middleCols(off, size) * v;
      } else {
        out.middleCols(off, size).noalias() = tmp.middleCols(off, size) * v.adjoint();
      }
    }
    return out;
  }

  static constexpr std::size_t kCacheSize = 8;

  Eigen::Index n_ = 0;
  mutable std::map<int, StepCoefficients> cache_;
  mutable std::vector<int> cache_order_;
  std::vector<int> perm_;
  std::vector<Eigen::Index> offsets_;
  RealMatrix gain_;  // 2 pi * rates
  RealVector energies_;
  RealVector mean_decay_;
  std::vector<ComplexMatrix> vectors_;
  std::vector<ComplexMatrix> spread_;  // pi V^+ (r - rbar) V per block, empty if uniform
  double explicit_rate_ = 0.0;
};

}  // namespace lacsim::detail
