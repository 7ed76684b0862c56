#pragma once

// Spin Hamiltonians of the V_B^- ground and excited triplets coupled to
// equivalent 14N nuclei, plus the spectral diagnostics built on them.
//
// Basis: electron (m_s = +1, 0, -1) x nucleus_1 x ... x nucleus_n, each
// nuclear factor ordered m_I = +1, 0, -1.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "lacsim/params.hpp"
#include "lacsim/spin_algebra.hpp"

namespace lacsim {

enum class Manifold { ground, excited, shelving };

inline const char* to_string(Manifold m) {
  switch (m) {
    case Manifold::ground: return "ground";
    case Manifold::excited: return "excited";
    case Manifold::shelving: return "shelving";
  }
  return "?";
}

inline constexpr int kDefaultNuclei = 3;

/// 3^n: nuclear states for n spin-1 nuclei.
inline int nuclear_dim(int n_nuclei) {
  int d = 1;
  for (int i = 0; i < n_nuclei; ++i) d *= 3;
  return d;
}

/// Electron projection m_s of triplet basis index `k`.
inline int electron_m(int k, int n_nuclei) { return 1 - k / nuclear_dim(n_nuclei); }

/// Total nuclear projection of nuclear index `k` (0 .. 3^n - 1).
inline int total_nuclear_m(int k, int n_nuclei) {
  int total = 0;
  for (int i = 0; i < n_nuclei; ++i) {
    total += 1 - k % 3;
    k /= 3;
  }
  return total;
}

/// Ground/excited manifold Hamiltonian, or the zero shelving block.
inline ComplexMatrix build_manifold_hamiltonian(const SystemParams& p, Manifold m, double b,
                                                int n_nuclei = kDefaultNuclei) {
  validate(p);
  if (!(b >= 0.0)) throw Error("negative field");
  if (n_nuclei < 1) throw Error("at least one nucleus required");
  const int nd = nuclear_dim(n_nuclei);
  if (m == Manifold::shelving) return ComplexMatrix::Zero(nd, nd);

  const double d = m == Manifold::ground ? p.d_gs : p.d_es;
  const Hyperfine& a = m == Manifold::ground ? p.a_gs : p.a_es;

  std::vector<int> dims(n_nuclei + 1, 3);
  const SpinMatrices s = spin_matrices(1.0);
  const ComplexMatrix* comps[3] = {&s.x, &s.y, &s.z};

  ComplexMatrix h = d * embed(s.z * s.z, 0, dims) + p.gamma_e * b * embed(s.z, 0, dims);
  std::array<ComplexMatrix, 3> electron;
  for (int c = 0; c < 3; ++c) electron[c] = embed(*comps[c], 0, dims);
  for (int i = 1; i <= n_nuclei; ++i) {
    h += p.q * embed(s.z * s.z, i, dims) + p.gamma_n * b * embed(s.z, i, dims);
    for (int c = 0; c < 3; ++c) {
      if (a[c] != 0.0) h += a[c] * electron[c] * embed(*comps[c], i, dims);
    }
  }
  return 0.5 * (h + h.adjoint());
}

struct AnticrossingReport {
  double b_star = 0.0;  // mT
  double gap = 0.0;     // MHz
  int branch = 0;       // k: k-th level of the m_s=0 band against the k-th of the m_s=-1 band
};

namespace detail {

// Electron-manifold weights (m_s = +1, 0, -1) of each eigenvector.
inline RealMatrix electron_weights(const ComplexMatrix& vectors, int n_nuclei) {
  const int nd = nuclear_dim(n_nuclei);
  RealMatrix w(3, vectors.cols());
  for (Eigen::Index c = 0; c < vectors.cols(); ++c)
    for (int e = 0; e < 3; ++e) w(e, c) = vectors.col(c).segment(e * nd, nd).squaredNorm();
  return w;
}

struct BandGap {
  double gap;
  int branch;
};

// Splits the spectrum into the m_s=0-like and m_s=-1-like bands (3^n levels
// each, assigned by electron character) and returns the smallest separation
// between equally ranked levels of the two bands. With no hyperfine coupling
// this is exactly |D - gamma_e B|.
inline BandGap band_gap(const SystemParams& p, Manifold m, double b, int n_nuclei) {
  const EigenSystem es = block_hermitian_eig(build_manifold_hamiltonian(p, m, b, n_nuclei));
  const RealMatrix w = electron_weights(es.vectors, n_nuclei);
  const int nd = nuclear_dim(n_nuclei);
  const auto n = es.values.size();
  std::vector<Eigen::Index> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto c) {
    return w(1, a) - w(2, a) > w(1, c) - w(2, c);
  });
  std::vector<double> zero_band, minus_band;
  for (int k = 0; k < nd; ++k) zero_band.push_back(es.values[idx[k]]);
  std::vector<Eigen::Index> rest(idx.begin() + nd, idx.end());
  std::stable_sort(rest.begin(), rest.end(), [&](auto a, auto c) { return w(2, a) > w(2, c); });
  for (int k = 0; k < nd; ++k) minus_band.push_back(es.values[rest[k]]);
  std::sort(zero_band.begin(), zero_band.end());
  std::sort(minus_band.begin(), minus_band.end());
  BandGap best{std::numeric_limits<double>::infinity(), 0};
  for (int k = 0; k < nd; ++k) {
    const double g = std::abs(minus_band[k] - zero_band[k]);
    if (g < best.gap) best = {g, k};
  }
  return best;
}

}  // namespace detail

/// Locates the m_s=0 / m_s=-1 anticrossing of a manifold inside [b_lo, b_hi].
inline AnticrossingReport find_anticrossing(const SystemParams& p, Manifold m, double b_lo,
                                            double b_hi, int n_nuclei = kDefaultNuclei) {
  if (!(b_lo < b_hi)) throw Error("find_anticrossing: requires b_lo < b_hi");
  if (m == Manifold::shelving) throw Error("no anticrossing in range");
  auto gap_at = [&](double b) { return detail::band_gap(p, m, b, n_nuclei).gap; };

  // Coarse scan, then a 0.01 mT scan around the coarse minimum, then golden section.
  constexpr int kCoarse = 200;
  const double coarse = (b_hi - b_lo) / kCoarse;
  int best = 0;
  double best_gap = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= kCoarse; ++i) {
    const double g = gap_at(b_lo + i * coarse);
    if (g < best_gap) {
      best_gap = g;
      best = i;
    }
  }
  if (best == 0 || best == kCoarse) throw Error("no anticrossing in range");

  const double lo = b_lo + (best - 1) * coarse;
  const double hi = b_lo + (best + 1) * coarse;
  const double fine = std::min(0.01, coarse / 4);
  const int n_fine = static_cast<int>(std::ceil((hi - lo) / fine));
  double b_fine = b_lo + best * coarse;
  for (int i = 0; i <= n_fine; ++i) {
    const double b = std::min(hi, lo + i * fine);
    const double g = gap_at(b);
    if (g < best_gap) {
      best_gap = g;
      b_fine = b;
    }
  }

  constexpr double kInvPhi = 0.6180339887498949;
  double a = std::max(lo, b_fine - fine), c = std::min(hi, b_fine + fine);
  double x1 = c - kInvPhi * (c - a), x2 = a + kInvPhi * (c - a);
  double f1 = gap_at(x1), f2 = gap_at(x2);
  for (int it = 0; it < 200 && (c - a) > 1e-12 * std::max(1.0, std::abs(c)); ++it) {
    if (f1 < f2) {
      c = x2;
      x2 = x1;
      f2 = f1;
      x1 = c - kInvPhi * (c - a);
      f1 = gap_at(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kInvPhi * (c - a);
      f2 = gap_at(x2);
    }
  }
  double b_star = 0.5 * (a + c);
  detail::BandGap result = detail::band_gap(p, m, b_star, n_nuclei);
  if (result.gap > best_gap) {
    b_star = b_fine;
    result = detail::band_gap(p, m, b_star, n_nuclei);
  }
  return {b_star, result.gap, result.branch};
}

struct EigenstateBrightness {
  double energy;      // MHz
  double brightness;  // m_s = 0 weight
};

inline void require_manifold_dim(const ComplexMatrix& h, int n_nuclei, const char* who) {
  const int dim = 3 * nuclear_dim(n_nuclei);
  if (h.rows() != dim || h.cols() != dim) throw Error(std::string(who) + ": dimension mismatch");
}

inline std::vector<EigenstateBrightness> eigenstate_brightness(const ComplexMatrix& h_ground,
                                                               int n_nuclei = kDefaultNuclei) {
  require_manifold_dim(h_ground, n_nuclei, "eigenstate_brightness");
  const EigenSystem es = block_hermitian_eig(h_ground);
  const RealMatrix w = detail::electron_weights(es.vectors, n_nuclei);
  std::vector<EigenstateBrightness> out;
  out.reserve(es.values.size());
  for (Eigen::Index k = 0; k < es.values.size(); ++k) out.push_back({es.values[k], w(1, k)});
  return out;
}

/// Decomposition of one eigenstate over sectors of m_s + m_I_total.
struct SectorWeights {
  double energy;
  int min_sector;               // quantum number of weights[0]
  std::vector<double> weights;  // one entry per sector, ascending quantum number
};

inline std::vector<SectorWeights> classify_quantum_number_mixing(const ComplexMatrix& h_ground,
                                                                 int n_nuclei = kDefaultNuclei) {
  require_manifold_dim(h_ground, n_nuclei, "classify_quantum_number_mixing");
  const EigenSystem es = block_hermitian_eig(h_ground);
  const int nd = nuclear_dim(n_nuclei);
  const int lowest = -1 - n_nuclei;
  const int n_sectors = 2 * n_nuclei + 3;
  std::vector<SectorWeights> out;
  for (Eigen::Index c = 0; c < es.values.size(); ++c) {
    SectorWeights sw{es.values[c], lowest, std::vector<double>(n_sectors, 0.0)};
    for (Eigen::Index k = 0; k < es.vectors.rows(); ++k) {
      const int q = electron_m(static_cast<int>(k), n_nuclei) +
                    total_nuclear_m(static_cast<int>(k) % nd, n_nuclei);
      sw.weights[q - lowest] += std::norm(es.vectors(k, c));
    }
    out.push_back(std::move(sw));
  }
  return out;
}

}  // namespace lacsim
