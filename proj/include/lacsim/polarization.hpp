#pragma once

// Nuclear polarization from steady states: Dicke-sector populations of the
// ground m_s = 0 manifold and field sweeps over them.

#include <algorithm>
#include <atomic>
#include <limits>
#include <ostream>
#include <thread>
#include <vector>

#include "lacsim/format.hpp"
#include "lacsim/steady_state.hpp"

namespace lacsim {

/// Populations per total nuclear projection m_I = +n ... -n (degeneracy included),
/// conditioned on ground m_s = 0.
struct DickePopulations {
  std::vector<double> pops;

  int n_nuclei() const { return static_cast<int>(pops.size() - 1) / 2; }
  int m_of(std::size_t i) const { return n_nuclei() - static_cast<int>(i); }
  double total() const {
    double s = 0.0;
    for (double v : pops) s += v;
    return s;
  }
};

/// Number of nuclear product states with total projection m (for n spin-1 nuclei).
inline std::vector<int> dicke_degeneracies(int n_nuclei) {
  std::vector<int> g(2 * n_nuclei + 1, 0);
  for (int k = 0; k < nuclear_dim(n_nuclei); ++k) ++g[n_nuclei - total_nuclear_m(k, n_nuclei)];
  return g;
}

inline DickePopulations nuclear_populations(const DensityMatrix& rho) {
  const ModelLayout lay = ModelLayout::for_dim(rho.dim());
  const int n = lay.n_nuclei;
  DickePopulations d{std::vector<double>(2 * n + 1, 0.0)};
  for (int k = 0; k < lay.nuclear(); ++k) {
    const int idx = lay.ground(1, k);
    d.pops[n - total_nuclear_m(k, n)] += rho.matrix()(idx, idx).real();
  }
  return d;
}

/// P = sum_m m pops_m / (n sum pops_m), in [-1, 1].
inline double polarization(const DickePopulations& d) {
  if (d.pops.size() % 2 == 0 || d.pops.size() < 3) throw Error("dimension mismatch: Dicke populations");
  const double total = d.total();
  if (!(total != 0.0)) throw Error("empty manifold");
  double first = 0.0;
  for (std::size_t i = 0; i < d.pops.size(); ++i) first += d.m_of(i) * d.pops[i];
  return first / (d.n_nuclei() * total);
}

struct PolarizationSample {
  double b = 0.0;  // mT
  double polarization = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
  std::string error;  // empty when converged
};

struct PolarizationCurve {
  std::vector<PolarizationSample> samples;
  SteadyStateMethod backend = SteadyStateMethod::secular;
};

struct SweepOptions {
  int threads = 1;
  int n_nuclei = kDefaultNuclei;
  SteadyStateOptions steady{};
};

/// Polarization at one field.
inline double polarization_at(const SystemParams& p, double b, SteadyStateMethod method,
                              const SweepOptions& opt = {}) {
  const ComplexMatrix h = build_block_hamiltonian(p, b, opt.n_nuclei);
  const auto jumps = build_jump_operators(p, opt.n_nuclei);
  return polarization(nuclear_populations(steady_state(h, jumps, method, opt.steady)));
}

/// One steady-state solve per field. Fields run on a worker pool; failures are
/// recorded per sample instead of aborting the sweep. The result does not
/// depend on the thread count.
inline PolarizationCurve sweep_polarization(const SystemParams& p, const std::vector<double>& b_values,
                                            SteadyStateMethod method, const SweepOptions& opt = {}) {
  if (b_values.empty()) throw Error("empty field list");
  for (std::size_t i = 1; i < b_values.size(); ++i)
    if (!(b_values[i] > b_values[i - 1])) throw Error("field values must be strictly increasing");
  validate(p);

  PolarizationCurve curve;
  curve.backend = method;
  curve.samples.resize(b_values.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < b_values.size(); i = next++) {
      PolarizationSample& s = curve.samples[i];
      s.b = b_values[i];
      try {
        s.polarization = polarization_at(p, s.b, method, opt);
        s.converged = true;
      } catch (const std::exception& e) {
        s.error = e.what();
      }
    }
  };
  const int threads = std::clamp(opt.threads, 1, static_cast<int>(b_values.size()));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return curve;
}

/// Uniform grid b_lo, b_lo + step, ... up to b_hi (inclusive within 1e-9 step).
inline std::vector<double> field_grid(double b_lo, double b_hi, double step) {
  if (!(step > 0.0)) throw Error("field grid: step must be positive");
  if (!(b_lo < b_hi)) throw Error("field grid: requires b_lo < b_hi");
  std::vector<double> out;
  const long n = static_cast<long>(std::floor((b_hi - b_lo) / step + 1e-9));
  for (long i = 0; i <= n; ++i) out.push_back(b_lo + static_cast<double>(i) * step);
  return out;
}

inline void write_polarization_csv(std::ostream& os, const PolarizationCurve& curve) {
  os << "b_mT,polarization,backend,converged\n";
  for (const auto& s : curve.samples)
    os << format_number(s.b) << ',' << format_number(s.polarization) << ',' << to_string(curve.backend)
       << ',' << (s.converged ? "true" : "false") << '\n';
}

}  // namespace lacsim
