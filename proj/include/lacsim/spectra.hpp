#pragma once

// ODMR spectrum synthesis, multi-Lorentzian fitting and ODNMR line tables.
//
// Lorentzians are area-normalized, L(f) = A (G / 2pi) / ((f - c)^2 + (G/2)^2),
// so a fitted A is directly the sub-peak area.

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <unsupported/Eigen/LevenbergMarquardt>

#include "lacsim/format.hpp"
#include "lacsim/polarization.hpp"

namespace lacsim {

struct OdmrSpectrum {
  std::vector<double> freq;      // MHz, strictly increasing
  std::vector<double> contrast;  // dimensionless
};

struct LorentzianPeak {
  double center = 0.0;  // MHz
  double fwhm = 0.0;    // MHz
  double area = 0.0;    // contrast * MHz
};

struct SpectrumFit {
  std::vector<LorentzianPeak> peaks;  // ascending center
  double baseline = 0.0;
  double residual_rms = 0.0;
  int iterations = 0;
};

/// Fit failure; carries the best parameters reached.
class FitError : public Error {
 public:
  FitError(const std::string& what, SpectrumFit best) : Error(what), best_(std::move(best)) {}
  const SpectrumFit& best() const { return best_; }

 private:
  SpectrumFit best_;
};

inline double lorentzian(double f, const LorentzianPeak& p) {
  const double u = f - p.center, half = 0.5 * p.fwhm;
  return p.area * (p.fwhm / kTwoPi) / (u * u + half * half);
}

/// Sub-peaks at f0 + m * spacing with area scale * pops(m), on `points` uniform
/// samples of [f0 - 4 spacing, f0 + 4 spacing].
inline OdmrSpectrum synth_odmr(const DickePopulations& d, double f0, double spacing, double fwhm,
                               double scale, int points = 2001) {
  if (!(spacing > 0.0)) throw Error("synth_odmr: spacing must be positive");
  if (!(fwhm > 0.0)) throw Error("synth_odmr: fwhm must be positive");
  if (points < 2) throw Error("synth_odmr: need at least two samples");
  std::vector<LorentzianPeak> peaks;
  for (std::size_t i = 0; i < d.pops.size(); ++i)
    peaks.push_back({f0 + d.m_of(i) * spacing, fwhm, scale * d.pops[i]});
  OdmrSpectrum s;
  const double lo = f0 - 4.0 * spacing, step = 8.0 * spacing / (points - 1);
  for (int k = 0; k < points; ++k) {
    const double f = lo + k * step;
    double c = 0.0;
    for (const auto& p : peaks) c += lorentzian(f, p);
    s.freq.push_back(f);
    s.contrast.push_back(c);
  }
  return s;
}

struct FitOptions {
  int n_peaks = 7;
  /// One width shared by all peaks instead of free widths.
  bool shared_width = false;
  int max_iterations = 500;
  double relative_decrease = 1e-10;
};

namespace detail {

// Parameter vector: centers[n], areas[n], widths[n or 1], baseline.
struct LorentzianModel : Eigen::DenseFunctor<double> {
  const OdmrSpectrum* s;
  int n;
  bool shared;

  LorentzianModel(const OdmrSpectrum& spec, int n_peaks, bool shared_width)
      : DenseFunctor<double>(2 * n_peaks + (shared_width ? 1 : n_peaks) + 1,
                             static_cast<int>(spec.freq.size())),
        s(&spec), n(n_peaks), shared(shared_width) {}

  double width(const InputType& x, int k) const { return x[2 * n + (shared ? 0 : k)]; }
  Eigen::Index baseline_index() const { return 2 * n + (shared ? 1 : n); }

  int operator()(const InputType& x, ValueType& r) const {
    for (Eigen::Index i = 0; i < values(); ++i) {
      double model = x[baseline_index()];
      for (int k = 0; k < n; ++k) model += lorentzian(s->freq[i], {x[k], width(x, k), x[n + k]});
      r[i] = model - s->contrast[i];
    }
    return 0;
  }

  int df(const InputType& x, JacobianType& jac) const {
    jac.setZero(values(), inputs());
    for (Eigen::Index i = 0; i < values(); ++i) {
      for (int k = 0; k < n; ++k) {
        const double g = width(x, k), a = x[n + k];
        const double u = s->freq[i] - x[k];
        const double den = u * u + 0.25 * g * g;
        jac(i, k) = a * (g / kTwoPi) * 2.0 * u / (den * den);
        jac(i, n + k) = (g / kTwoPi) / den;
        jac(i, 2 * n + (shared ? 0 : k)) += a / kTwoPi * (1.0 / den - 0.5 * g * g / (den * den));
      }
      jac(i, baseline_index()) = 1.0;
    }
    return 0;
  }
};

inline SpectrumFit unpack_fit(const Eigen::VectorXd& x, const LorentzianModel& m) {
  SpectrumFit f;
  for (int k = 0; k < m.n; ++k) f.peaks.push_back({x[k], std::abs(m.width(x, k)), x[m.n + k]});
  std::stable_sort(f.peaks.begin(), f.peaks.end(),
                   [](const auto& a, const auto& b) { return a.center < b.center; });
  f.baseline = x[m.baseline_index()];
  Eigen::VectorXd r(m.values());
  m(x, r);
  f.residual_rms = std::sqrt(r.squaredNorm() / static_cast<double>(r.size()));
  return f;
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

// Initial guess: equally spaced centers from the two outermost dips of the
// smoothed trace (peaks are handled by flipping the sign), common width
// spacing / 3, areas from the depths.
inline SpectrumFit initial_guess(const OdmrSpectrum& s, int n_peaks) {
  const std::size_t m = s.freq.size();
  const double mid = median(s.contrast);
  const auto [lo_it, hi_it] = std::minmax_element(s.contrast.begin(), s.contrast.end());
  const double sign = mid - *lo_it >= *hi_it - mid ? 1.0 : -1.0;  // +1: dips
  // Overlapping features pull the median in; the opposite extreme is closer
  // to the true baseline.
  const double base = sign > 0 ? *hi_it : *lo_it;
  std::vector<double> depth(m);
  const std::size_t half = std::max<std::size_t>(1, m / 100);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t a = i >= half ? i - half : 0;
    const std::size_t b = std::min(m - 1, i + half);
    double acc = 0.0;
    for (std::size_t k = a; k <= b; ++k) acc += s.contrast[k] - base;
    depth[i] = -sign * acc / static_cast<double>(b - a + 1);
  }
  const double deepest = *std::max_element(depth.begin(), depth.end());
  // A dip must dominate its +-half neighbourhood and clear 5% of the deepest.
  std::vector<std::size_t> minima;
  for (std::size_t i = 1; i + 1 < m; ++i) {
    if (depth[i] < 0.05 * deepest) continue;
    const std::size_t a = i >= half ? i - half : 0;
    const std::size_t b = std::min(m - 1, i + half);
    bool dominant = true;
    for (std::size_t k = a; k <= b && dominant; ++k)
      dominant = k == i || (k < i ? depth[k] < depth[i] : depth[k] <= depth[i]);
    if (dominant) minima.push_back(i);
  }
  if (minima.empty()) throw Error("singular fit: no spectral features");

  const double span = s.freq.back() - s.freq.front();
  double first = s.freq[minima.front()], last = s.freq[minima.back()];
  double spacing = span / (4.0 * n_peaks);
  int covered = n_peaks - 1;
  if (minima.size() >= 2) {
    std::vector<double> gaps;
    for (std::size_t i = 1; i < minima.size(); ++i) gaps.push_back(s.freq[minima[i]] - s.freq[minima[i - 1]]);
    const double typical = median(gaps);
    covered = std::clamp(static_cast<int>(std::lround((last - first) / typical)), 1, n_peaks - 1);
    spacing = (last - first) / covered;
  }
  // Peaks missing from the trace go to whichever side has more room.
  for (int extra = n_peaks - 1 - covered; extra > 0; --extra) {
    if (first - s.freq.front() >= s.freq.back() - last) first -= spacing;
    else last += spacing;
  }
  SpectrumFit f;
  f.baseline = base;
  const double width = spacing / 3.0;
  for (int k = 0; k < n_peaks; ++k) {
    const double c = first + k * spacing;
    const auto it = std::lower_bound(s.freq.begin(), s.freq.end(), c);
    const std::size_t idx = std::min<std::size_t>(m - 1, static_cast<std::size_t>(it - s.freq.begin()));
    // Peak height of the area-normalized form is 2A / (pi G).
    const double height = s.contrast[idx] - base;
    f.peaks.push_back({c, width, height * 0.25 * kTwoPi * width});
  }
  return f;
}

}  // namespace detail

/// Damped least-squares fit of n Lorentzians plus a constant baseline.
inline SpectrumFit fit_lorentzians(const OdmrSpectrum& s, const std::optional<SpectrumFit>& init = {},
                                   const FitOptions& opt = {}) {
  if (s.freq.size() != s.contrast.size()) throw Error("spectrum: length mismatch");
  for (std::size_t i = 1; i < s.freq.size(); ++i)
    if (!(s.freq[i] > s.freq[i - 1])) throw Error("spectrum: frequencies must be strictly increasing");
  if (opt.n_peaks < 1) throw Error("fit: need at least one peak");
  detail::LorentzianModel model(s, opt.n_peaks, opt.shared_width);
  if (model.values() < model.inputs()) throw Error("fit: fewer grid points than parameters");
  const auto [lo, hi] = std::minmax_element(s.contrast.begin(), s.contrast.end());
  if (*hi - *lo == 0.0) throw Error("singular fit: flat spectrum");

  const SpectrumFit start = init ? *init : detail::initial_guess(s, opt.n_peaks);
  if (static_cast<int>(start.peaks.size()) != opt.n_peaks) throw Error("fit: initial guess has wrong peak count");
  Eigen::VectorXd x(model.inputs());
  for (int k = 0; k < opt.n_peaks; ++k) {
    x[k] = start.peaks[k].center;
    x[opt.n_peaks + k] = start.peaks[k].area;
    if (!opt.shared_width) x[2 * opt.n_peaks + k] = start.peaks[k].fwhm;
  }
  if (opt.shared_width) x[2 * opt.n_peaks] = start.peaks.front().fwhm;
  x[model.baseline_index()] = start.baseline;

  Eigen::LevenbergMarquardt<detail::LorentzianModel> lm(model);
  lm.setFtol(opt.relative_decrease);
  lm.setXtol(1e-14);
  lm.setMaxfev(100 * opt.max_iterations);
  auto status = lm.minimizeInit(x);
  if (status == Eigen::LevenbergMarquardtSpace::ImproperInputParameters)
    throw FitError("fit: improper input", detail::unpack_fit(x, model));
  double cost = lm.fnorm() * lm.fnorm();
  for (int it = 1; it <= opt.max_iterations; ++it) {
    status = lm.minimizeOneStep(x);
    const double next = lm.fnorm() * lm.fnorm();
    const bool small_decrease = cost - next <= opt.relative_decrease * cost;
    cost = next;
    if (status != Eigen::LevenbergMarquardtSpace::Running || small_decrease) {
      if (status == Eigen::LevenbergMarquardtSpace::TooManyFunctionEvaluation)
        break;
      SpectrumFit f = detail::unpack_fit(x, model);
      f.iterations = it;
      if (!x.allFinite()) throw FitError("singular fit", f);
      return f;
    }
  }
  SpectrumFit best = detail::unpack_fit(x, model);
  best.iterations = opt.max_iterations;
  throw FitError("fit did not converge", best);
}

/// Lowest-frequency peak carries m = +n (plus_first) or m = -n (minus_first).
enum class PeakOrder { plus_first, minus_first };

inline double polarization_from_fit(const SpectrumFit& f, PeakOrder order) {
  const int count = static_cast<int>(f.peaks.size());
  if (count < 3 || count % 2 == 0) throw Error("polarization_from_fit: need an odd number of peaks");
  const int n = (count - 1) / 2;
  double total = 0.0, first = 0.0;
  bool pos = false, neg = false;
  for (int k = 0; k < count; ++k) {
    const double a = f.peaks[k].area;
    pos = pos || a > 0;
    neg = neg || a < 0;
    const int m = order == PeakOrder::plus_first ? n - k : k - n;
    total += a;
    first += m * a;
  }
  if (pos && neg) throw Error("polarization_from_fit: mixed area signs");
  if (total == 0.0) throw Error("zero total area");
  return first / (n * total);
}

enum class ContrastKind { pulsed_odmr, odnmr };

/// (signal - reference) / (signal + reference).
inline double contrast(double signal, double reference, ContrastKind = ContrastKind::pulsed_odmr) {
  const double den = signal + reference;
  if (den == 0.0) throw Error("contrast: zero denominator");
  return (signal - reference) / den;
}

enum class Branch { ms0, msMinus1 };

inline const char* to_string(Branch b) { return b == Branch::ms0 ? "ms0" : "msMinus1"; }

inline Branch parse_branch(const std::string& s) {
  if (s == "ms0") return Branch::ms0;
  if (s == "msMinus1") return Branch::msMinus1;
  throw Error("unknown branch: " + s);
}

struct OdnmrLine {
  double freq;       // MHz
  double amplitude;  // >= 0
  Branch branch;
};

struct OdnmrOptions {
  double f_min = 0.01;   // MHz
  double f_max = 200.0;  // MHz
};

/// Nuclear transitions between ground eigenstates of one branch. Amplitude:
/// |<i|I_x,total|j>|^2 |pop_i - pop_j| |bright_i - bright_j|; a state belongs
/// to the m_s = 0 (or -1) branch when that electron weight is at least 1/2.
inline std::vector<OdnmrLine> odnmr_lines(const SystemParams& p, double b, Branch branch,
                                          const DensityMatrix& steady, const OdnmrOptions& opt = {}) {
  const ModelLayout lay = ModelLayout::for_dim(steady.dim());
  const int n = lay.n_nuclei, m = lay.manifold();
  const ComplexMatrix hg = build_manifold_hamiltonian(p, Manifold::ground, b, n);
  const EigenSystem es = block_hermitian_eig(hg);
  const RealMatrix w = detail::electron_weights(es.vectors, n);
  const ComplexMatrix rho_g = steady.matrix().block(lay.ground_offset(), lay.ground_offset(), m, m);
  const RealVector pops = (es.vectors.adjoint() * rho_g * es.vectors).diagonal().real();

  std::vector<int> dims(n + 1, 3);
  const SpinMatrices s1 = spin_matrices(1.0);
  ComplexMatrix ix = ComplexMatrix::Zero(m, m);
  for (int i = 1; i <= n; ++i) ix += embed(s1.x, i, dims);
  const ComplexMatrix ix_eig = es.vectors.adjoint() * ix * es.vectors;

  const int member_row = branch == Branch::ms0 ? 1 : 2;
  std::vector<OdnmrLine> lines;
  for (int i = 0; i < m; ++i) {
    if (w(member_row, i) < 0.5) continue;
    for (int j = i + 1; j < m; ++j) {
      if (w(member_row, j) < 0.5) continue;
      const double f = std::abs(es.values[i] - es.values[j]);
      if (f < opt.f_min || f > opt.f_max || f <= 0.0) continue;
      const double amp = std::norm(ix_eig(i, j)) * std::abs(pops[i] - pops[j]) * std::abs(w(1, i) - w(1, j));
      lines.push_back({f, amp, branch});
    }
  }
  double peak = 0.0;
  for (const auto& l : lines) peak = std::max(peak, l.amplitude);
  const double floor = std::max(1e-6 * peak, 1e-15);
  std::erase_if(lines, [&](const OdnmrLine& l) { return l.amplitude < floor; });
  std::stable_sort(lines.begin(), lines.end(), [](const auto& a, const auto& c) { return a.freq < c.freq; });
  return lines;
}

inline void write_odnmr_csv(std::ostream& os, const std::vector<OdnmrLine>& lines) {
  os << "freq_MHz,amplitude,branch\n";
  for (const auto& l : lines)
    os << format_number(l.freq) << ',' << format_number(l.amplitude) << ',' << to_string(l.branch) << '\n';
}

inline void write_spectrum_csv(std::ostream& os, const OdmrSpectrum& s) {
  os << "freq_MHz,contrast\n";
  for (std::size_t i = 0; i < s.freq.size(); ++i)
    os << format_number(s.freq[i]) << ',' << format_number(s.contrast[i]) << '\n';
}

/// Two-column CSV with one header line.
inline OdmrSpectrum read_spectrum_csv(std::istream& is) {
  OdmrSpectrum s;
  std::string line;
  if (!std::getline(is, line)) throw Error("spectrum csv: missing header");
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::istringstream row(line);
    std::string a, c;
    std::getline(row, a, ',');
    std::getline(row, c);
    try {
      const double f = std::stod(a), v = std::stod(c);
      s.freq.push_back(f);
      s.contrast.push_back(v);
    } catch (const std::exception&) {
      throw Error("spectrum csv: bad number at line " + std::to_string(lineno) + ": " + line);
    }
  }
  return s;
}

}  // namespace lacsim
