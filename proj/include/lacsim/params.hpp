#pragma once

#include <array>
#include <cmath>
#include <string>

#include "lacsim/error.hpp"

namespace lacsim {

/// Incoherent rates of the optical cycle, all in MHz.
struct RateSet {
  double gamma_r = 0.11;   // radiative decay excited -> ground
  double gamma_0 = 220.0;  // ISC from excited m_s = 0
  double gamma_1 = 450.0;  // ISC from excited m_s = +-1
  double kappa_0 = 210.0;  // shelving -> ground m_s = 0
  double kappa_1 = 10.0;   // shelving -> ground m_s = +1 and to m_s = -1
  double gamma_mix = 30.0; // shelving nuclear scrambling, per ordered pair of nuclear states
};

/// Diagonal hyperfine tensor in the defect frame, MHz.
using Hyperfine = std::array<double, 3>;

/// Physical constants of the V_B^- model. Frequencies in MHz, fields in mT.
struct SystemParams {
  double d_gs = 3480.0;
  double d_es = 2100.0;
  double gamma_e = 28.0;      // MHz/mT
  double gamma_n = 0.003077;  // MHz/mT, 14N
  double q = 0.0;
  Hyperfine a_gs{69.17, 137.36, 47.94};
  Hyperfine a_es{23.06, 45.79, 23.07};
  RateSet rates{};
  double pump_rate = 1.0;
};

inline void validate(const SystemParams& p) {
  auto finite = [](double v) { return std::isfinite(v); };
  const double scalars[] = {p.d_gs, p.d_es, p.gamma_e, p.gamma_n, p.q, p.pump_rate,
                            p.rates.gamma_r, p.rates.gamma_0, p.rates.gamma_1,
                            p.rates.kappa_0, p.rates.kappa_1, p.rates.gamma_mix};
  for (double v : scalars)
    if (!finite(v)) throw Error("non-finite parameter");
  for (double v : p.a_gs)
    if (!finite(v)) throw Error("non-finite parameter");
  for (double v : p.a_es)
    if (!finite(v)) throw Error("non-finite parameter");
  if (p.gamma_e < 0 || p.gamma_n < 0) throw Error("gyromagnetic ratios must be non-negative");
  const double rates[] = {p.pump_rate, p.rates.gamma_r, p.rates.gamma_0, p.rates.gamma_1,
                          p.rates.kappa_0, p.rates.kappa_1, p.rates.gamma_mix};
  for (double v : rates)
    if (v < 0) throw Error("rates must be non-negative");
}

}  // namespace lacsim
