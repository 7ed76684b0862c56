#pragma once

// Time evolution under the Lindblad generator.
//
// Two integrators sit behind evolve():
//  * Dormand-Prince 5(4), explicit, for non-stiff problems and for jump
//    operators of arbitrary shape;
//  * exponential Runge-Kutta (ETDRK4) in the eigenbasis of H, which
//    integrates the GHz coherent dynamics and the mean decay of every block
//    exactly. This is the route for the optical-cycle model, where rates span
//    0.1-800 MHz and the zero-field splitting sets GHz coherent frequencies.
//
// Both control the local error per unit time: ||err||_F <= tol * h.

#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <string>

#include "lacsim/detail/exponential_integrator.hpp"
#include "lacsim/lindblad.hpp"

namespace lacsim {

enum class Integrator { automatic, explicit_rk, exponential };

struct EvolveOptions {
  Integrator integrator = Integrator::automatic;
  /// Explicit steps the automatic choice is willing to spend before taking
  /// the exponential route up front.
  double explicit_step_budget = 20000;
  long max_steps = 2'000'000;
  /// Called after every accepted step with the current time and state.
  std::function<void(double, const ComplexMatrix&)> on_step;
  /// Stops integration early when it returns true (checked after each accepted step).
  std::function<bool(double, const ComplexMatrix&)> stop_when;
  /// When positive, on_step/stop_when only see accepted steps at least this far
  /// (us) past the previous observation, plus the final state. Handing the state
  /// out costs a change of basis on the exponential route.
  double observe_every = 0.0;
};

struct EvolveStats {
  long accepted = 0;
  long rejected = 0;
  double final_time = 0.0;
  bool used_exponential = false;
  bool fell_back = false;
  bool stopped_early = false;
};

namespace detail {

inline void hermitize(ComplexMatrix& m) { m = 0.5 * (m + m.adjoint()).eval(); }

// Decides which accepted steps are handed to the callbacks.
struct Observer {
  const EvolveOptions& opt;
  double last;

  bool operator()(double t, bool final_step) {
    if (opt.observe_every <= 0.0 || final_step || t - last >= opt.observe_every) {
      last = t;
      return true;
    }
    return false;
  }
};

struct ExplicitOutcome {
  ComplexMatrix state;
  double t;
  bool underflow;
  std::string diagnostic;
};

inline ExplicitOutcome evolve_explicit(const ComplexMatrix& h, const std::vector<JumpOperator>& jumps,
                                       ComplexMatrix y, double t_final, double tol,
                                       const EvolveOptions& opt, EvolveStats& stats) {
  // Dormand-Prince 5(4) tableau.
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  auto f = [&](const ComplexMatrix& x) { return lindblad_rhs(h, jumps, x); };
  double t = 0.0;
  const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
  double dt = std::min(t_final, 0.01 / (kTwoPi * scale));
  ComplexMatrix k1 = f(y);
  long steps = 0;
  Observer observe{opt, 0.0};
  while (t < t_final) {
    if (steps++ >= opt.max_steps || dt < 1e-14 * t_final) {
      std::ostringstream msg;
      msg << "step size " << dt << " us at t = " << t << " us after " << stats.accepted
          << " accepted steps";
      return {y, t, true, msg.str()};
    }
    dt = std::min(dt, t_final - t);
    const ComplexMatrix k2 = f(y + dt * a21 * k1);
    const ComplexMatrix k3 = f(y + dt * (a31 * k1 + a32 * k2));
    const ComplexMatrix k4 = f(y + dt * (a41 * k1 + a42 * k2 + a43 * k3));
    const ComplexMatrix k5 = f(y + dt * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const ComplexMatrix k6 = f(y + dt * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    ComplexMatrix y_new = y + dt * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const ComplexMatrix k7 = f(y_new);
    const double err =
        (dt * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7)).norm();
    const double ratio = err / (tol * dt);
    if (ratio <= 1.0) {
      t += dt;
      hermitize(y_new);
      y = std::move(y_new);
      k1 = k7;
      ++stats.accepted;
      if (observe(t, t >= t_final)) {
        if (opt.on_step) opt.on_step(t, y);
        if (opt.stop_when && opt.stop_when(t, y)) {
          stats.stopped_early = true;
          break;
        }
      }
    } else {
      ++stats.rejected;
    }
    const double factor = ratio > 0 ? 0.9 * std::pow(ratio, -0.2) : 5.0;
    dt *= std::clamp(std::isfinite(factor) ? factor : 0.2, 0.2, 5.0);
  }
  return {y, t, false, {}};
}

inline ComplexMatrix evolve_exponential(const ExponentialPropagator& prop, const ComplexMatrix& rho0,
                                        double t_start, double t_final, double tol,
                                        const EvolveOptions& opt, EvolveStats& stats) {
  ComplexMatrix y = prop.to_internal(rho0);
  const double trace0 = y.trace().real();
  const double span = t_final - t_start;
  double t = t_start;
  double dt = std::min(span, 0.01 / std::max(1.0, prop.explicit_rate()));
  long steps = 0;
  Observer observe{opt, t_start};
  while (t < t_final) {
    if (steps++ >= opt.max_steps || dt < 1e-14 * std::max(1.0, t_final)) {
      std::ostringstream msg;
      msg << "stiffness failure: exponential step underflow at t = " << t << " us (step " << dt
          << " us)";
      throw Error(msg.str());
    }
    const bool last = dt >= t_final - t;
    detail::ExponentialPropagator::StepResult result;
    if (last) {
      dt = t_final - t;
      result = prop.step(y, prop.coefficients(dt));
    } else {
      const auto [hq, coeffs] = prop.grid_coefficients(dt);
      dt = hq;
      result = prop.step(y, *coeffs);
    }
    const double ratio = result.error / (tol * dt);
    if (ratio <= 1.0) {
      y = std::move(result.y);
      hermitize(y);
      // The trace is a linear invariant of the exact flow; restore it by
      // projection (the defect is already bounded by the error control).
      y *= trace0 / y.trace().real();
      t = last ? t_final : t + dt;
      ++stats.accepted;
      stats.final_time = t;
      if ((opt.on_step || opt.stop_when) && observe(t, last)) {
        const ComplexMatrix ext = prop.to_external(y);
        if (opt.on_step) opt.on_step(t, ext);
        if (opt.stop_when && opt.stop_when(t, ext)) {
          stats.stopped_early = true;
          break;
        }
      }
    } else {
      ++stats.rejected;
    }
    // Local error of the embedded pair is O(dt^3); per unit time O(dt^2).
    const double factor = ratio > 0 ? 0.9 / std::sqrt(ratio) : 5.0;
    dt *= std::clamp(std::isfinite(factor) ? factor : 0.2, 0.2, 5.0);
  }
  return prop.to_external(y);
}

}  // namespace detail

/// Integrates the Lindblad equation from rho0 over [0, t_final] microseconds.
inline DensityMatrix evolve(const ComplexMatrix& h, const std::vector<JumpOperator>& jumps,
                            const DensityMatrix& rho0, double t_final, double tol,
                            const EvolveOptions& opt = {}, EvolveStats* stats_out = nullptr) {
  if (!(t_final > 0.0)) throw Error("evolve: t_final must be positive");
  if (!(tol > 0.0)) throw Error("evolve: tol must be positive");
  check_generator_dims(h, jumps, rho0.dim());
  EvolveStats stats;
  const bool structured = detail::ExponentialPropagator::supports(jumps);

  Integrator route = opt.integrator;
  std::optional<detail::ExponentialPropagator> prop;
  if (route == Integrator::exponential && !structured) {
    throw Error("evolve: exponential route needs single-transition jump operators");
  }
  if (route == Integrator::automatic) {
    route = Integrator::explicit_rk;
    if (structured) {
      // Explicit steps are bounded by the largest frequency of the generator.
      RealVector out_rate = RealVector::Zero(h.rows());
      for (const auto& j : jumps) out_rate[j.entries.front().col] += j.rate * std::norm(j.entries.front().value);
      const double scale =
          kTwoPi * (2.0 * h.cwiseAbs().rowwise().sum().maxCoeff() + out_rate.maxCoeff());
      if (scale * t_final / 3.0 > opt.explicit_step_budget) route = Integrator::exponential;
    }
  }

  ComplexMatrix result;
  auto finish_exponential = [&](const ComplexMatrix& start, double t0) {
    if (!prop) prop.emplace(h, jumps);
    stats.used_exponential = true;
    try {
      result = detail::evolve_exponential(*prop, start, t0, t_final, tol, opt, stats);
    } catch (...) {
      if (stats_out) *stats_out = stats;
      throw;
    }
  };
  if (route == Integrator::explicit_rk) {
    auto out = detail::evolve_explicit(h, jumps, rho0.matrix(), t_final, tol, opt, stats);
    stats.final_time = out.t;
    if (!out.underflow) {
      result = std::move(out.state);
    } else if (structured && opt.integrator == Integrator::automatic) {
      stats.fell_back = true;
      finish_exponential(out.state, out.t);
    } else {
      if (stats_out) *stats_out = stats;
      throw Error("stiffness failure: " + out.diagnostic);
    }
  } else {
    finish_exponential(rho0.matrix(), 0.0);
  }
  if (stats_out) *stats_out = stats;
  return DensityMatrix(std::move(result));
}

}  // namespace lacsim
