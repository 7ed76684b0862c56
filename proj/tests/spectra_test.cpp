#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "lacsim/spectra.hpp"

using namespace lacsim;

namespace {

double trapezoid(const OdmrSpectrum& s) {
  double a = 0.0;
  for (std::size_t i = 1; i < s.freq.size(); ++i)
    a += 0.5 * (s.contrast[i] + s.contrast[i - 1]) * (s.freq[i] - s.freq[i - 1]);
  return a;
}

SpectrumFit fit_with_areas(const std::vector<double>& areas) {
  SpectrumFit f;
  for (std::size_t k = 0; k < areas.size(); ++k) f.peaks.push_back({100.0 + 10.0 * k, 3.0, areas[k]});
  return f;
}

}  // namespace

TEST(SynthOdmr, UniformPopulationsFollowDegeneracy) {
  const DickePopulations d{{1, 3, 6, 7, 6, 3, 1}};
  const OdmrSpectrum s = synth_odmr(d, 2000.0, 47.0, 12.0, -1.0);
  const auto fit = fit_lorentzians(s);
  ASSERT_EQ(fit.peaks.size(), 7u);
  const double unit = fit.peaks[0].area;
  const std::vector<double> ratio{1, 3, 6, 7, 6, 3, 1};
  for (int k = 0; k < 7; ++k) EXPECT_NEAR(fit.peaks[k].area / unit, ratio[k], 1e-6);
}

TEST(SynthOdmr, SinglePeakArea) {
  const DickePopulations d{{0, 0, 0, 0.4, 0, 0, 0}};
  const OdmrSpectrum s = synth_odmr(d, 2000.0, 47.0, 4.0, 2.5, 20001);
  EXPECT_NEAR(trapezoid(s), 2.5 * 0.4, 0.01 * 2.5 * 0.4);
  const auto peak = std::max_element(s.contrast.begin(), s.contrast.end()) - s.contrast.begin();
  EXPECT_NEAR(s.freq[peak], 2000.0, 1e-9);
}

TEST(FitLorentzians, NoiseFreeRoundTrip) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    DickePopulations d{std::vector<double>(7)};
    for (double& v : d.pops) v = u(rng);
    const auto fit = fit_lorentzians(synth_odmr(d, 2000.0, 47.0, 12.0, -1.0));
    for (int k = 0; k < 7; ++k) EXPECT_NEAR(fit.peaks[k].area / (-d.pops[6 - k]), 1.0, 1e-6);
    EXPECT_NEAR(polarization_from_fit(fit, PeakOrder::minus_first), polarization(d), 1e-6);
    EXPECT_LT(fit.residual_rms, 1e-9);
  }
}

TEST(FitLorentzians, NoisyRoundTrip) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  DickePopulations d{std::vector<double>(7)};
  for (double& v : d.pops) v = u(rng);
  OdmrSpectrum s = synth_odmr(d, 2000.0, 47.0, 12.0, -1.0);
  double amp = 0.0;
  for (double v : s.contrast) amp = std::max(amp, std::abs(v));
  std::normal_distribution<double> noise(0.0, 0.01 * amp);
  for (double& v : s.contrast) v += noise(rng);
  const auto fit = fit_lorentzians(s);
  EXPECT_NEAR(polarization_from_fit(fit, PeakOrder::minus_first), polarization(d), 0.01);
}

TEST(FitLorentzians, SharedWidth) {
  const DickePopulations d{{0.2, 0.5, 0.9, 0.4, 0.3, 0.6, 0.1}};
  FitOptions opt;
  opt.shared_width = true;
  const auto fit = fit_lorentzians(synth_odmr(d, 2000.0, 47.0, 12.0, 1.0), {}, opt);
  for (const auto& pk : fit.peaks) EXPECT_NEAR(pk.fwhm, 12.0, 1e-6);
  EXPECT_NEAR(polarization_from_fit(fit, PeakOrder::minus_first), polarization(d), 1e-6);
}

TEST(FitLorentzians, Errors) {
  OdmrSpectrum flat;
  for (int k = 0; k < 200; ++k) flat.freq.push_back(k), flat.contrast.push_back(0.0);
  EXPECT_THROW(fit_lorentzians(flat), Error);
  OdmrSpectrum tiny{{1, 2, 3, 4, 5}, {0, 1, 0, 1, 0}};
  try {
    fit_lorentzians(tiny);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("fewer grid points than parameters"), std::string::npos);
  }
}

TEST(FitLorentzians, NonConvergenceCarriesBestFit) {
  const DickePopulations d{{0.2, 0.5, 0.9, 0.4, 0.3, 0.6, 0.1}};
  FitOptions opt;
  opt.max_iterations = 1;
  try {
    fit_lorentzians(synth_odmr(d, 2000.0, 47.0, 12.0, -1.0), {}, opt);
    FAIL();
  } catch (const FitError& e) {
    EXPECT_EQ(e.best().peaks.size(), 7u);
  }
}

TEST(PolarizationFromFit, Examples) {
  EXPECT_NEAR(polarization_from_fit(fit_with_areas({1, 1, 1, 1, 1, 1, 1}), PeakOrder::plus_first), 0.0, 1e-16);
  EXPECT_DOUBLE_EQ(polarization_from_fit(fit_with_areas({5, 0, 0, 0, 0, 0, 0}), PeakOrder::plus_first), 1.0);
  EXPECT_DOUBLE_EQ(polarization_from_fit(fit_with_areas({5, 0, 0, 0, 0, 0, 0}), PeakOrder::minus_first), -1.0);
  EXPECT_NEAR(polarization_from_fit(fit_with_areas({2, 3, 6, 7, 6, 3, 0}), PeakOrder::plus_first), 0.0741, 1e-4);
  EXPECT_THROW(polarization_from_fit(fit_with_areas({0, 0, 0, 0, 0, 0, 0}), PeakOrder::plus_first), Error);
  EXPECT_THROW(polarization_from_fit(fit_with_areas({1, -1, 0, 0, 0, 0, 0}), PeakOrder::plus_first), Error);
}

TEST(Contrast, Examples) {
  EXPECT_DOUBLE_EQ(contrast(1, 1), 0.0);
  EXPECT_NEAR(contrast(0.9, 1.1), -0.1, 1e-15);
  EXPECT_DOUBLE_EQ(contrast(2, 0), 1.0);
  EXPECT_THROW(contrast(1, -1), Error);
}

TEST(Odnmr, ZeroHyperfineHasNoLines) {
  SystemParams p;
  p.a_gs = {0, 0, 0};
  p.a_es = {0, 0, 0};
  const auto rho = steady_state(build_block_hamiltonian(p, 80.0), build_jump_operators(p), SteadyStateMethod::secular);
  EXPECT_TRUE(odnmr_lines(p, 80.0, Branch::ms0, rho).empty());
  EXPECT_TRUE(odnmr_lines(p, 80.0, Branch::msMinus1, rho).empty());
}

TEST(Odnmr, LinesAreGroundEigenvalueDifferences) {
  const SystemParams p;
  const double b = 80.0;
  const auto rho = steady_state(build_block_hamiltonian(p, b), build_jump_operators(p), SteadyStateMethod::secular);
  const auto values = hermitian_eig(build_manifold_hamiltonian(p, Manifold::ground, b)).values;
  const OdnmrOptions opt{0.01, 200.0};
  for (Branch br : {Branch::ms0, Branch::msMinus1}) {
    const auto lines = odnmr_lines(p, b, br, rho, opt);
    ASSERT_FALSE(lines.empty());
    for (const auto& l : lines) {
      EXPECT_GT(l.freq, 0.0);
      EXPECT_GE(l.freq, opt.f_min);
      EXPECT_LE(l.freq, opt.f_max);
      EXPECT_GT(l.amplitude, 0.0);
      EXPECT_EQ(l.branch, br);
      double best = 1e300;
      for (int i = 0; i < values.size(); ++i)
        for (int j = i + 1; j < values.size(); ++j) best = std::min(best, std::abs(std::abs(values[i] - values[j]) - l.freq));
      EXPECT_LT(best, 1e-3);
    }
    EXPECT_TRUE(std::is_sorted(lines.begin(), lines.end(), [](auto& a, auto& c) { return a.freq < c.freq; }));
  }
}

TEST(SpectrumCsv, RoundTripAndErrors) {
  const OdmrSpectrum s = synth_odmr(DickePopulations{{1, 2, 3, 4, 3, 2, 1}}, 2000.0, 47.0, 12.0, -1.0, 101);
  std::stringstream io;
  write_spectrum_csv(io, s);
  const OdmrSpectrum back = read_spectrum_csv(io);
  ASSERT_EQ(back.freq.size(), s.freq.size());
  for (std::size_t i = 0; i < s.freq.size(); ++i) EXPECT_NEAR(back.contrast[i], s.contrast[i], 1e-11 * std::abs(s.contrast[i]));  // 12 significant digits
  std::istringstream bad("freq_MHz,contrast\n1,2\n3,x\n");
  try {
    read_spectrum_csv(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(Branch, Parse) {
  EXPECT_EQ(parse_branch("msMinus1"), Branch::msMinus1);
  EXPECT_THROW(parse_branch("ms1"), Error);
}
