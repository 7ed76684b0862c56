#include <gtest/gtest.h>

#include "lacsim/hamiltonian.hpp"

using namespace lacsim;

namespace {

SystemParams no_hyperfine() {
  SystemParams p;
  p.a_gs = {0, 0, 0};
  p.a_es = {0, 0, 0};
  return p;
}

}  // namespace

TEST(ManifoldHamiltonian, ZeroFieldSpectrum) {
  const SystemParams p = no_hyperfine();
  const ComplexMatrix h = build_manifold_hamiltonian(p, Manifold::ground, 0.0);
  ASSERT_EQ(h.rows(), 81);
  const auto es = hermitian_eig(h);
  for (int k = 0; k < 27; ++k) EXPECT_NEAR(es.values[k], 0.0, 1e-9);
  for (int k = 27; k < 81; ++k) EXPECT_NEAR(es.values[k], p.d_gs, 1e-9);
}

TEST(ManifoldHamiltonian, ShelvingIsZeroAndHermitian) {
  const SystemParams p;
  const ComplexMatrix s = build_manifold_hamiltonian(p, Manifold::shelving, 50.0);
  ASSERT_EQ(s.rows(), 27);
  EXPECT_EQ(s.norm(), 0.0);
  for (auto m : {Manifold::ground, Manifold::excited})
    EXPECT_TRUE(is_hermitian(build_manifold_hamiltonian(p, m, 80.0)));
}

TEST(ManifoldHamiltonian, Errors) {
  SystemParams p;
  EXPECT_THROW(build_manifold_hamiltonian(p, Manifold::ground, -1.0), Error);
  p.d_gs = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(build_manifold_hamiltonian(p, Manifold::ground, 10.0), Error);
}

TEST(Anticrossing, AnalyticWithoutHyperfine) {
  const SystemParams p = no_hyperfine();
  const auto r = find_anticrossing(p, Manifold::ground, 28.0, 200.0);
  EXPECT_NEAR(r.b_star, p.d_gs / p.gamma_e, 1e-6 * p.d_gs / p.gamma_e);
  EXPECT_LT(r.gap, 1e-6);
}

TEST(Anticrossing, AvoidedWithHyperfine) {
  const SystemParams p;
  const auto r = find_anticrossing(p, Manifold::ground, 100.0, 150.0);
  EXPECT_GT(r.gap, 0.0);
  EXPECT_NEAR(r.b_star, p.d_gs / p.gamma_e, 5.0);
}

TEST(Anticrossing, OutOfRange) {
  try {
    find_anticrossing(SystemParams{}, Manifold::ground, 20.0, 60.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "no anticrossing in range");
  }
}

TEST(Brightness, BinaryWithoutHyperfine) {
  const auto br = eigenstate_brightness(build_manifold_hamiltonian(no_hyperfine(), Manifold::ground, 60.0));
  ASSERT_EQ(br.size(), 81u);
  double sum = 0.0;
  for (const auto& b : br) {
    EXPECT_TRUE(std::abs(b.brightness) < 1e-12 || std::abs(b.brightness - 1.0) < 1e-12);
    sum += b.brightness;
  }
  EXPECT_NEAR(sum, 27.0, 1e-9);
}

TEST(Brightness, MixedNearGslac) {
  const SystemParams p;
  const auto br = eigenstate_brightness(build_manifold_hamiltonian(p, Manifold::ground, 124.0));
  double sum = 0.0;
  bool mixed = false;
  for (const auto& b : br) {
    sum += b.brightness;
    mixed = mixed || (b.brightness > 0.1 && b.brightness < 0.9);
  }
  EXPECT_NEAR(sum, 27.0, 1e-9);
  EXPECT_TRUE(mixed);
  EXPECT_THROW(eigenstate_brightness(ComplexMatrix::Zero(80, 80)), Error);
}

TEST(QuantumNumberMixing, EqualTransverseConservesSector) {
  SystemParams p;
  p.a_gs[0] = p.a_gs[1] = 0.5 * (p.a_gs[0] + p.a_gs[1]);
  for (const auto& sw : classify_quantum_number_mixing(build_manifold_hamiltonian(p, Manifold::ground, 120.0))) {
    const double top = *std::max_element(sw.weights.begin(), sw.weights.end());
    EXPECT_NEAR(top, 1.0, 1e-9);
  }
}

TEST(QuantumNumberMixing, UnequalTransverseMixesByTwo) {
  const auto sectors = classify_quantum_number_mixing(build_manifold_hamiltonian(SystemParams{}, Manifold::ground, 120.0));
  bool found = false;
  for (const auto& sw : sectors) {
    for (std::size_t i = 0; i + 2 < sw.weights.size(); ++i)
      found = found || (sw.weights[i] > 1e-3 && sw.weights[i + 2] > 1e-3);
    double total = 0.0;
    for (double w : sw.weights) total += w;
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
  EXPECT_TRUE(found);
  EXPECT_THROW(classify_quantum_number_mixing(ComplexMatrix::Zero(3, 3)), Error);
}
