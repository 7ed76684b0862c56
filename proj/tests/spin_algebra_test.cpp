#include <gtest/gtest.h>

#include "lacsim/spin_algebra.hpp"

using namespace lacsim;

namespace {

ComplexMatrix diag(std::initializer_list<double> v) {
  ComplexMatrix m = ComplexMatrix::Zero(v.size(), v.size());
  int i = 0;
  for (double x : v) m(i, i) = x, ++i;
  return m;
}

}  // namespace

TEST(SpinMatrices, SpinHalfSz) {
  const auto s = spin_matrices(0.5);
  EXPECT_LT((s.z - diag({0.5, -0.5})).norm(), 1e-15);
}

TEST(SpinMatrices, SpinOne) {
  const auto s = spin_matrices(1.0);
  EXPECT_LT((s.z - diag({1, 0, -1})).norm(), 1e-15);
  EXPECT_NEAR(s.x(0, 1).real(), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(s.x(1, 2).real(), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_EQ(s.x(0, 2), Complex(0.0));
}

TEST(SpinMatrices, CommutationRelations) {
  for (double spin : {0.5, 1.0, 3.0}) {
    const auto s = spin_matrices(spin);
    const ComplexMatrix c = s.x * s.y - s.y * s.x - kI * s.z;
    EXPECT_LT(c.cwiseAbs().maxCoeff(), 1e-13) << spin;
    const ComplexMatrix casimir = s.x * s.x + s.y * s.y + s.z * s.z;
    const auto n = casimir.rows();
    EXPECT_LT((casimir - spin * (spin + 1) * ComplexMatrix::Identity(n, n)).norm(), 1e-12);
  }
}

TEST(SpinMatrices, UnsupportedSpin) {
  try {
    spin_matrices(1.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("unsupported spin"), std::string::npos);
  }
}

TEST(Kron, IdentityAndDiagonal) {
  EXPECT_LT((kron(ComplexMatrix::Identity(2, 2), ComplexMatrix::Identity(3, 3)) - ComplexMatrix::Identity(6, 6)).norm(), 1e-15);
  EXPECT_LT((kron(diag({1, 2}), diag({3, 4})) - diag({3, 4, 6, 8})).norm(), 1e-15);
}

TEST(Embed, FirstSlotAndIdentity) {
  const auto s = spin_matrices(1.0);
  EXPECT_LT((embed(s.z, 0, {3, 3}) - kron(s.z, ComplexMatrix::Identity(3, 3))).norm(), 1e-15);
  for (std::size_t slot = 0; slot < 3; ++slot)
    EXPECT_LT((embed(ComplexMatrix::Identity(3, 3), slot, {3, 3, 3}) - ComplexMatrix::Identity(27, 27)).norm(), 1e-15);
}

TEST(Embed, Errors) {
  const auto s = spin_matrices(1.0);
  EXPECT_THROW(embed(s.z, 2, {3, 3}), Error);
  EXPECT_THROW(embed(s.z, 0, {2, 3}), Error);
}

TEST(HermitianEig, Diagonal) {
  const auto es = hermitian_eig(diag({3, 1, 2}));
  EXPECT_NEAR(es.values[0], 1.0, 1e-15);
  EXPECT_NEAR(es.values[1], 2.0, 1e-15);
  EXPECT_NEAR(es.values[2], 3.0, 1e-15);
}

TEST(HermitianEig, PauliX) {
  ComplexMatrix x(2, 2);
  x << 0, 1, 1, 0;
  const auto es = hermitian_eig(x);
  EXPECT_NEAR(es.values[0], -1.0, 1e-15);
  EXPECT_NEAR(es.values[1], 1.0, 1e-15);
  const double r = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(std::abs(es.vectors(0, 0) + es.vectors(1, 0)), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(es.vectors(0, 0)), r, 1e-14);
  EXPECT_NEAR(std::abs(es.vectors(0, 1) - es.vectors(1, 1)), 0.0, 1e-14);
}

TEST(HermitianEig, RejectsNonHermitian) {
  ComplexMatrix m(2, 2);
  m << 0, 1, 0, 0;
  EXPECT_THROW(hermitian_eig(m), Error);
}

TEST(HermitianEig, BlockSolverMatchesDense) {
  const auto s = spin_matrices(1.0);
  // Two decoupled pieces: a spin-1 Hamiltonian and a 2x2 block.
  ComplexMatrix m = ComplexMatrix::Zero(5, 5);
  m.topLeftCorner(3, 3) = s.x + 0.3 * s.z;
  m(3, 3) = 2.0;
  m(4, 4) = -1.0;
  m(3, 4) = Complex(0.0, 0.5);
  m(4, 3) = Complex(0.0, -0.5);
  const auto dense = hermitian_eig(m);
  const auto blocks = block_hermitian_eig(m);
  EXPECT_LT((dense.values - blocks.values).cwiseAbs().maxCoeff(), 1e-13);
  const ComplexMatrix recon = blocks.vectors * blocks.values.cast<Complex>().asDiagonal() * blocks.vectors.adjoint();
  EXPECT_LT((recon - m).norm(), 1e-13);
  EXPECT_EQ(connected_blocks(m).size(), 2u);
}
