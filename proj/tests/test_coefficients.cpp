#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "cgl/coefficients.hpp"
#include "cgl/errors.hpp"
#include "cgl/spectral.hpp"

namespace cgl {
namespace {

constexpr double kPi = std::numbers::pi;

// <(1 + cos 2x) e_j, e_l> in the normalized sine basis, from product-to-sum identities.
Eigen::MatrixXd analytic_potential_matrix(int n) {
  Eigen::MatrixXd g = Eigen::MatrixXd::Identity(n, n);
  for (int j = 1; j <= n; ++j)
    for (int l = 1; l <= n; ++l) {
      if (std::abs(j - l) == 2) g(j - 1, l - 1) += 0.5;
      if (j + l == 2) g(j - 1, l - 1) -= 0.5;
    }
  return g;
}

TEST(DampingShifts, ConstantPotentials) {
  for (double c : {0.0, 1.0}) {
    const auto V = PotentialSpec::constant(c);
    const auto b = build_basis(V, 5, 20);
    const auto M = compute_damping_shifts(b, V);
    for (int k = 0; k < 5; ++k) EXPECT_NEAR(M[k], c, 1e-12);
  }
}

TEST(DampingShifts, MatchesAnalyticGalerkinForm) {
  const auto V = PotentialSpec::trig({1.0, 0.0, 1.0});
  const auto b = build_basis(V, 6, 32);
  const auto M = compute_damping_shifts(b, V);
  const Eigen::MatrixXd G = analytic_potential_matrix(b.n_galerkin);
  for (int k = 0; k < b.m; ++k) {
    const Eigen::VectorXd psi = b.psi.row(k).transpose();
    EXPECT_NEAR(M[k], psi.dot(G * psi), 1e-9);
  }
}

TEST(DampingShifts, GapEqualsDirichletEnergy) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int trial = 0; trial < 5; ++trial) {
    const auto V = PotentialSpec::trig({2.0, u(rng), u(rng), u(rng)});
    const auto b = build_basis(V, 6, 32);
    const auto M = compute_damping_shifts(b, V);
    for (int k = 0; k < b.m; ++k) {
      double grad = 0.0;
      for (int j = 0; j < b.n_galerkin; ++j) grad += (j + 1.0) * (j + 1.0) * b.psi(k, j) * b.psi(k, j);
      EXPECT_NEAR(b.lambda[k] - M[k], grad, 1e-8);
      EXPECT_GE(b.lambda[k] - M[k], -1e-8);
    }
  }
}

TEST(DampingShifts, RejectsForeignPotential) {
  const auto b = build_basis(PotentialSpec::constant(1.0), 4, 16);
  EXPECT_THROW(compute_damping_shifts(b, PotentialSpec::constant(2.0)), ValidationError);
}

TEST(InteractionMatrix, FreeOperatorClosedForm) {
  const auto b = build_basis(PotentialSpec::zero(), 5, 20);
  const auto im = compute_interaction_matrix(b);
  for (int k = 0; k < 5; ++k)
    for (int l = 0; l < 5; ++l) {
      const double expected = k == l ? 3.0 / (4.0 * kPi) : 1.0 / (2.0 * kPi);
      EXPECT_NEAR(im.Lprime(k, l), expected, 1e-12);
      EXPECT_NEAR(im.L(k, l), (k == l ? 1.0 : 2.0) * expected, 1e-12);
    }
}

TEST(InteractionMatrix, SymmetricAndPositiveForRandomPotentials) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    const auto b = build_basis(PotentialSpec::trig({3.0, u(rng), u(rng), u(rng)}), 6, 32);
    const auto im = compute_interaction_matrix(b);
    EXPECT_EQ(im.Lprime, im.Lprime.transpose());
    EXPECT_EQ(im.L, im.L.transpose());
    EXPECT_GT(im.Lprime.minCoeff(), 0.0);
    for (int k = 0; k < 6; ++k)
      for (int l = 0; l < 6; ++l) EXPECT_EQ(im.L(k, l), (k == l ? 1.0 : 2.0) * im.Lprime(k, l));
  }
}

TEST(NoiseCoefficients, IdentityBasisGivesAmplitudes) {
  const auto b = build_basis(PotentialSpec::zero(), 4, 16);
  const auto noise = NoiseSpec::exponential(1.0, 1.0, 16);
  const auto nc = compute_noise_coefficients(b, noise);
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(nc.Y[k], noise.b[k], 1e-14);
  EXPECT_EQ(nc.B.rows(), 4);
  EXPECT_EQ(nc.B.cols(), 16);
  EXPECT_TRUE(nc.warnings.empty());
}

TEST(NoiseCoefficients, SquareOrthogonalPsiPreservesTotalIntensity) {
  const int n = 8;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = g(rng);
  SpectralBasis basis;
  basis.m = n;
  basis.n_galerkin = n;
  basis.psi = Eigen::HouseholderQR<Eigen::MatrixXd>(a).householderQ();
  const auto noise = NoiseSpec::exponential(2.0, 0.3, n);
  const auto nc = compute_noise_coefficients(basis, noise);
  EXPECT_NEAR(nc.Y.squaredNorm(), 0.5 * noise.intensity(0), 1e-12);
}

TEST(NoiseCoefficients, SingleColumnLimit) {
  const auto b = build_basis(PotentialSpec::trig({1.0, 0.5, 0.3}), 5, 20);
  std::vector<double> amp(20, 1e-12);
  amp[0] = 1.0;
  const auto nc = compute_noise_coefficients(b, NoiseSpec::explicit_list(amp));
  for (int k = 0; k < 5; ++k) EXPECT_NEAR(nc.Y[k], std::abs(b.psi(k, 0)), 1e-10);
  for (int k = 0; k < 5; ++k)
    for (int j = 0; j < 20; ++j) EXPECT_EQ(nc.B(k, j), b.psi(k, j) * amp[j]);
}

TEST(NoiseCoefficients, ZeroAmplitudeWarnsAndShortListsArePadded) {
  const auto b = build_basis(PotentialSpec::zero(), 4, 16);
  const auto nc = compute_noise_coefficients(b, NoiseSpec::explicit_list({1.0, 0.0, 0.5}));
  EXPECT_FALSE(nc.warnings.empty());
  EXPECT_EQ(nc.B.col(10).norm(), 0.0);
  EXPECT_EQ(nc.Y[3], 0.0);
}

TEST(NoiseSpec, IntensitySums) {
  const auto n = NoiseSpec::explicit_list({1.0, 0.5, 0.25});
  EXPECT_DOUBLE_EQ(n.intensity(0), 2.0 * (1.0 + 0.25 + 0.0625));
  EXPECT_DOUBLE_EQ(n.intensity(1), 2.0 * (1.0 + 4 * 0.25 + 9 * 0.0625));
  EXPECT_EQ(n.amplitude(0), 0.0);
  EXPECT_EQ(n.amplitude(4), 0.0);
  EXPECT_EQ(n.amplitude(2), 0.5);
}

TEST(EffectiveCoefficients, PositiveYAndBitIdenticalReruns) {
  const auto b = build_basis(PotentialSpec::trig({1.0, 0.5}), 6, 32);
  const auto noise = NoiseSpec::exponential(1.0, 1.0, 32);
  const auto c1 = compute_coefficients(b, noise);
  const auto c2 = compute_coefficients(b, noise);
  EXPECT_GT(c1.Y.minCoeff(), 0.0);
  EXPECT_EQ(c1.M, c2.M);
  EXPECT_EQ(c1.Lprime, c2.Lprime);
  EXPECT_EQ(c1.L, c2.L);
  EXPECT_EQ(c1.Y, c2.Y);
  EXPECT_EQ(c1.B, c2.B);
  EXPECT_EQ(c1.lambda, b.lambda);
}

}  // namespace
}  // namespace cgl
