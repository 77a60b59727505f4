#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "cgl/errors.hpp"
#include "cgl/spectral.hpp"

namespace cgl {
namespace {

constexpr double kPi = std::numbers::pi;

PotentialSpec random_potential(std::mt19937_64& rng, int degree, double floor = 0.0) {
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  std::vector<double> c(degree + 1, 0.0);
  double sum = 0.0;
  for (int j = 1; j <= degree; ++j) {
    c[j] = coef(rng) / j;
    sum += std::abs(c[j]);
  }
  c[0] = sum + floor;  // keeps V >= floor
  return PotentialSpec::trig(c);
}

void expect_basis_invariants(const SpectralBasis& b) {
  const Eigen::MatrixXd gram = b.psi * b.psi.transpose();
  EXPECT_LE((gram - Eigen::MatrixXd::Identity(b.m, b.m)).cwiseAbs().maxCoeff(), 1e-10);
  for (int k = 0; k < b.m; ++k) {
    EXPECT_NEAR(b.weight * b.phi.row(k).squaredNorm(), 1.0, 1e-10);
    for (int i = 1; i < b.n_grid(); ++i) EXPECT_LE(std::abs(b.phi(k, i) + b.phi(k, b.n_grid() - i)), 1e-8);
    const Eigen::VectorXd col = b.psi.row(k).transpose();
    EXPECT_LE((b.galerkin * col - b.lambda[k] * col).norm(), 1e-8);
    if (k > 0) EXPECT_LT(b.lambda[k - 1], b.lambda[k]);
  }
}

TEST(SpectralBasis, FreeOperatorHasSquareEigenvalues) {
  const auto b = build_basis(PotentialSpec::zero(), 4, 16);
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(b.lambda[k], (k + 1.0) * (k + 1.0), 1e-10);
  Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(4, 16);
  padded.leftCols(4).setIdentity();
  EXPECT_LE((b.psi - padded).cwiseAbs().maxCoeff(), 1e-12);
  expect_basis_invariants(b);
}

TEST(SpectralBasis, ConstantPotentialShiftsSpectrum) {
  const auto b = build_basis(PotentialSpec::constant(1.0), 4, 16);
  const double expected[] = {2, 5, 10, 17};
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(b.lambda[k], expected[k], 1e-10);
  Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(4, 16);
  padded.leftCols(4).setIdentity();
  EXPECT_LE((b.psi - padded).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SpectralBasis, SelfConvergesUnderGalerkinRefinement) {
  const auto V = PotentialSpec::trig({1.0, 0.0, 1.0});
  const auto coarse = build_basis(V, 6, 32);
  const auto fine = build_basis(V, 6, 128);
  for (int k = 0; k < 6; ++k) EXPECT_NEAR(coarse.lambda[k], fine.lambda[k], 1e-8);
  expect_basis_invariants(coarse);
}

TEST(SpectralBasis, InvariantsHoldForRandomPotentials) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 8; ++trial) {
    const auto b = build_basis(random_potential(rng, 4), 6, 32);
    expect_basis_invariants(b);
    for (int k = 0; k < b.m; ++k) {
      for (int j = 0; j < b.n_galerkin; ++j) {
        if (std::abs(b.psi(k, j)) > 1e-12) {
          EXPECT_GT(b.psi(k, j), 0.0);
          break;
        }
      }
    }
  }
}

TEST(SpectralBasis, EigenvaluesAreMonotoneInThePotential) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto V1 = random_potential(rng, 3);
    const auto bump = random_potential(rng, 3);
    auto c2 = V1.cos_coeffs;
    c2.resize(std::max(c2.size(), bump.cos_coeffs.size()), 0.0);
    for (std::size_t j = 0; j < bump.cos_coeffs.size(); ++j) c2[j] += bump.cos_coeffs[j];
    const auto b1 = build_basis(V1, 6, 32);
    const auto b2 = build_basis(PotentialSpec::trig(c2), 6, 32);
    for (int k = 0; k < 6; ++k) EXPECT_LE(b1.lambda[k], b2.lambda[k] + 1e-8);
  }
}

TEST(SpectralBasis, GridSamplesMatchTrigPolynomial) {
  const auto V = PotentialSpec::trig({1.0, 0.5, 0.25});
  std::vector<double> samples(64);
  for (int i = 0; i < 64; ++i) samples[i] = V(2.0 * kPi * i / 64.0);
  const auto a = build_basis(V, 5, 24);
  const auto b = build_basis(PotentialSpec::from_samples(samples), 5, 24);
  EXPECT_LE((a.lambda - b.lambda).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(SpectralBasis, RejectsInadmissibleInput) {
  EXPECT_THROW(build_basis(PotentialSpec::trig({1.0}, {0.0, 0.3}), 4, 16), ValidationError);
  EXPECT_THROW(build_basis(PotentialSpec::constant(1.0), 4, 15), ValidationError);
  EXPECT_THROW(build_basis(PotentialSpec::trig({0.0, 1.0}), 4, 16), ValidationError);
  std::vector<double> odd(32);
  for (int i = 0; i < 32; ++i) odd[i] = 2.0 + std::sin(2.0 * kPi * i / 32.0);
  EXPECT_THROW(build_basis(PotentialSpec::from_samples(odd), 4, 16), ValidationError);
}

TEST(SpectralBasis, FlagsClustersWithoutFailing) {
  BasisOptions opts;
  opts.gap_tolerance = 3.5;  // only the 1 -> 4 gap (3) is tighter
  const auto b = build_basis(PotentialSpec::zero(), 4, 16, opts);
  ASSERT_EQ(b.clusters.size(), 1u);
  EXPECT_EQ(b.clusters[0].first, 0);
  EXPECT_NEAR(b.clusters[0].gap, 3.0, 1e-10);
}

class ModeTransforms : public ::testing::Test {
 protected:
  SpectralBasis basis = build_basis(PotentialSpec::trig({1.0, 0.5, 0.3}), 6, 32);
  std::mt19937_64 rng{3};

  ModeVector random_modes() {
    std::normal_distribution<double> n;
    ModeVector v(basis.m);
    for (auto& x : v) x = {n(rng), n(rng)};
    return v;
  }
};

TEST_F(ModeTransforms, FirstEigenfunctionMapsToUnitVector) {
  std::vector<std::complex<double>> u(basis.n_grid());
  for (int i = 0; i < basis.n_grid(); ++i) u[i] = basis.phi(0, i);
  const ModeVector v = to_modes(u, basis);
  EXPECT_NEAR(std::abs(v[0] - 1.0), 0.0, 1e-12);
  for (int k = 1; k < basis.m; ++k) EXPECT_LE(std::abs(v[k]), 1e-12);
}

TEST_F(ModeTransforms, UnitVectorAndZeroMapBack) {
  ModeVector e1 = ModeVector::Zero(basis.m);
  e1[0] = 1.0;
  const auto u = from_modes(e1, basis);
  for (int i = 0; i < basis.n_grid(); ++i) EXPECT_EQ(u[i], std::complex<double>(basis.phi(0, i), 0.0));
  for (const auto& z : from_modes(ModeVector::Zero(basis.m), basis)) EXPECT_EQ(z, std::complex<double>{});
}

TEST_F(ModeTransforms, RoundTripParsevalAndLinearity) {
  for (int trial = 0; trial < 5; ++trial) {
    const ModeVector v = random_modes(), w = random_modes();
    const auto u = from_modes(v, basis);
    double l2 = 0.0;
    for (const auto& z : u) l2 += basis.weight * std::norm(z);
    EXPECT_NEAR(v.squaredNorm(), l2, 1e-10 * l2);
    const ModeVector back = to_modes(u, basis);
    EXPECT_LE((back - v).cwiseAbs().maxCoeff(), 1e-10);

    const std::complex<double> alpha{0.3, -1.2};
    const auto lhs = from_modes(alpha * v + w, basis);
    const auto uw = from_modes(w, basis);
    for (std::size_t i = 0; i < lhs.size(); ++i) EXPECT_LE(std::abs(lhs[i] - (alpha * u[i] + uw[i])), 1e-12);
  }
}

TEST_F(ModeTransforms, RejectsGridMismatch) {
  std::vector<std::complex<double>> u(basis.n_grid() - 1);
  EXPECT_THROW(to_modes(u, basis), ValidationError);
  EXPECT_THROW(from_modes(ModeVector::Zero(basis.m + 1), basis), ValidationError);
}

TEST(Nonresonance, SquareSpectrumIsResonant) {
  const std::vector<double> lambda{1, 4, 9};
  const auto r = check_nonresonance(lambda, 3, 4);
  EXPECT_TRUE(r.resonant);
  EXPECT_EQ(r.min_abs, 0.0);
  EXPECT_EQ(r.argmin, (std::vector<int>{4, -1, 0}));
}

TEST(Nonresonance, ShiftedSquareSpectrumIsResonant) {
  const std::vector<double> lambda{2, 5, 10};
  const auto r = check_nonresonance(lambda, 3, 2);
  EXPECT_TRUE(r.resonant);
  EXPECT_EQ(r.argmin, (std::vector<int>{0, 2, -1}));
}

TEST(Nonresonance, WitnessIsCanonicalNonzeroAndConsistent) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> lambda(4);
    for (auto& x : lambda) x = u(rng);
    const auto r = check_nonresonance(lambda, 4, 3);
    int first = -1;
    for (int j = 0; j < 4; ++j)
      if (r.argmin[j] != 0 && first < 0) first = j;
    ASSERT_GE(first, 0);
    EXPECT_GT(r.argmin[first], 0);
    double dot = 0.0;
    for (int j = 0; j < 4; ++j) dot += lambda[j] * r.argmin[j];
    EXPECT_EQ(r.min_abs, std::abs(dot));
    // brute force including both signs agrees
    double best = INFINITY;
    std::vector<int> s(4);
    for (s[0] = -3; s[0] <= 3; ++s[0])
      for (s[1] = -3; s[1] <= 3; ++s[1])
        for (s[2] = -3; s[2] <= 3; ++s[2])
          for (s[3] = -3; s[3] <= 3; ++s[3]) {
            if (s == std::vector<int>(4, 0)) continue;
            double d = 0.0;
            for (int j = 0; j < 4; ++j) d += lambda[j] * s[j];
            best = std::min(best, std::abs(d));
          }
    EXPECT_NEAR(r.min_abs, best, 1e-12);
    EXPECT_EQ(r.combinations_checked, (2401u - 1u) / 2u);
  }
}

TEST(Nonresonance, RefusesOversizedSearch) {
  const std::vector<double> lambda(12, 1.0);
  try {
    check_nonresonance(lambda, 12, 10, 1e-9, 1e6);
    FAIL() << "expected a budget refusal";
  } catch (const BudgetError& e) {
    EXPECT_GT(e.estimate(), 1e6);
  }
  EXPECT_THROW(check_nonresonance(lambda, 13, 1), ValidationError);
  EXPECT_THROW(check_nonresonance(lambda, 3, 0), ValidationError);
}

// Composite Simpson rule as an independent check of the closed form.
std::complex<double> simpson_average(const TorusPolynomial& f, const std::vector<double>& freq,
                                     const std::vector<double>& q0, double T, int panels) {
  const double h = T / panels;
  std::complex<double> acc{0.0, 0.0};
  std::vector<double> q(freq.size());
  for (int i = 0; i <= panels; ++i) {
    const double t = i * h;
    for (std::size_t j = 0; j < q.size(); ++j) q[j] = q0[j] + t * freq[j];
    const double w = (i == 0 || i == panels) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    acc += w * f(q);
  }
  return acc * h / 3.0 / T;
}

TEST(KroneckerWeyl, ConstantAveragesToItself) {
  TorusPolynomial f;
  f.terms.push_back({{0, 0}, {2.5, 0.0}});
  const std::vector<double> freq{1.0, std::numbers::sqrt2}, q0{0.3, 1.1};
  for (double T : {0.1, 10.0, 1e4}) {
    const auto r = time_average_quasiperiodic(f, freq, q0, T);
    EXPECT_EQ(r.average, std::complex<double>(2.5, 0.0));
    EXPECT_EQ(r.deviation, 0.0);
  }
}

TEST(KroneckerWeyl, NonresonantHarmonicObeysBoundAndMatchesQuadrature) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> phase(0.0, 2 * kPi);
  const std::vector<double> freq{1.0, std::numbers::sqrt2, std::numbers::pi};
  const std::vector<int> s{2, -1, 1};
  const double omega = 2.0 - std::numbers::sqrt2 + std::numbers::pi;
  const auto f = TorusPolynomial::cosine(s);
  for (int trial = 0; trial < 20; ++trial) {
    const std::vector<double> q0{phase(rng), phase(rng), phase(rng)};
    for (double T : {1.0, 7.5, 100.0, 1e3, 1e4}) {
      const auto r = time_average_quasiperiodic(f, freq, q0, T);
      EXPECT_LE(std::abs(r.average), 2.0 / (T * omega) + 1e-15);
      if (T <= 100.0) EXPECT_LE(std::abs(r.average - simpson_average(f, freq, q0, T, 20000)), 1e-9);
    }
  }
}

TEST(KroneckerWeyl, ResonantHarmonicDoesNotDecay) {
  const std::vector<double> freq{1.0, 4.0, 9.0}, q0{0.0, 0.0, 0.0};
  const auto f = TorusPolynomial::cosine({4, -1, 0});
  for (double T : {1.0, 1e2, 1e5}) {
    const auto r = time_average_quasiperiodic(f, freq, q0, T);
    EXPECT_EQ(r.average, std::complex<double>(1.0, 0.0));
    EXPECT_EQ(r.deviation, 1.0);
  }
}

TEST(KroneckerWeyl, DeviationBoundHalvesWhenHorizonDoubles) {
  const std::vector<double> freq{1.0, std::numbers::sqrt2}, q0{0.0, 0.0};
  const auto f = TorusPolynomial::cosine({1, 1});
  const double omega = 1.0 + std::numbers::sqrt2;
  for (double T = 10.0; T < 1e4; T *= 2.0) {
    const double bound = 2.0 / (T * omega), next = 2.0 / (2.0 * T * omega);
    EXPECT_LE(next, 0.5 * bound + 1e-18);
    EXPECT_LE(time_average_quasiperiodic(f, freq, q0, 2.0 * T).deviation, next + 1e-15);
  }
}

}  // namespace
}  // namespace cgl
