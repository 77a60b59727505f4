#include "cgl/coefficients.hpp"

#include <cmath>
#include <sstream>

#include "cgl/errors.hpp"

namespace cgl {

NoiseSpec NoiseSpec::exponential(double amplitude, double decay, int n) {
  NoiseSpec spec;
  spec.b.resize(n);
  for (int j = 1; j <= n; ++j) spec.b[j - 1] = amplitude * std::exp(-decay * j);
  return spec;
}

double NoiseSpec::intensity(int r) const {
  double sum = 0.0;
  for (std::size_t j = 0; j < b.size(); ++j)
    sum += std::pow(static_cast<double>(j + 1), 2.0 * r) * b[j] * b[j];
  return 2.0 * sum;
}

Eigen::VectorXd compute_damping_shifts(const SpectralBasis& basis, const PotentialSpec& potential) {
  if (!(potential == basis.potential))
    throw ValidationError("damping shifts requested for a potential the basis was not built from");
  Eigen::VectorXd M(basis.m);
  for (int k = 0; k < basis.m; ++k)
    M[k] = basis.weight *
           (basis.potential_on_grid.array() * basis.phi.row(k).transpose().array().square()).sum();
  return M;
}

InteractionMatrices compute_interaction_matrix(const SpectralBasis& basis) {
  const Eigen::MatrixXd sq = basis.phi.array().square().matrix();
  InteractionMatrices out;
  out.Lprime = basis.weight * (sq * sq.transpose());
  out.Lprime = 0.5 * (out.Lprime + out.Lprime.transpose()).eval();
  out.L = 2.0 * out.Lprime;
  out.L.diagonal() = out.Lprime.diagonal();
  return out;
}

NoiseCoefficients compute_noise_coefficients(const SpectralBasis& basis, const NoiseSpec& noise) {
  NoiseCoefficients out;
  Eigen::VectorXd b(basis.n_galerkin);
  for (int j = 0; j < basis.n_galerkin; ++j) {
    b[j] = noise.amplitude(j + 1);
    if (b[j] == 0.0 && j < basis.m) {
      std::ostringstream msg;
      msg << "b_" << j + 1 << " = 0: noise is degenerate, uniqueness of the limit is not guaranteed";
      out.warnings.push_back(msg.str());
    }
  }
  out.B = basis.psi * b.asDiagonal();
  out.Y = out.B.rowwise().norm();
  return out;
}

EffectiveCoefficients compute_coefficients(const SpectralBasis& basis, const NoiseSpec& noise) {
  EffectiveCoefficients c;
  c.lambda = basis.lambda;
  c.M = compute_damping_shifts(basis, basis.potential);
  auto inter = compute_interaction_matrix(basis);
  c.Lprime = std::move(inter.Lprime);
  c.L = std::move(inter.L);
  auto nc = compute_noise_coefficients(basis, noise);
  c.Y = std::move(nc.Y);
  c.B = std::move(nc.B);
  c.warnings = std::move(nc.warnings);
  return c;
}

}  // namespace cgl
