#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cgl/spectral.hpp"

namespace cgl {

/// Noise amplitudes b_j of the forcing sum_j b_j beta_j(tau) e_j(x).
/// Entries beyond the list are zero.
struct NoiseSpec {
  std::vector<double> b;

  static NoiseSpec explicit_list(std::vector<double> b) { return {std::move(b)}; }
  /// b_j = amplitude * exp(-decay * j), j = 1..n.
  static NoiseSpec exponential(double amplitude, double decay, int n);

  double amplitude(int j) const {  // 1-based
    return j >= 1 && j <= static_cast<int>(b.size()) ? b[j - 1] : 0.0;
  }
  /// B_r = 2 sum_j j^{2r} b_j^2.
  double intensity(int r) const;
};

struct NoiseCoefficients {
  Eigen::VectorXd Y;  // Y_k = (sum_j b_j^2 psi_kj^2)^{1/2}
  Eigen::MatrixXd B;  // B_kj = psi_kj b_j
  std::vector<std::string> warnings;
};

/// Everything the effective equations need, derived once from a basis and a noise.
struct EffectiveCoefficients {
  Eigen::VectorXd lambda;
  Eigen::VectorXd M;       // <V phi_k, phi_k>
  Eigen::MatrixXd Lprime;  // int phi_k^2 phi_l^2
  Eigen::MatrixXd L;       // (2 - delta_kl) Lprime
  Eigen::VectorXd Y;
  Eigen::MatrixXd B;
  std::vector<std::string> warnings;
};

Eigen::VectorXd compute_damping_shifts(const SpectralBasis& basis, const PotentialSpec& potential);

struct InteractionMatrices {
  Eigen::MatrixXd Lprime;
  Eigen::MatrixXd L;
};
InteractionMatrices compute_interaction_matrix(const SpectralBasis& basis);

NoiseCoefficients compute_noise_coefficients(const SpectralBasis& basis, const NoiseSpec& noise);

EffectiveCoefficients compute_coefficients(const SpectralBasis& basis, const NoiseSpec& noise);

}  // namespace cgl
