#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "cgl/coefficients.hpp"
#include "cgl/dynamics.hpp"

namespace cgl {

enum class DriftKind { LinearP0, CubicP1 };

/// Phase-averaged drift of the v-equations in closed form:
///   linear:  R_k = -(kappa (lambda_k - M_k) + gamma_R) v_k
///   cubic:   R_k = -v_k (kappa (lambda_k - M_k) + gamma_R sum_l |v_l|^2 L_kl)
/// The Hamiltonian coefficient gamma_I does not enter.
struct EffectiveDrift {
  DriftKind kind = DriftKind::CubicP1;
  double kappa = 0.0;
  double gamma_R = 0.0;
  Eigen::VectorXd linear_rate;  // kappa (lambda_k - M_k), plus kappa under laplacian_shift
  Eigen::MatrixXd L;
  double blowup_threshold = 1e6;

  int modes() const { return static_cast<int>(linear_rate.size()); }
  /// Total damping rate of each mode at v: linear_rate_k + gamma_R D_k(v).
  Eigen::VectorXd damping(const ModeVector& v) const;
};

/// p = 0 (or the linear damping substitute, or gamma_R = 0) gives the linear
/// drift, p = 1 the cubic one; other p are refused.
EffectiveDrift make_effective_drift(const EffectiveCoefficients& coeffs, const ModelParams& params);

ModeVector drift_effective(const ModeVector& v, const EffectiveDrift& drift);

struct PhaseAverage {
  ModeVector mean;            // estimate of int exp(-i theta_k) P_k(Phi_theta v) dtheta
  Eigen::VectorXd se;         // complex standard error, sqrt(se_re^2 + se_im^2)
  Eigen::VectorXd action_mean;  // Re(conj(v_k) * estimate_k), the averaged action drift
  Eigen::VectorXd action_se;
  std::size_t samples = 0;
};

/// Monte-Carlo average over independent uniform phases of every retained mode.
PhaseAverage phase_average_oracle(unsigned parts, const ModeVector& v, const Perturbation& perturbation,
                                  std::size_t n_samples, std::uint64_t seed);

/// Semi-implicit step: the linear rate and, for the cubic drift, the damping
/// sum_l |v_l|^2 L_kl frozen at v are treated implicitly,
/// v'_k = (v_k + Y_k dbeta_k) / (1 + h damping_k(v)).
ModeVector step_effective(const ModeVector& v, double h, const EffectiveDrift& drift,
                          const Eigen::VectorXd& Y, std::span<const std::complex<double>> dbeta);

Trajectory simulate_effective_trajectory(const ModeVector& v0, const EffectiveDrift& drift,
                                         const Eigen::VectorXd& Y, const NoisePlan& plan,
                                         std::span<const double> sample_times);

std::vector<Trajectory> simulate_effective_ensemble(const ModeVector& v0, const EffectiveDrift& drift,
                                                    const Eigen::VectorXd& Y, std::uint64_t base_seed,
                                                    std::size_t count, double h,
                                                    std::span<const double> sample_times,
                                                    unsigned threads = 0);

/// Stationary variances sigma_k^2 = E|v_k|^2 of the linear effective
/// equations: Y_k^2 / (kappa (lambda_k - M_k) + gamma_R) when p = 0, and
/// Y_k^2 / (kappa (lambda_k - M_k)) when gamma_R = 0. Mean actions are
/// sigma_k^2 / 2 and E|v_k|^4 = 2 sigma_k^4.
Eigen::VectorXd stationary_gaussian_reference(const ModelParams& params, const EffectiveCoefficients& coeffs);

}  // namespace cgl
