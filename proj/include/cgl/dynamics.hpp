#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cgl/coefficients.hpp"
#include "cgl/spectral.hpp"
#include "cgl/statistics.hpp"

namespace cgl {

/// Default h = min(h_max, factor * nu); a positive `fixed` overrides both.
struct StepPolicy {
  double h_max = 1e-3;
  double factor = 0.1;
  double fixed = 0.0;

  double step(double nu) const;
};

/// Euler: exponential Euler-Maruyama. Heun: its exponential predictor-corrector
/// variant, which halves the drift error and removes the O(h) bias of the
/// energy identity at the cost of a second drift evaluation per step.
enum class Scheme { Euler, Heun };

struct ModelParams {
  double nu = 0.1;
  double kappa = 0.0;
  double gamma_R = 1.0;
  double gamma_I = 0.0;
  int p = 1;
  int q = 1;
  NoiseSpec noise;
  double T = 1.0;
  StepPolicy step;
  Scheme scheme = Scheme::Euler;
  /// kappa = 0 regime: no viscosity, linear damping -gamma_R u replaces the p-term.
  bool linear_damping_substitute = false;
  /// Replaces the viscous term kappa u_xx by kappa (u_xx - u).
  bool laplacian_shift = false;
  double blowup_threshold = 1e6;
};

/// Violations of the model constraints (gamma_R, gamma_I >= 0 summing to one;
/// kappa = 0 only with gamma_R > 0 and p = 0). Empty when admissible.
std::vector<std::string> validate_model(const ModelParams& params);

struct ModeState {
  ModeVector v;
  double tau = 0.0;
};

enum PerturbationPart : unsigned {
  kLinearPart = 1u,       // kappa d^2/dx^2
  kDissipativePart = 2u,  // -gamma_R |u|^{2p} u
  kHamiltonianPart = 4u,  // -i gamma_I |u|^{2q} u
  kAllParts = 7u,
};

/// Dissipation rates entering the energy identity at the current state.
struct EnergyRates {
  double nonlinear = 0.0;  // gamma_R |u|_{2p+2}^{2p+2}
  double viscous = 0.0;    // kappa ||u_x||^2 (plus kappa ||u||^2 under laplacian_shift)
};

/// The perturbation P(v) of the v-equations, evaluated pseudo-spectrally.
/// Immutable after construction; share one instance across threads and give
/// each thread its own Workspace.
class Perturbation {
 public:
  struct Workspace {
    std::vector<double> vr, vi, gr, gi, pr, pi;
  };

  Perturbation(const SpectralBasis& basis, const EffectiveCoefficients& coeffs, const ModelParams& params);

  void evaluate(const ModeVector& v, ModeVector& out, unsigned parts, Workspace& ws,
                EnergyRates* rates = nullptr) const;
  ModeVector operator()(const ModeVector& v, unsigned parts = kAllParts) const;

  int modes() const { return m_; }
  int noise_dimension() const { return static_cast<int>(B_.cols()); }
  const ModelParams& params() const { return params_; }
  const Eigen::VectorXd& lambda() const { return lambda_; }
  const Eigen::MatrixXd& dispersion() const { return B_; }
  /// Matrix of <V phi_l, phi_k> on the retained modes.
  const Eigen::MatrixXd& potential_matrix() const { return L0_; }
  /// Mean energy input per unit time, sum_k Y_k^2.
  double injection_rate() const { return injection_; }

 private:
  ModelParams params_;
  int m_ = 0;
  int half_points_ = 0;  // interior nodes of (0, pi)
  double half_weight_ = 0.0;
  std::vector<double> phi_half_;  // half_points x m, row-major
  Eigen::VectorXd lambda_;
  Eigen::MatrixXd L0_;
  Eigen::MatrixXd B_;
  double injection_ = 0.0;
};

ModeVector drift_full(const ModeState& state, const ModelParams& params, const SpectralBasis& basis,
                      const EffectiveCoefficients& coeffs);

/// 64-bit seed of one trajectory's stream, a splitmix64 mix of (base, index).
std::uint64_t trajectory_seed(std::uint64_t base_seed, std::uint64_t trajectory);

/// Per-trajectory Gaussian stream. Complex increments have independent real
/// and imaginary parts of variance h. The stream is a pure function of
/// (base_seed, trajectory); step n consumes the n-th block.
class NoiseStream {
 public:
  NoiseStream(std::uint64_t base_seed, std::uint64_t trajectory);
  void fill(std::span<std::complex<double>> increments, double h);

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

struct NoisePlan {
  std::uint64_t base_seed = 0;
  std::uint64_t trajectory = 0;
  double h = 0.0;

  NoiseStream stream() const { return {base_seed, trajectory}; }
};

/// Step size from the policy, shrunk so that it divides the horizon.
double resolve_step(const ModelParams& params, double horizon);

/// Exponential Euler-Maruyama step:
/// v'_k = exp(-i lambda_k h / nu) (v_k + h P_k(v) + sum_j B_kj dbeta_j).
/// Under Scheme::Heun the Euler result w is a predictor and
/// v'_k = exp(-i lambda_k h / nu) (v_k + h/2 P_k(v) + sum_j B_kj dbeta_j) + h/2 P_k(w).
ModeVector step_full(const ModeVector& v, double h, const Perturbation& perturbation,
                     std::span<const std::complex<double>> dbeta);

struct TrajectorySample {
  double tau = 0.0;
  ModeVector v;
  ActionAngle aa;
  double half_norm2 = 0.0;       // |v|^2 / 2
  double drift_integral = 0.0;   // int_0^tau (-dissipation + injection) dtau
  double dissipation_integral = 0.0;  // int_0^tau (nonlinear + viscous) dtau
};

struct Trajectory {
  std::uint64_t index = 0;
  std::vector<TrajectorySample> samples;
  bool blowup = false;
  double blowup_tau = 0.0;
};

/// Integrates to the last sample time; sample times are snapped to the step grid.
/// Energy integrals use the trapezoidal rule on the step grid.
Trajectory simulate_trajectory(const ModeVector& v0, const Perturbation& perturbation, const NoisePlan& plan,
                               std::span<const double> sample_times);

std::vector<Trajectory> simulate_ensemble(const ModeVector& v0, const Perturbation& perturbation,
                                          std::uint64_t base_seed, std::size_t count, double h,
                                          std::span<const double> sample_times, unsigned threads = 0);

struct EnergyResidual {
  double tau0 = 0.0, tau1 = 0.0;
  double mean = 0.0;        // E[d(|u|^2/2)] - E[int drift]
  double se = 0.0;
  double normalized = 0.0;  // mean / E[int |drift terms|]
};

/// Ensemble residual of the Ito energy identity on each sample interval.
std::vector<EnergyResidual> energy_balance_residual(std::span<const Trajectory> ensemble,
                                                    const Perturbation& perturbation);

}  // namespace cgl
