#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "cgl/spectral.hpp"

namespace cgl {

/// I_k = |v_k|^2 / 2, phi_k = Arg v_k in [0, 2*pi), with phi_k = 0 when v_k = 0.
struct ActionAngle {
  Eigen::VectorXd I;
  Eigen::VectorXd phi;
};

ActionAngle actions_angles(const ModeVector& v);

/// Sum in a fixed pairwise order; the result depends only on the input order.
double pairwise_sum(std::span<const double> x);

struct Estimate {
  double mean = 0.0;
  double se = 0.0;
};
/// Sample mean with standard error. With group_size > 1 the standard error is
/// computed from the means of consecutive groups (correlated samples).
Estimate mean_estimate(std::span<const double> x, std::size_t group_size = 1);

/// 1d Wasserstein-1 distance as the L1 distance between quantile functions.
double wasserstein1_1d(std::span<const double> a, std::span<const double> b);

/// Bootstrap standard error of wasserstein1_1d(a, b), resampling both sets.
double wasserstein1_bootstrap_se(std::span<const double> a, std::span<const double> b, int replicates,
                                 std::uint64_t seed);

struct CircularUniformity {
  double resultant = 0.0;  // |n^{-1} sum exp(i phi)|
  double ks = 0.0;         // sup |F_n - F_uniform| of phi / (2*pi)
  std::size_t n = 0;
};
CircularUniformity circular_uniformity(std::span<const double> angles);

/// Fraction of [t_0, t_last] spent with value <= delta; samples are treated as
/// piecewise constant from the left. A single sample gives its indicator.
double occupation_below(std::span<const double> times, std::span<const double> values, double delta);

struct GaussianMoments {
  std::complex<double> mean;
  double mean_se = 0.0;  // standard error of |mean| components combined
  Estimate second;       // E|v|^2
  Estimate fourth;       // E|v|^4
  Estimate kurtosis_ratio;  // E|v|^4 / (2 (E|v|^2)^2), jackknife se
  std::size_t n = 0;
};
/// Moments of complex samples. Jackknife over groups of group_size consecutive
/// samples (use the per-trajectory count when samples are pooled over time).
GaussianMoments gaussian_moment_check(std::span<const std::complex<double>> samples,
                                      std::size_t group_size = 1);

/// Per-mode ensemble statistics at one time (or pooled over a window).
struct ModeSummary {
  double energy = 0.0;  // E_k = E|v_k|^2 / 2
  Estimate mean_action;
  double action_variance = 0.0;
  Estimate kurtosis_ratio;
  CircularUniformity angles;
};
struct EnsembleSummary {
  std::size_t samples_per_mode = 0;
  std::vector<ModeSummary> modes;
  std::vector<std::vector<double>> actions;  // [mode][sample]
  std::vector<std::vector<double>> angles;   // [mode][sample]
};
/// Samples are ordered trajectory-major with group_size entries per trajectory.
EnsembleSummary summarize(std::span<const ModeVector> samples, std::size_t group_size = 1);

}  // namespace cgl
