#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cgl {

using ModeVector = Eigen::VectorXcd;

/// Potential V(x) on the circle. Either a trigonometric polynomial
/// V(x) = sum_j c_j cos(jx) (+ optional sine part, which makes V non-even
/// and is rejected by build_basis) or samples on the uniform grid
/// x_i = 2*pi*i/n.
struct PotentialSpec {
  enum class Kind { TrigPolynomial, GridSamples };

  Kind kind = Kind::TrigPolynomial;
  std::vector<double> cos_coeffs;
  std::vector<double> sin_coeffs;
  std::vector<double> samples;

  static PotentialSpec zero() { return constant(0.0); }
  static PotentialSpec constant(double c) { return trig({c}); }
  static PotentialSpec trig(std::vector<double> cos_coeffs, std::vector<double> sin_coeffs = {});
  static PotentialSpec from_samples(std::vector<double> samples);

  /// Evaluates V at x. Grid samples are evaluated through their
  /// trigonometric interpolant.
  double operator()(double x) const;

  bool operator==(const PotentialSpec&) const = default;
};

struct BasisOptions {
  int grid_factor = 8;  // quadrature points per Galerkin mode
  double gap_tolerance = 1e-8;
  double parity_tolerance = 1e-10;
  double positivity_tolerance = 1e-12;
};

struct EigenCluster {
  int first;  // zero-based index of the lower eigenvalue
  double gap;
};

/// Eigenbasis of A_V = -d^2/dx^2 + V on odd 2*pi-periodic functions,
/// truncated to the lowest m modes. Immutable after construction.
struct SpectralBasis {
  int m = 0;
  int n_galerkin = 0;
  Eigen::VectorXd lambda;     // m, ascending
  Eigen::MatrixXd psi;        // m x n_galerkin, psi(k, j) = <phi_k, e_{j+1}>
  Eigen::MatrixXd galerkin;   // n_galerkin x n_galerkin Galerkin matrix
  Eigen::VectorXd grid;       // quadrature nodes on [0, 2*pi)
  double weight = 0.0;        // uniform trapezoidal weight 2*pi/n_grid
  Eigen::MatrixXd phi;        // m x n_grid eigenfunction samples
  Eigen::VectorXd potential_on_grid;
  PotentialSpec potential;
  std::vector<EigenCluster> clusters;  // neighbouring eigenvalues closer than the gap tolerance

  int n_grid() const { return static_cast<int>(grid.size()); }
};

SpectralBasis build_basis(const PotentialSpec& potential, int m, int n_galerkin,
                          const BasisOptions& options = {});

/// v_k = <u, phi_k> by quadrature on the basis grid.
ModeVector to_modes(std::span<const std::complex<double>> u, const SpectralBasis& basis);

/// u(x_i) = sum_k v_k phi_k(x_i).
std::vector<std::complex<double>> from_modes(const ModeVector& v, const SpectralBasis& basis);

struct ResonanceReport {
  int modes = 0;
  int s_max = 0;
  double epsilon = 0.0;
  double min_abs = 0.0;
  std::vector<int> argmin;
  bool resonant = false;
  std::uint64_t combinations_checked = 0;
};

/// Exhaustive search of min |lambda . s| over nonzero s in {-s_max..s_max}^modes.
/// The witness is sign-canonical (first nonzero entry positive). Ties are
/// broken towards combinations supported on lower modes, then smaller l1 norm.
ResonanceReport check_nonresonance(std::span<const double> lambda, int modes, int s_max,
                                   double epsilon = 1e-9, double budget = 2e8);

/// Finite Fourier series f(q) = sum_s f_s exp(i s.q) on the n-torus.
struct TorusPolynomial {
  struct Term {
    std::vector<int> s;
    std::complex<double> coeff;
  };
  std::vector<Term> terms;

  std::complex<double> mean() const;  // f_0
  std::complex<double> operator()(std::span<const double> q) const;

  static TorusPolynomial cosine(std::vector<int> s);  // cos(s.q)
};

struct TimeAverage {
  std::complex<double> average;
  double deviation;  // |average - f_0|
};

/// (1/T) int_0^T f(q0 + t*freq) dt, integrated exactly mode by mode.
TimeAverage time_average_quasiperiodic(const TorusPolynomial& f, std::span<const double> freq,
                                       std::span<const double> q0, double horizon);

}  // namespace cgl
