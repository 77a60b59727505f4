#include "cgl/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <tuple>

#include "cgl/errors.hpp"

namespace cgl {

namespace {

constexpr double kPi = std::numbers::pi;

// Coefficients (a_j, b_j) of the trigonometric interpolant of uniform samples.
void interpolant_coefficients(const std::vector<double>& samples, std::vector<double>& a,
                              std::vector<double>& b) {
  const std::size_t n = samples.size();
  const std::size_t half = n / 2;
  a.assign(half + 1, 0.0);
  b.assign(half + 1, 0.0);
  for (std::size_t j = 0; j <= half; ++j) {
    double ca = 0.0, cb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(n);
      ca += samples[i] * std::cos(static_cast<double>(j) * x);
      cb += samples[i] * std::sin(static_cast<double>(j) * x);
    }
    const double scale = (j == 0 || (n % 2 == 0 && j == half)) ? 1.0 : 2.0;
    a[j] = scale * ca / static_cast<double>(n);
    b[j] = scale * cb / static_cast<double>(n);
  }
}

void check_parity(const PotentialSpec& potential, double tol) {
  if (potential.kind == PotentialSpec::Kind::TrigPolynomial) {
    for (std::size_t j = 0; j < potential.sin_coeffs.size(); ++j) {
      if (std::abs(potential.sin_coeffs[j]) > tol) {
        std::ostringstream msg;
        msg << "potential is not even: sine coefficient " << j << " = " << potential.sin_coeffs[j];
        throw ValidationError(msg.str());
      }
    }
    return;
  }
  const auto& s = potential.samples;
  const std::size_t n = s.size();
  for (std::size_t i = 1; i < n; ++i) {
    const double diff = std::abs(s[i] - s[n - i]);
    if (diff > tol * std::max(1.0, std::abs(s[i]))) {
      std::ostringstream msg;
      msg << "potential is not even: |V(x_" << i << ") - V(-x_" << i << ")| = " << diff;
      throw ValidationError(msg.str());
    }
  }
}

}  // namespace

PotentialSpec PotentialSpec::trig(std::vector<double> cos_coeffs, std::vector<double> sin_coeffs) {
  PotentialSpec p;
  p.kind = Kind::TrigPolynomial;
  p.cos_coeffs = std::move(cos_coeffs);
  p.sin_coeffs = std::move(sin_coeffs);
  return p;
}

PotentialSpec PotentialSpec::from_samples(std::vector<double> samples) {
  if (samples.size() < 2) throw ValidationError("potential needs at least two grid samples");
  PotentialSpec p;
  p.kind = Kind::GridSamples;
  p.samples = std::move(samples);
  return p;
}

double PotentialSpec::operator()(double x) const {
  if (kind == Kind::TrigPolynomial) {
    double v = 0.0;
    for (std::size_t j = 0; j < cos_coeffs.size(); ++j)
      v += cos_coeffs[j] * std::cos(static_cast<double>(j) * x);
    for (std::size_t j = 0; j < sin_coeffs.size(); ++j)
      v += sin_coeffs[j] * std::sin(static_cast<double>(j) * x);
    return v;
  }
  std::vector<double> a, b;
  interpolant_coefficients(samples, a, b);
  double v = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double jx = static_cast<double>(j) * x;
    v += a[j] * std::cos(jx) + b[j] * std::sin(jx);
  }
  return v;
}

SpectralBasis build_basis(const PotentialSpec& potential, int m, int n_galerkin,
                          const BasisOptions& options) {
  if (m < 1) throw ValidationError("mode count m must be positive");
  if (n_galerkin < 4 * m) {
    std::ostringstream msg;
    msg << "n_galerkin = " << n_galerkin << " is too small; need at least 4m = " << 4 * m;
    throw ValidationError(msg.str());
  }
  if (options.grid_factor < 8) throw ValidationError("quadrature grid factor must be at least 8");
  check_parity(potential, options.parity_tolerance);

  SpectralBasis basis;
  basis.m = m;
  basis.n_galerkin = n_galerkin;
  basis.potential = potential;

  const int n_grid = options.grid_factor * n_galerkin;
  basis.grid.resize(n_grid);
  basis.potential_on_grid.resize(n_grid);
  basis.weight = 2.0 * kPi / n_grid;

  std::vector<double> a, b;
  if (potential.kind == PotentialSpec::Kind::GridSamples)
    interpolant_coefficients(potential.samples, a, b);
  for (int i = 0; i < n_grid; ++i) {
    const double x = basis.weight * i;
    basis.grid[i] = x;
    if (potential.kind == PotentialSpec::Kind::TrigPolynomial) {
      basis.potential_on_grid[i] = potential(x);
    } else {
      double v = 0.0;
      for (std::size_t j = 0; j < a.size(); ++j)
        v += a[j] * std::cos(static_cast<double>(j) * x) + b[j] * std::sin(static_cast<double>(j) * x);
      basis.potential_on_grid[i] = v;
    }
  }
  const double v_min = basis.potential_on_grid.minCoeff();
  if (v_min < -options.positivity_tolerance) {
    std::ostringstream msg;
    msg << "potential must be nonnegative; grid minimum is " << v_min;
    throw ValidationError(msg.str());
  }

  // Sine basis e_j(x) = sin(jx)/sqrt(pi) on the grid.
  Eigen::MatrixXd sines(n_galerkin, n_grid);
  const double norm = 1.0 / std::sqrt(kPi);
  for (int j = 0; j < n_galerkin; ++j)
    for (int i = 0; i < n_grid; ++i) sines(j, i) = norm * std::sin((j + 1) * basis.grid[i]);

  const Eigen::MatrixXd weighted =
      sines * (basis.weight * basis.potential_on_grid).asDiagonal();
  basis.galerkin = weighted * sines.transpose();
  for (int j = 0; j < n_galerkin; ++j) basis.galerkin(j, j) += static_cast<double>((j + 1) * (j + 1));
  // Exact symmetry; quadrature sums can differ in the last bit.
  basis.galerkin = 0.5 * (basis.galerkin + basis.galerkin.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(basis.galerkin);
  if (solver.info() != Eigen::Success) throw ValidationError("Galerkin eigensolver failed");

  basis.lambda = solver.eigenvalues().head(m);
  basis.psi = solver.eigenvectors().leftCols(m).transpose();
  for (int k = 0; k < m; ++k) {
    for (int j = 0; j < n_galerkin; ++j) {
      if (std::abs(basis.psi(k, j)) > 1e-12) {
        if (basis.psi(k, j) < 0) basis.psi.row(k) *= -1.0;
        break;
      }
    }
  }
  basis.phi = basis.psi * sines;

  for (int k = 0; k + 1 < m; ++k) {
    const double gap = basis.lambda[k + 1] - basis.lambda[k];
    if (gap < options.gap_tolerance) basis.clusters.push_back({k, gap});
  }
  return basis;
}

ModeVector to_modes(std::span<const std::complex<double>> u, const SpectralBasis& basis) {
  if (static_cast<int>(u.size()) != basis.n_grid()) {
    std::ostringstream msg;
    msg << "grid mismatch: got " << u.size() << " samples, basis grid has " << basis.n_grid();
    throw ValidationError(msg.str());
  }
  const Eigen::Map<const Eigen::VectorXcd> samples(u.data(), static_cast<Eigen::Index>(u.size()));
  return basis.weight * (basis.phi.cast<std::complex<double>>() * samples);
}

std::vector<std::complex<double>> from_modes(const ModeVector& v, const SpectralBasis& basis) {
  if (v.size() != basis.m) {
    std::ostringstream msg;
    msg << "mode vector has " << v.size() << " entries, basis has " << basis.m;
    throw ValidationError(msg.str());
  }
  const Eigen::VectorXcd u = basis.phi.transpose().cast<std::complex<double>>() * v;
  return {u.data(), u.data() + u.size()};
}

ResonanceReport check_nonresonance(std::span<const double> lambda, int modes, int s_max,
                                   double epsilon, double budget) {
  if (modes < 1 || modes > static_cast<int>(lambda.size()))
    throw ValidationError("resonance search needs 1 <= M <= number of eigenvalues");
  if (s_max < 1) throw ValidationError("resonance search needs s_max >= 1");
  const double space = std::pow(2.0 * s_max + 1.0, modes) - 1.0;
  if (space > budget) {
    std::ostringstream msg;
    msg << "resonance search space " << space << " exceeds budget " << budget;
    throw BudgetError(msg.str(), space);
  }

  ResonanceReport report;
  report.modes = modes;
  report.s_max = s_max;
  report.epsilon = epsilon;

  std::vector<int> s(modes, -s_max);
  std::tuple<double, int, int> best{INFINITY, 0, 0};
  bool done = false;
  while (!done) {
    int first_nz = -1, last_nz = -1, l1 = 0;
    for (int j = 0; j < modes; ++j) {
      if (s[j] != 0) {
        if (first_nz < 0) first_nz = j;
        last_nz = j;
        l1 += std::abs(s[j]);
      }
    }
    if (first_nz >= 0 && s[first_nz] > 0) {
      double dot = 0.0;
      for (int j = 0; j < modes; ++j) dot += lambda[j] * s[j];
      ++report.combinations_checked;
      const std::tuple<double, int, int> key{std::abs(dot), last_nz, l1};
      if (key < best) {
        best = key;
        report.argmin = s;
      }
    }
    // odometer, last digit fastest
    int d = modes - 1;
    while (d >= 0) {
      if (++s[d] <= s_max) break;
      s[d] = -s_max;
      --d;
    }
    done = d < 0;
  }

  double dot = 0.0;
  for (int j = 0; j < modes; ++j) dot += lambda[j] * report.argmin[j];
  report.min_abs = std::abs(dot);
  report.resonant = report.min_abs <= epsilon;
  return report;
}

std::complex<double> TorusPolynomial::mean() const {
  std::complex<double> f0{0.0, 0.0};
  for (const auto& t : terms)
    if (std::all_of(t.s.begin(), t.s.end(), [](int x) { return x == 0; })) f0 += t.coeff;
  return f0;
}

std::complex<double> TorusPolynomial::operator()(std::span<const double> q) const {
  std::complex<double> f{0.0, 0.0};
  for (const auto& t : terms) {
    double phase = 0.0;
    for (std::size_t j = 0; j < t.s.size(); ++j) phase += t.s[j] * q[j];
    f += t.coeff * std::polar(1.0, phase);
  }
  return f;
}

TorusPolynomial TorusPolynomial::cosine(std::vector<int> s) {
  std::vector<int> neg(s.size());
  std::transform(s.begin(), s.end(), neg.begin(), [](int x) { return -x; });
  TorusPolynomial f;
  f.terms.push_back({std::move(s), {0.5, 0.0}});
  f.terms.push_back({std::move(neg), {0.5, 0.0}});
  return f;
}

TimeAverage time_average_quasiperiodic(const TorusPolynomial& f, std::span<const double> freq,
                                       std::span<const double> q0, double horizon) {
  if (!(horizon > 0.0)) throw ValidationError("averaging horizon must be positive");
  std::complex<double> avg{0.0, 0.0};
  for (const auto& t : f.terms) {
    if (t.s.size() > freq.size() || t.s.size() > q0.size())
      throw ValidationError("Fourier index longer than frequency or phase vector");
    double omega = 0.0, phase = 0.0;
    for (std::size_t j = 0; j < t.s.size(); ++j) {
      omega += t.s[j] * freq[j];
      phase += t.s[j] * q0[j];
    }
    // (1/T) int_0^T exp(i omega t) dt = sin(x)/x + i (1 - cos x)/x, x = omega T
    std::complex<double> kernel{1.0, 0.0};
    const double x = omega * horizon;
    if (x != 0.0) {
      const double h = std::sin(0.5 * x);
      kernel = {std::sin(x) / x, 2.0 * h * h / x};
    }
    avg += t.coeff * std::polar(1.0, phase) * kernel;
  }
  return {avg, std::abs(avg - f.mean())};
}

}  // namespace cgl
