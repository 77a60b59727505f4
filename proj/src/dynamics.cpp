#include "cgl/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "cgl/errors.hpp"
#include "cgl/parallel.hpp"

namespace cgl {

namespace {

// a^n for small integer n
inline double ipow(double a, int n) {
  double r = 1.0;
  for (int i = 0; i < n; ++i) r *= a;
  return r;
}

void add_noise(const Eigen::MatrixXd& B, std::span<const std::complex<double>> dbeta, ModeVector& w) {
  const Eigen::Index m = B.rows(), n = B.cols();
  for (Eigen::Index k = 0; k < m; ++k) {
    double re = 0.0, im = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      re += B(k, j) * dbeta[j].real();
      im += B(k, j) * dbeta[j].imag();
    }
    w[k] += std::complex<double>{re, im};
  }
}

bool within_threshold(const ModeVector& v, double threshold) {
  const double n2 = v.squaredNorm();
  return std::isfinite(n2) && std::sqrt(n2) <= threshold;
}

ModeVector rotation_factors(const Perturbation& perturbation, double h) {
  const double inv_nu = 1.0 / perturbation.params().nu;
  ModeVector r(perturbation.modes());
  for (int k = 0; k < r.size(); ++k) r[k] = std::polar(1.0, -inv_nu * perturbation.lambda()[k] * h);
  return r;
}

// On entry `out` holds the rotation factors; on exit the next state.
void advance(const ModeVector& v, const ModeVector& drift, double h, const Perturbation& perturbation,
             std::span<const std::complex<double>> dbeta, ModeVector& out, Perturbation::Workspace& ws) {
  const ModeVector rotation = out;
  if (perturbation.params().scheme == Scheme::Euler) {
    out = v + h * drift;
    add_noise(perturbation.dispersion(), dbeta, out);
    out.array() *= rotation.array();
    return;
  }
  ModeVector base = v + (0.5 * h) * drift;
  add_noise(perturbation.dispersion(), dbeta, base);
  ModeVector predictor = base + (0.5 * h) * drift;
  predictor.array() *= rotation.array();
  ModeVector corrector;
  perturbation.evaluate(predictor, corrector, kAllParts, ws);
  out = base;
  out.array() *= rotation.array();
  out += (0.5 * h) * corrector;
}

}  // namespace

double StepPolicy::step(double nu) const {
  if (fixed > 0.0) return fixed;
  return std::min(h_max, factor * nu);
}

std::vector<std::string> validate_model(const ModelParams& p) {
  std::vector<std::string> errors;
  auto fail = [&](const std::string& s) { errors.push_back(s); };
  if (!(p.nu > 0.0 && p.nu <= 1.0)) fail("nu must lie in (0, 1]");
  if (!(p.kappa >= 0.0)) fail("kappa must be nonnegative");
  if (!(p.gamma_R >= 0.0) || !(p.gamma_I >= 0.0)) fail("gamma_R and gamma_I must be nonnegative");
  if (!(std::abs(p.gamma_R + p.gamma_I - 1.0) <= 1e-12)) {
    std::ostringstream msg;
    msg << "gamma_R + gamma_I must equal 1 (got " << p.gamma_R + p.gamma_I << ")";
    fail(msg.str());
  }
  if (p.p < 0 || p.q < 0) fail("p and q must be nonnegative integers");
  if (p.kappa == 0.0 && !(p.gamma_R > 0.0 && p.p == 0))
    fail("kappa = 0 requires gamma_R > 0 and p = 0 (non-viscous damping regime)");
  if (p.linear_damping_substitute && (p.kappa != 0.0 || p.p != 0))
    fail("linear damping substitute requires kappa = 0 and p = 0");
  if (!(p.T > 0.0)) fail("horizon T must be positive");
  if (p.noise.b.empty()) fail("noise amplitudes b are empty");
  for (std::size_t j = 0; j < p.noise.b.size(); ++j) {
    if (!(p.noise.b[j] > 0.0)) {
      std::ostringstream msg;
      msg << "noise amplitude b_" << j + 1 << " must be positive";
      fail(msg.str());
    }
  }
  if (!(p.blowup_threshold > 0.0)) fail("blow-up threshold must be positive");
  return errors;
}

Perturbation::Perturbation(const SpectralBasis& basis, const EffectiveCoefficients& coeffs,
                           const ModelParams& params)
    : params_(params), m_(basis.m), lambda_(basis.lambda), B_(coeffs.B) {
  if (coeffs.lambda.size() != basis.m || coeffs.B.rows() != basis.m || coeffs.B.cols() != basis.n_galerkin)
    throw ValidationError("coefficients do not belong to this basis");
  if (params.p < 0 || params.q < 0) throw ValidationError("p and q must be nonnegative");
  const int needed = (std::max(params.p, params.q) + 1) * basis.n_galerkin;
  if (basis.n_grid() < needed) {
    std::ostringstream msg;
    msg << "dealiasing grid too small: " << basis.n_grid() << " points, need " << needed;
    throw ValidationError(msg.str());
  }
  if (basis.n_grid() % 2 != 0) throw ValidationError("quadrature grid must have an even size");

  Eigen::MatrixXd vgal = basis.galerkin;
  for (int j = 0; j < basis.n_galerkin; ++j) vgal(j, j) -= static_cast<double>((j + 1) * (j + 1));
  L0_ = basis.psi * vgal * basis.psi.transpose();

  // Odd functions vanish at 0 and pi, and the integrands are even, so the
  // full-period trapezoidal rule reduces to the interior of (0, pi).
  const int half = basis.n_grid() / 2;
  half_points_ = half - 1;
  half_weight_ = 2.0 * basis.weight;
  phi_half_.resize(static_cast<std::size_t>(half_points_) * m_);
  for (int i = 0; i < half_points_; ++i)
    for (int k = 0; k < m_; ++k) phi_half_[static_cast<std::size_t>(i) * m_ + k] = basis.phi(k, i + 1);

  injection_ = coeffs.Y.squaredNorm();
}

void Perturbation::evaluate(const ModeVector& v, ModeVector& out, unsigned parts, Workspace& ws,
                            EnergyRates* rates) const {
  if (v.size() != m_) throw ValidationError("mode vector size does not match the model");
  const auto& p = params_;
  out.setZero(m_);
  EnergyRates er;

  if ((parts & kLinearPart) && !p.linear_damping_substitute && p.kappa != 0.0) {
    double h1 = 0.0;
    for (int k = 0; k < m_; ++k) {
      std::complex<double> lv{0.0, 0.0};
      for (int l = 0; l < m_; ++l) lv += L0_(k, l) * v[l];
      out[k] += p.kappa * (-lambda_[k] * v[k] + lv);
      h1 += lambda_[k] * std::norm(v[k]) - (std::conj(v[k]) * lv).real();
    }
    er.viscous = p.kappa * h1;
    if (p.laplacian_shift) {
      out -= p.kappa * v;
      er.viscous += p.kappa * v.squaredNorm();
    }
  }

  const bool dissipative = (parts & kDissipativePart) && p.gamma_R != 0.0;
  const bool hamiltonian = (parts & kHamiltonianPart) && p.gamma_I != 0.0;
  // |u|^0 u = u projects back to v exactly.
  const bool linear_p = p.linear_damping_substitute || p.p == 0;
  if (dissipative && linear_p) {
    out -= p.gamma_R * v;
    er.nonlinear = p.gamma_R * v.squaredNorm();
  }
  if (hamiltonian && p.q == 0) out -= std::complex<double>{0.0, p.gamma_I} * v;

  const bool grid_dissipative = dissipative && !linear_p;
  const bool grid_hamiltonian = hamiltonian && p.q != 0;
  if (grid_dissipative || grid_hamiltonian) {
    const int n = half_points_;
    ws.gr.resize(n);
    ws.gi.resize(n);
    ws.vr.resize(m_);
    ws.vi.resize(m_);
    ws.pr.assign(m_, 0.0);
    ws.pi.assign(m_, 0.0);
    double* vrp = ws.vr.data();
    double* vip = ws.vi.data();
    for (int k = 0; k < m_; ++k) {
      vrp[k] = v[k].real();
      vip[k] = v[k].imag();
    }
    const double* phi = phi_half_.data();
    double energy = 0.0;
    for (int i = 0; i < n; ++i) {
      const double* row = phi + static_cast<std::size_t>(i) * m_;
      double ur = 0.0, ui = 0.0;
      for (int k = 0; k < m_; ++k) {
        ur += vrp[k] * row[k];
        ui += vip[k] * row[k];
      }
      const double a = ur * ur + ui * ui;
      double gr = 0.0, gi = 0.0;
      if (grid_dissipative) {
        const double ap = ipow(a, p.p);
        gr -= p.gamma_R * ap * ur;
        gi -= p.gamma_R * ap * ui;
        energy += ap * a;
      }
      if (grid_hamiltonian) {
        const double aq = p.gamma_I * ipow(a, p.q);
        // -i aq (ur + i ui) = aq ui - i aq ur
        gr += aq * ui;
        gi -= aq * ur;
      }
      ws.gr[i] = gr;
      ws.gi[i] = gi;
    }
    double* prp = ws.pr.data();
    double* pip = ws.pi.data();
    for (int i = 0; i < n; ++i) {
      const double* row = phi + static_cast<std::size_t>(i) * m_;
      const double gr = ws.gr[i], gi = ws.gi[i];
      for (int k = 0; k < m_; ++k) {
        prp[k] += gr * row[k];
        pip[k] += gi * row[k];
      }
    }
    for (int k = 0; k < m_; ++k) out[k] += half_weight_ * std::complex<double>{prp[k], pip[k]};
    if (grid_dissipative) er.nonlinear = p.gamma_R * half_weight_ * energy;
  }
  if (rates) *rates = er;
}

ModeVector Perturbation::operator()(const ModeVector& v, unsigned parts) const {
  Workspace ws;
  ModeVector out;
  evaluate(v, out, parts, ws);
  return out;
}

ModeVector drift_full(const ModeState& state, const ModelParams& params, const SpectralBasis& basis,
                      const EffectiveCoefficients& coeffs) {
  return Perturbation(basis, coeffs, params)(state.v);
}

std::uint64_t trajectory_seed(std::uint64_t base_seed, std::uint64_t trajectory) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(base_seed) ^ trajectory);
}

NoiseStream::NoiseStream(std::uint64_t base_seed, std::uint64_t trajectory)
    : engine_(trajectory_seed(base_seed, trajectory)) {}

void NoiseStream::fill(std::span<std::complex<double>> increments, double h) {
  const double s = std::sqrt(h);
  for (auto& z : increments) {
    const double re = normal_(engine_);
    const double im = normal_(engine_);
    z = {s * re, s * im};
  }
}

double resolve_step(const ModelParams& params, double horizon) {
  const double h0 = params.step.step(params.nu);
  if (!(h0 > 0.0)) throw ValidationError("step size must be positive");
  if (!(horizon > 0.0)) return h0;
  const double n = std::ceil(horizon / h0 - 1e-9);
  return horizon / n;
}

ModeVector step_full(const ModeVector& v, double h, const Perturbation& perturbation,
                     std::span<const std::complex<double>> dbeta) {
  if (!(h > 0.0)) throw ValidationError("step size must be positive");
  if (static_cast<int>(dbeta.size()) != perturbation.noise_dimension())
    throw ValidationError("noise increment count does not match the dispersion matrix");
  Perturbation::Workspace ws;
  ModeVector drift;
  perturbation.evaluate(v, drift, kAllParts, ws);
  ModeVector w = rotation_factors(perturbation, h);
  advance(v, drift, h, perturbation, dbeta, w, ws);
  if (!within_threshold(w, perturbation.params().blowup_threshold))
    throw BlowupError("state left the blow-up threshold");
  return w;
}

Trajectory simulate_trajectory(const ModeVector& v0, const Perturbation& perturbation, const NoisePlan& plan,
                               std::span<const double> sample_times) {
  if (!(plan.h > 0.0)) throw ValidationError("noise plan needs a positive step");
  if (v0.size() != perturbation.modes()) throw ValidationError("initial state has the wrong mode count");
  std::vector<long long> marks(sample_times.size());
  for (std::size_t s = 0; s < sample_times.size(); ++s) {
    if (sample_times[s] < 0.0) throw ValidationError("sample times must be nonnegative");
    marks[s] = std::llround(sample_times[s] / plan.h);
    if (s > 0 && marks[s] < marks[s - 1]) throw ValidationError("sample times must be sorted");
  }

  const auto& params = perturbation.params();
  const int m = perturbation.modes();
  const double h = plan.h;
  const ModeVector rotation = rotation_factors(perturbation, h);

  Trajectory traj;
  traj.index = plan.trajectory;
  traj.samples.reserve(sample_times.size());
  NoiseStream stream = plan.stream();
  std::vector<std::complex<double>> dbeta(perturbation.noise_dimension());
  Perturbation::Workspace ws;
  ModeVector v = v0, next_v(m), drift(m);
  EnergyRates rates;
  perturbation.evaluate(v, drift, kAllParts, ws, &rates);
  double dissipation = rates.nonlinear + rates.viscous;
  double drift_integral = 0.0, dissipation_integral = 0.0;
  const double injection = perturbation.injection_rate();
  const long long total = marks.empty() ? 0 : marks.back();
  std::size_t next = 0;

  for (long long n = 0;; ++n) {
    while (next < marks.size() && marks[next] == n) {
      TrajectorySample s;
      s.tau = static_cast<double>(n) * h;
      s.v = v;
      s.aa = actions_angles(v);
      s.half_norm2 = 0.5 * v.squaredNorm();
      s.drift_integral = drift_integral;
      s.dissipation_integral = dissipation_integral;
      traj.samples.push_back(std::move(s));
      ++next;
    }
    if (n >= total) break;
    stream.fill(dbeta, h);
    next_v = rotation;
    advance(v, drift, h, perturbation, dbeta, next_v, ws);
    if (!within_threshold(next_v, params.blowup_threshold)) {
      traj.blowup = true;
      traj.blowup_tau = static_cast<double>(n + 1) * h;
      break;
    }
    v.swap(next_v);
    perturbation.evaluate(v, drift, kAllParts, ws, &rates);
    const double next_dissipation = rates.nonlinear + rates.viscous;
    drift_integral += h * (injection - 0.5 * (dissipation + next_dissipation));
    dissipation_integral += 0.5 * h * (dissipation + next_dissipation);
    dissipation = next_dissipation;
  }
  return traj;
}

std::vector<Trajectory> simulate_ensemble(const ModeVector& v0, const Perturbation& perturbation,
                                          std::uint64_t base_seed, std::size_t count, double h,
                                          std::span<const double> sample_times, unsigned threads) {
  std::vector<Trajectory> out(count);
  parallel_for(count, threads, [&](std::size_t i) {
    out[i] = simulate_trajectory(v0, perturbation, NoisePlan{base_seed, i, h}, sample_times);
  });
  return out;
}

std::vector<EnergyResidual> energy_balance_residual(std::span<const Trajectory> ensemble,
                                                    const Perturbation& perturbation) {
  std::vector<const Trajectory*> good;
  for (const auto& t : ensemble)
    if (!t.blowup) good.push_back(&t);
  if (good.size() < 100) throw ValidationError("energy balance needs at least 100 trajectories");
  const std::size_t samples = good.front()->samples.size();
  for (const auto* t : good)
    if (t->samples.size() != samples) throw ValidationError("trajectories have different sample counts");

  std::vector<EnergyResidual> out;
  std::vector<double> d(good.size()), scale(good.size());
  const double injection = perturbation.injection_rate();
  for (std::size_t s = 0; s + 1 < samples; ++s) {
    EnergyResidual r;
    r.tau0 = good.front()->samples[s].tau;
    r.tau1 = good.front()->samples[s + 1].tau;
    for (std::size_t i = 0; i < good.size(); ++i) {
      const auto& a = good[i]->samples[s];
      const auto& b = good[i]->samples[s + 1];
      d[i] = (b.half_norm2 - a.half_norm2) - (b.drift_integral - a.drift_integral);
      scale[i] = (b.dissipation_integral - a.dissipation_integral) + injection * (r.tau1 - r.tau0);
    }
    const Estimate e = mean_estimate(d);
    r.mean = e.mean;
    r.se = e.se;
    const double norm = pairwise_sum(scale) / static_cast<double>(scale.size());
    r.normalized = norm > 0.0 ? r.mean / norm : 0.0;
    out.push_back(r);
  }
  return out;
}

}  // namespace cgl
