#include "cgl/effective.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "cgl/errors.hpp"
#include "cgl/parallel.hpp"

namespace cgl {

namespace {

Eigen::VectorXd linear_rates(const EffectiveCoefficients& coeffs, const ModelParams& params) {
  Eigen::VectorXd rate = params.kappa * (coeffs.lambda - coeffs.M);
  if (params.linear_damping_substitute) rate.setZero();
  if (params.laplacian_shift) rate.array() += params.kappa;
  return rate;
}

}  // namespace

Eigen::VectorXd EffectiveDrift::damping(const ModeVector& v) const {
  if (v.size() != modes()) throw ValidationError("mode vector size does not match the drift");
  if (kind == DriftKind::LinearP0) return linear_rate.array() + gamma_R;
  const Eigen::VectorXd moduli = v.cwiseAbs2();
  return linear_rate + gamma_R * (L * moduli);
}

EffectiveDrift make_effective_drift(const EffectiveCoefficients& coeffs, const ModelParams& params) {
  EffectiveDrift d;
  d.kappa = params.linear_damping_substitute ? 0.0 : params.kappa;
  d.gamma_R = params.gamma_R;
  d.linear_rate = linear_rates(coeffs, params);
  d.L = coeffs.L;
  d.blowup_threshold = params.blowup_threshold;
  if (params.linear_damping_substitute || params.p == 0) {
    d.kind = DriftKind::LinearP0;
  } else if (params.gamma_R == 0.0) {
    d.kind = DriftKind::LinearP0;  // only the viscous part survives averaging
  } else if (params.p == 1) {
    d.kind = DriftKind::CubicP1;
  } else {
    std::ostringstream msg;
    msg << "closed-form effective drift is available for p = 0 and p = 1 only (got p = " << params.p << ")";
    throw ValidationError(msg.str());
  }
  return d;
}

ModeVector drift_effective(const ModeVector& v, const EffectiveDrift& drift) {
  const Eigen::VectorXd rate = drift.damping(v);
  return -(rate.cast<std::complex<double>>().array() * v.array()).matrix();
}

PhaseAverage phase_average_oracle(unsigned parts, const ModeVector& v, const Perturbation& perturbation,
                                  std::size_t n_samples, std::uint64_t seed) {
  if (n_samples < 1000) throw ValidationError("phase averaging needs at least 1000 samples");
  const int m = perturbation.modes();
  if (v.size() != m) throw ValidationError("mode vector size does not match the model");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::vector<std::vector<double>> re(m, std::vector<double>(n_samples)), im = re, act = re;
  Perturbation::Workspace ws;
  ModeVector rotated(m), out(m);
  std::vector<std::complex<double>> phase(m);
  for (std::size_t s = 0; s < n_samples; ++s) {
    for (int k = 0; k < m; ++k) {
      phase[k] = std::polar(1.0, angle(rng));
      rotated[k] = phase[k] * v[k];
    }
    perturbation.evaluate(rotated, out, parts, ws);
    for (int k = 0; k < m; ++k) {
      const std::complex<double> z = std::conj(phase[k]) * out[k];
      re[k][s] = z.real();
      im[k][s] = z.imag();
      act[k][s] = (std::conj(v[k]) * z).real();
    }
  }

  PhaseAverage pa;
  pa.samples = n_samples;
  pa.mean.resize(m);
  pa.se.resize(m);
  pa.action_mean.resize(m);
  pa.action_se.resize(m);
  for (int k = 0; k < m; ++k) {
    const auto er = mean_estimate(re[k]), ei = mean_estimate(im[k]), ea = mean_estimate(act[k]);
    pa.mean[k] = {er.mean, ei.mean};
    pa.se[k] = std::hypot(er.se, ei.se);
    pa.action_mean[k] = ea.mean;
    pa.action_se[k] = ea.se;
  }
  return pa;
}

ModeVector step_effective(const ModeVector& v, double h, const EffectiveDrift& drift, const Eigen::VectorXd& Y,
                          std::span<const std::complex<double>> dbeta) {
  if (!(h > 0.0)) throw ValidationError("step size must be positive");
  const int m = drift.modes();
  if (v.size() != m || Y.size() != m || static_cast<int>(dbeta.size()) != m)
    throw ValidationError("effective step: inconsistent dimensions");
  const Eigen::VectorXd rate = drift.damping(v);
  ModeVector next(m);
  for (int k = 0; k < m; ++k) next[k] = (v[k] + Y[k] * dbeta[k]) / (1.0 + h * rate[k]);
  const double n2 = next.squaredNorm();
  if (!std::isfinite(n2) || std::sqrt(n2) > drift.blowup_threshold)
    throw BlowupError("effective state left the blow-up threshold");
  return next;
}

Trajectory simulate_effective_trajectory(const ModeVector& v0, const EffectiveDrift& drift,
                                         const Eigen::VectorXd& Y, const NoisePlan& plan,
                                         std::span<const double> sample_times) {
  if (!(plan.h > 0.0)) throw ValidationError("noise plan needs a positive step");
  std::vector<long long> marks(sample_times.size());
  for (std::size_t s = 0; s < sample_times.size(); ++s) {
    marks[s] = std::llround(sample_times[s] / plan.h);
    if (s > 0 && marks[s] < marks[s - 1]) throw ValidationError("sample times must be sorted");
  }
  const double h = plan.h;
  const double injection = Y.squaredNorm();
  Trajectory traj;
  traj.index = plan.trajectory;
  NoiseStream stream = plan.stream();
  std::vector<std::complex<double>> dbeta(drift.modes());
  ModeVector v = v0;
  double drift_integral = 0.0, dissipation_integral = 0.0;
  const long long total = marks.empty() ? 0 : marks.back();
  std::size_t next = 0;
  auto dissipation_at = [&](const ModeVector& x) { return (drift.damping(x).array() * x.cwiseAbs2().array()).sum(); };
  double dissipation = dissipation_at(v);
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
    try {
      v = step_effective(v, h, drift, Y, dbeta);
    } catch (const BlowupError&) {
      traj.blowup = true;
      traj.blowup_tau = static_cast<double>(n + 1) * h;
      break;
    }
    const double next_dissipation = dissipation_at(v);
    drift_integral += h * (injection - 0.5 * (dissipation + next_dissipation));
    dissipation_integral += 0.5 * h * (dissipation + next_dissipation);
    dissipation = next_dissipation;
  }
  return traj;
}

std::vector<Trajectory> simulate_effective_ensemble(const ModeVector& v0, const EffectiveDrift& drift,
                                                    const Eigen::VectorXd& Y, std::uint64_t base_seed,
                                                    std::size_t count, double h,
                                                    std::span<const double> sample_times, unsigned threads) {
  std::vector<Trajectory> out(count);
  parallel_for(count, threads, [&](std::size_t i) {
    out[i] = simulate_effective_trajectory(v0, drift, Y, NoisePlan{base_seed, i, h}, sample_times);
  });
  return out;
}

Eigen::VectorXd stationary_gaussian_reference(const ModelParams& params, const EffectiveCoefficients& coeffs) {
  const bool linear = params.linear_damping_substitute || params.p == 0;
  if (!linear && params.gamma_R != 0.0)
    throw ValidationError("Gaussian stationary reference needs p = 0 or gamma_R = 0");
  Eigen::VectorXd rate = linear_rates(coeffs, params);
  if (linear) rate.array() += params.gamma_R;
  Eigen::VectorXd sigma2(rate.size());
  for (Eigen::Index k = 0; k < rate.size(); ++k) {
    if (!(rate[k] > 1e-12)) {
      std::ostringstream msg;
      msg << "mode " << k + 1 << " has no damping (rate " << rate[k] << "); no stationary variance";
      throw ValidationError(msg.str());
    }
    sigma2[k] = coeffs.Y[k] * coeffs.Y[k] / rate[k];
  }
  return sigma2;
}

}  // namespace cgl
