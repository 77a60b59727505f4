#include "cgl/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include <openssl/evp.h>

#include "cgl/parallel.hpp"

#ifndef CGL_VERSION
#define CGL_VERSION "dev"
#endif

namespace cgl {

using nlohmann::json;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double window_start_or_half(double start, double T) { return start < 0.0 ? 0.5 * T : start; }

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = n == 1 ? b : a + (b - a) * i / (n - 1);
  return out;
}

double effective_step(const ExperimentConfig& c, double T) {
  const double n = std::ceil(T / c.effective_step - 1e-9);
  return T / std::max(1.0, n);
}

ModelParams with_nu(const ModelParams& base, double nu) {
  ModelParams m = base;
  m.nu = nu;
  return m;
}

// Cost of one full-system step in seconds, calibrated on a desktop core.
double full_step_cost(const ExperimentConfig& c) {
  const double m = c.m, grid = 8.0 * c.n_galerkin;
  const double evals = c.model.scheme == Scheme::Heun ? 2.0 : 1.0;
  return evals * 3e-9 * m * grid + 2e-9 * m * c.n_galerkin;
}

double effective_step_cost(const ExperimentConfig& c) { return 3e-8 + 5e-9 * c.m * c.m; }

double full_steps(const ExperimentConfig& c, double nu) {
  return std::ceil(c.model.T / with_nu(c.model, nu).step.step(nu) - 1e-9);
}

std::vector<const Trajectory*> complete(const std::vector<Trajectory>& ts) {
  std::vector<const Trajectory*> out;
  for (const auto& t : ts)
    if (!t.blowup) out.push_back(&t);
  return out;
}

std::string csv_number(double x) {
  std::ostringstream s;
  s << std::setprecision(17) << x;
  return s.str();
}

json estimate_json(const Estimate& e) { return {{"mean", e.mean}, {"se", e.se}}; }

json uniformity_json(const CircularUniformity& u) {
  return {{"resultant", u.resultant}, {"ks", u.ks}, {"n", u.n}};
}

std::vector<std::uint64_t> seeds_of(std::uint64_t base, std::size_t count) {
  std::vector<std::uint64_t> s(count);
  for (std::size_t i = 0; i < count; ++i) s[i] = trajectory_seed(base, i);
  return s;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

}  // namespace

// ---- seeds and sampling ----------------------------------------------------

std::uint64_t stream_seed(std::uint64_t base_seed, Stream stream) {
  return trajectory_seed(base_seed ^ 0x6a09e667f3bcc909ULL, static_cast<std::uint64_t>(stream));
}

std::vector<double> window_times(std::uint64_t seed, double t0, double t1, int count) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(t0, t1);
  std::vector<double> t(count);
  for (auto& x : t) x = u(rng);
  std::sort(t.begin(), t.end());
  return t;
}

// ---- budget ----------------------------------------------------------------

double estimate_cost_seconds(const ExperimentConfig& c) {
  const double N = static_cast<double>(c.ensemble);
  const double T = c.model.T;
  const double eff = N * std::ceil(T / c.effective_step) * effective_step_cost(c);
  switch (c.recipe) {
    case Recipe::Spectrum:
    case Recipe::Resonance:
    case Recipe::Kweyl:
      return 0.0;
    case Recipe::SimulateFull:
      return N * full_steps(c, c.model.nu) * full_step_cost(c);
    case Recipe::SimulateEffective:
      return eff;
    case Recipe::CompareAveraging: {
      double total = eff;
      for (double nu : c.nu_grid) total += N * full_steps(c, nu) * full_step_cost(c);
      return total;
    }
    case Recipe::Stationary:
    case Recipe::Cascade: {
      const auto& systems = c.recipe == Recipe::Stationary ? c.stationary.systems : c.cascade.systems;
      double total = 0.0;
      for (const auto& s : systems)
        total += s == "full" ? N * full_steps(c, c.model.nu) * full_step_cost(c) : eff;
      return total;
    }
    case Recipe::Contraction:
      return 2.0 * c.contraction.pairs * std::ceil(T / c.effective_step) * effective_step_cost(c);
  }
  return 0.0;
}

void check_budget(const ExperimentConfig& config) {
  const double estimate = estimate_cost_seconds(config);
  if (estimate > config.budget_seconds) {
    std::ostringstream msg;
    msg << "estimated cost " << std::fixed << std::setprecision(0) << estimate << " CPU-seconds exceeds the budget of "
        << config.budget_seconds << " (rerun with --force or raise budget_seconds)";
    throw BudgetError(msg.str(), estimate);
  }
}

// ---- setup -----------------------------------------------------------------

Setup prepare(const ExperimentConfig& config) {
  Setup s{build_basis(config.potential, config.m, config.n_galerkin), {}, config.model};
  if (config.recipe == Recipe::Cascade) {
    std::vector<double> b(config.n_galerkin, config.cascade.background);
    b[config.cascade.forced_mode - 1] = config.cascade.amplitude;
    s.model.noise = NoiseSpec::explicit_list(std::move(b));
  }
  s.coeffs = compute_coefficients(s.basis, s.model.noise);
  return s;
}

ModeVector initial_state(const ExperimentConfig& config) {
  return config.initial.size() == config.m ? config.initial : ModeVector::Zero(config.m);
}

// ---- Kronecker-Weyl table ----------------------------------------------------

double deviation_envelope(const TorusPolynomial& f, std::span<const double> freq, std::span<const double> q0,
                          double horizon, int points) {
  double slowest = INFINITY;
  for (const auto& t : f.terms) {
    double w = 0.0;
    for (std::size_t j = 0; j < t.s.size(); ++j) w += t.s[j] * freq[j];
    if (w != 0.0) slowest = std::min(slowest, std::abs(w));
  }
  if (!std::isfinite(slowest)) return time_average_quasiperiodic(f, freq, q0, horizon).deviation;
  const double period = kTwoPi / slowest;
  double best = 0.0;
  for (int i = 0; i < points; ++i) {
    const double T = horizon + period * i / std::max(1, points - 1);
    best = std::max(best, time_average_quasiperiodic(f, freq, q0, T).deviation);
  }
  return best;
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("slope needs at least two points");
  double mx = 0.0, my = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]) / n;
    my += std::log(y[i]) / n;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

KweylTable run_kweyl(const ExperimentConfig& config, const SpectralBasis& basis) {
  KweylTable t;
  t.frequencies = config.kweyl.frequencies;
  if (t.frequencies.empty()) t.frequencies.assign(basis.lambda.data(), basis.lambda.data() + basis.m);
  const std::size_t n = t.frequencies.size();
  t.harmonic = config.kweyl.harmonic;
  if (t.harmonic.empty()) {
    const int pattern[] = {1, -1, 1};
    for (std::size_t j = 0; j < std::min<std::size_t>(3, n); ++j) t.harmonic.push_back(pattern[j]);
  }
  t.harmonic.resize(n, 0);
  t.phase = config.kweyl.phase;
  t.phase.resize(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) t.omega += t.harmonic[j] * t.frequencies[j];

  const auto f = TorusPolynomial::cosine(t.harmonic);
  std::vector<double> horizons, envelopes;
  for (double T : config.kweyl.horizons) {
    KweylRow row;
    row.horizon = T;
    const auto avg = time_average_quasiperiodic(f, t.frequencies, t.phase, T);
    row.average = avg.average;
    row.deviation = avg.deviation;
    row.envelope = deviation_envelope(f, t.frequencies, t.phase, T);
    row.bound = t.omega != 0.0 ? 2.0 / (T * std::abs(t.omega)) : INFINITY;
    t.rows.push_back(row);
    if (row.envelope > 0.0) {
      horizons.push_back(T);
      envelopes.push_back(row.envelope);
    }
  }
  t.envelope_slope = horizons.size() >= 2 ? loglog_slope(horizons, envelopes) : 0.0;
  return t;
}

// ---- ensembles ---------------------------------------------------------------

EnsembleRun run_full_ensemble(const ExperimentConfig& config, const Setup& setup, double nu, std::uint64_t base_seed,
                              const std::vector<std::vector<double>>& times) {
  if (times.empty()) throw ValidationError("ensemble needs sample times");
  EnsembleRun run;
  run.system = "full";
  run.nu = nu;
  run.base_seed = base_seed;
  const ModelParams model = with_nu(setup.model, nu);
  run.h = resolve_step(model, model.T);
  const Perturbation perturbation(setup.basis, setup.coeffs, model);
  const ModeVector v0 = initial_state(config);
  run.trajectories.resize(config.ensemble);
  parallel_for(config.ensemble, config.threads, [&](std::size_t i) {
    const auto& t = times.size() == 1 ? times[0] : times[i];
    run.trajectories[i] = simulate_trajectory(v0, perturbation, NoisePlan{base_seed, i, run.h}, t);
  });
  return run;
}

EnsembleRun run_effective_ensemble(const ExperimentConfig& config, const Setup& setup, std::uint64_t base_seed,
                                   const std::vector<std::vector<double>>& times) {
  if (times.empty()) throw ValidationError("ensemble needs sample times");
  EnsembleRun run;
  run.system = "effective";
  run.base_seed = base_seed;
  run.h = effective_step(config, setup.model.T);
  const EffectiveDrift drift = make_effective_drift(setup.coeffs, setup.model);
  const ModeVector v0 = initial_state(config);
  run.trajectories.resize(config.ensemble);
  parallel_for(config.ensemble, config.threads, [&](std::size_t i) {
    const auto& t = times.size() == 1 ? times[0] : times[i];
    run.trajectories[i] = simulate_effective_trajectory(v0, drift, setup.coeffs.Y, NoisePlan{base_seed, i, run.h}, t);
  });
  return run;
}

namespace {

EnsembleRun run_system(const ExperimentConfig& config, const Setup& setup, const std::string& system,
                       const std::vector<std::vector<double>>& times) {
  if (system == "full") return run_full_ensemble(config, setup, setup.model.nu, stream_seed(config.base_seed, Stream::Full), times);
  return run_effective_ensemble(config, setup, stream_seed(config.base_seed, Stream::Effective), times);
}

// Pooled per-mode samples of all complete trajectories, trajectory-major.
std::vector<std::vector<std::complex<double>>> pooled_modes(const std::vector<const Trajectory*>& good, int m) {
  std::vector<std::vector<std::complex<double>>> out(m);
  for (const auto* t : good)
    for (const auto& s : t->samples)
      for (int k = 0; k < m; ++k) out[k].push_back(s.v[k]);
  return out;
}

}  // namespace

// ---- stationary ------------------------------------------------------------

StationaryReport run_stationary(const ExperimentConfig& config, const Setup& setup, const std::string& system) {
  const double T = setup.model.T;
  StationaryReport r;
  r.system = system;
  r.window_start = window_start_or_half(config.stationary.window_start, T);
  const auto times = linspace(r.window_start, T, config.stationary.samples);
  const EnsembleRun run = run_system(config, setup, system, {times});
  r.h = run.h;
  const auto good = complete(run.trajectories);
  r.trajectories = good.size();
  r.blowups = run.trajectories.size() - good.size();
  if (good.size() < 2) throw BlowupError("too few complete trajectories for stationary statistics");

  Eigen::VectorXd reference;
  try {
    reference = stationary_gaussian_reference(setup.model, setup.coeffs);
    r.has_reference = true;
  } catch (const ValidationError&) {
    r.has_reference = false;
  }

  const int m = setup.basis.m;
  const auto pooled = pooled_modes(good, m);
  const std::size_t per = times.size();
  for (int k = 0; k < m; ++k) {
    StationaryMode mode;
    const auto g = gaussian_moment_check(pooled[k], per);
    mode.second_moment = g.second;
    mode.mean_action = {0.5 * g.second.mean, 0.5 * g.second.se};
    mode.kurtosis_ratio = g.kurtosis_ratio;
    std::vector<double> angles;
    for (const auto* t : good) angles.push_back(t->samples.back().aa.phi[k]);
    mode.final_angles = circular_uniformity(angles);
    if (r.has_reference) {
      mode.reference = reference[k];
      mode.relative_error = g.second.mean / reference[k] - 1.0;
    }
    r.modes.push_back(mode);
  }
  return r;
}

// ---- averaging comparison --------------------------------------------------

AveragingComparison run_compare_averaging(const ExperimentConfig& config, const Setup& setup) {
  AveragingComparison out;
  const double T = setup.model.T;
  const int m = setup.basis.m;
  const int K = config.window.samples_per_trajectory;
  out.horizon = T;
  out.window_start = window_start_or_half(config.window.start, T);

  const EnsembleRun eff = run_effective_ensemble(config, setup, stream_seed(config.base_seed, Stream::Effective), {{T}});
  const auto eff_good = complete(eff.trajectories);
  if (eff_good.size() < 2) throw BlowupError("effective ensemble blew up");
  std::vector<std::vector<double>> eff_actions(m);
  for (const auto* t : eff_good)
    for (int k = 0; k < m; ++k) eff_actions[k].push_back(t->samples.back().aa.I[k]);
  for (int k = 0; k < m; ++k) out.effective_mean_action.push_back(mean_estimate(eff_actions[k]).mean);

  std::vector<std::vector<double>> times(config.ensemble);
  const std::uint64_t window_seed = stream_seed(config.base_seed, Stream::Window);
  for (std::size_t i = 0; i < config.ensemble; ++i) {
    times[i] = window_times(trajectory_seed(window_seed, i), out.window_start, T, K);
    times[i].insert(times[i].begin(), 0.0);
    times[i].push_back(T);
  }

  std::vector<double> grid = config.nu_grid;
  std::sort(grid.begin(), grid.end(), std::greater<>());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double nu = grid[g];
    const EnsembleRun full = run_full_ensemble(config, setup, nu, stream_seed(config.base_seed, Stream::Full), times);
    NuComparison row;
    row.nu = nu;
    row.h = full.h;
    const auto good = complete(full.trajectories);
    row.blowups = full.trajectories.size() - good.size();
    if (good.size() < 100) throw BlowupError("too many full-system trajectories blew up");

    std::vector<std::vector<double>> actions(m), angles(m);
    std::vector<Trajectory> ends;
    ends.reserve(good.size());
    for (const auto* t : good) {
      for (int k = 0; k < m; ++k) {
        actions[k].push_back(t->samples.back().aa.I[k]);
        for (int s = 1; s <= K; ++s) angles[k].push_back(t->samples[s].aa.phi[k]);
      }
      Trajectory e;
      e.index = t->index;
      e.samples = {t->samples.front(), t->samples.back()};
      ends.push_back(std::move(e));
    }
    for (int k = 0; k < m; ++k) {
      const std::uint64_t boot = trajectory_seed(stream_seed(config.base_seed, Stream::Bootstrap), g * 1000 + k);
      row.distance.push_back({wasserstein1_1d(actions[k], eff_actions[k]),
                              wasserstein1_bootstrap_se(actions[k], eff_actions[k], config.bootstrap, boot)});
      row.window_angles.push_back(circular_uniformity(angles[k]));
      row.mean_action.push_back(mean_estimate(actions[k]).mean);
    }
    const Perturbation perturbation(setup.basis, setup.coeffs, with_nu(setup.model, nu));
    row.energy = energy_balance_residual(ends, perturbation).front();
    out.rows.push_back(std::move(row));
  }

  for (int k = 0; k < m; ++k) {
    bool ok = true;
    for (std::size_t g = 1; g < out.rows.size(); ++g) {
      const auto& a = out.rows[g - 1].distance[k];
      const auto& b = out.rows[g].distance[k];
      if (b.w1 > a.w1 + 3.0 * std::hypot(a.se, b.se)) ok = false;
    }
    out.monotone.push_back(ok);
    const double last = out.rows.back().distance[k].w1;
    out.ratio.push_back(last > 0.0 ? out.rows.front().distance[k].w1 / last : INFINITY);
  }
  return out;
}

// ---- cascade ---------------------------------------------------------------

CascadeReport run_cascade(const ExperimentConfig& config, const Setup& setup) {
  CascadeReport r;
  r.forced_mode = config.cascade.forced_mode;
  r.systems = config.cascade.systems;
  const double T = setup.model.T;
  const auto times = linspace(window_start_or_half(config.stationary.window_start, T), T, config.stationary.samples);
  for (const auto& system : r.systems) {
    const EnsembleRun run = run_system(config, setup, system, {times});
    const auto good = complete(run.trajectories);
    if (good.size() < 2) throw BlowupError("cascade ensemble blew up");
    std::vector<Estimate> energy;
    for (int k = 0; k < setup.basis.m; ++k) {
      std::vector<double> e;
      for (const auto* t : good)
        for (const auto& s : t->samples) e.push_back(s.aa.I[k]);
      energy.push_back(mean_estimate(e, times.size()));
    }
    r.energy.push_back(std::move(energy));
  }
  return r;
}

// ---- contraction -------------------------------------------------------------

ContractionReport run_contraction(const ExperimentConfig& config, const Setup& setup) {
  ContractionReport r;
  const double T = setup.model.T;
  const double h = effective_step(config, T);
  const int samples = static_cast<int>(std::llround(T / config.contraction.sample_interval)) + 1;
  r.times = linspace(0.0, T, samples);
  const EffectiveDrift drift = make_effective_drift(setup.coeffs, setup.model);
  const ModeVector a0 = initial_state(config);
  const ModeVector b0 = config.contraction.second_initial.size() == config.m ? config.contraction.second_initial
                                                                             : ModeVector::Zero(config.m);
  const std::uint64_t seed = stream_seed(config.base_seed, Stream::Effective);
  const std::size_t pairs = static_cast<std::size_t>(config.contraction.pairs);
  r.distance.assign(pairs, {});
  std::vector<char> blew(pairs, 0);
  parallel_for(pairs, config.threads, [&](std::size_t i) {
    const NoisePlan plan{seed, i, h};
    const auto a = simulate_effective_trajectory(a0, drift, setup.coeffs.Y, plan, r.times);
    const auto b = simulate_effective_trajectory(b0, drift, setup.coeffs.Y, plan, r.times);
    if (a.blowup || b.blowup) {
      blew[i] = 1;
      return;
    }
    for (std::size_t s = 0; s < r.times.size(); ++s) r.distance[i].push_back((a.samples[s].v - b.samples[s].v).norm());
  });
  r.bound = std::exp(-setup.model.kappa * setup.basis.lambda[0] * T / 2.0);
  r.worst_increase_per_step = -INFINITY;
  for (std::size_t i = 0; i < pairs; ++i) {
    if (blew[i]) {
      ++r.blowups;
      continue;
    }
    const auto& d = r.distance[i];
    for (std::size_t s = 1; s < d.size(); ++s) {
      const double steps = std::max(1.0, std::round((r.times[s] - r.times[s - 1]) / h));
      r.worst_increase_per_step = std::max(r.worst_increase_per_step, (d[s] - d[s - 1]) / steps);
    }
    if (d.front() > 0.0) r.max_final_ratio = std::max(r.max_final_ratio, d.back() / d.front());
  }
  return r;
}

// ---- serialisation -----------------------------------------------------------

nlohmann::json basis_json(const SpectralBasis& basis) {
  json psi = json::array();
  for (int k = 0; k < basis.m; ++k)
    for (int j = 0; j < basis.n_galerkin; ++j) psi.push_back(basis.psi(k, j));
  json potential;
  if (basis.potential.kind == PotentialSpec::Kind::GridSamples) {
    potential = {{"kind", "grid-samples"}, {"samples", basis.potential.samples}};
  } else {
    potential = {{"kind", "trig-polynomial"}, {"cos", basis.potential.cos_coeffs}};
  }
  json clusters = json::array();
  for (const auto& c : basis.clusters) clusters.push_back({{"first", c.first + 1}, {"gap", c.gap}});
  return {{"m", basis.m},
          {"n_galerkin", basis.n_galerkin},
          {"lambda", std::vector<double>(basis.lambda.data(), basis.lambda.data() + basis.m)},
          {"psi", psi},
          {"potential", potential},
          {"clusters", clusters}};
}

nlohmann::json coefficients_json(const EffectiveCoefficients& coeffs) {
  const auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  json Lp = json::array();
  for (Eigen::Index k = 0; k < coeffs.Lprime.rows(); ++k) {
    json row = json::array();
    for (Eigen::Index l = 0; l < coeffs.Lprime.cols(); ++l) row.push_back(coeffs.Lprime(k, l));
    Lp.push_back(row);
  }
  return {{"M", vec(coeffs.M)}, {"Lprime", Lp}, {"Y", vec(coeffs.Y)}, {"warnings", coeffs.warnings}};
}

nlohmann::json resonance_json(const ResonanceReport& r) {
  return {{"modes", r.modes},
          {"s_max", r.s_max},
          {"epsilon", r.epsilon},
          {"min_abs", r.min_abs},
          {"argmin", r.argmin},
          {"resonant", r.resonant},
          {"combinations_checked", r.combinations_checked}};
}

std::string matrix_csv(const Eigen::MatrixXd& a) {
  std::ostringstream out;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) out << (j ? "," : "") << csv_number(a(i, j));
    out << "\n";
  }
  return out.str();
}

std::string trajectory_csv(const EnsembleRun& run) {
  std::ostringstream out;
  out << "trajectory,tau,k,re_v,im_v,I,phi,system\n";
  for (const auto& t : run.trajectories)
    for (const auto& s : t.samples)
      for (Eigen::Index k = 0; k < s.v.size(); ++k)
        out << t.index << ',' << csv_number(s.tau) << ',' << k + 1 << ',' << csv_number(s.v[k].real()) << ','
            << csv_number(s.v[k].imag()) << ',' << csv_number(s.aa.I[k]) << ',' << csv_number(s.aa.phi[k]) << ','
            << run.system << '\n';
  return out.str();
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
    throw std::runtime_error("SHA-256 digest failed");
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

nlohmann::json RunManifest::to_json() const {
  json f = json::array();
  for (const auto& file : files) f.push_back({{"name", file.name}, {"bytes", file.bytes}, {"sha256", file.sha256}});
  return {{"config", config},
          {"version", version},
          {"started_utc", started_utc},
          {"wall_seconds", wall_seconds},
          {"seeds", seeds},
          {"files", f}};
}

namespace {

json ensemble_summary_json(const EnsembleRun& run) {
  const auto good = complete(run.trajectories);
  json out = {{"system", run.system},
              {"h", run.h},
              {"trajectories", run.trajectories.size()},
              {"blowups", run.trajectories.size() - good.size()}};
  if (run.system == "full") out["nu"] = run.nu;
  if (good.size() < 2) return out;
  std::vector<ModeVector> finals;
  for (const auto* t : good) finals.push_back(t->samples.back().v);
  const auto summary = summarize(finals);
  json modes = json::array();
  for (std::size_t k = 0; k < summary.modes.size(); ++k) {
    const auto& s = summary.modes[k];
    modes.push_back({{"k", k + 1},
                     {"E", s.energy},
                     {"mean_action", estimate_json(s.mean_action)},
                     {"var", s.action_variance},
                     {"kurtosis_ratio", estimate_json(s.kurtosis_ratio)},
                     {"resultant", s.angles.resultant},
                     {"ks", s.angles.ks}});
  }
  out["tau"] = good.front()->samples.back().tau;
  out["modes"] = modes;
  return out;
}

json stationary_json(const StationaryReport& r) {
  json modes = json::array();
  for (std::size_t k = 0; k < r.modes.size(); ++k) {
    const auto& m = r.modes[k];
    json row = {{"k", k + 1},
                {"second_moment", estimate_json(m.second_moment)},
                {"E", estimate_json(m.mean_action)},
                {"kurtosis_ratio", estimate_json(m.kurtosis_ratio)},
                {"resultant", m.final_angles.resultant},
                {"ks", m.final_angles.ks}};
    if (r.has_reference) {
      row["reference_second_moment"] = m.reference;
      row["relative_error"] = m.relative_error;
    }
    modes.push_back(row);
  }
  return {{"system", r.system},       {"h", r.h},
          {"window_start", r.window_start}, {"trajectories", r.trajectories},
          {"blowups", r.blowups},     {"gaussian_reference", r.has_reference},
          {"modes", modes}};
}

struct RecipeOutput {
  json summary;
  std::map<std::string, std::string> files;
  json seeds = json::object();
};

void record_seeds(RecipeOutput& out, const std::string& name, std::uint64_t base, std::size_t count) {
  out.seeds[name] = {{"stream_seed", base}, {"trajectory_seeds", seeds_of(base, count)}};
}

RecipeOutput execute(const ExperimentConfig& config) {
  RecipeOutput out;
  const Setup setup = prepare(config);
  const double T = setup.model.T;
  switch (config.recipe) {
    case Recipe::Spectrum: {
      out.summary = {{"claim", "eigenpairs of -d2/dx2 + V on odd periodic functions and effective coefficients"},
                     {"lambda", std::vector<double>(setup.basis.lambda.data(), setup.basis.lambda.data() + setup.basis.m)},
                     {"clusters", basis_json(setup.basis)["clusters"]},
                     {"warnings", setup.coeffs.warnings}};
      out.files["basis.json"] = basis_json(setup.basis).dump(2) + "\n";
      out.files["coefficients.json"] = coefficients_json(setup.coeffs).dump(2) + "\n";
      out.files["L.csv"] = matrix_csv(setup.coeffs.L);
      break;
    }
    case Recipe::Resonance: {
      const int modes = config.resonance.modes > 0 ? config.resonance.modes : setup.basis.m;
      const auto report = check_nonresonance(std::span<const double>(setup.basis.lambda.data(), setup.basis.m), modes,
                                             config.resonance.s_max, config.resonance.epsilon, config.resonance.budget);
      out.summary = resonance_json(report);
      out.summary["claim"] = "finite search for integer relations among the eigenvalues";
      out.files["resonance.json"] = resonance_json(report).dump(2) + "\n";
      break;
    }
    case Recipe::Kweyl: {
      const auto t = run_kweyl(config, setup.basis);
      json rows = json::array();
      std::ostringstream csv;
      csv << "T,re_average,im_average,deviation,envelope,bound\n";
      for (const auto& r : t.rows) {
        rows.push_back({{"T", r.horizon},
                        {"average", {r.average.real(), r.average.imag()}},
                        {"deviation", r.deviation},
                        {"envelope", r.envelope},
                        {"bound", r.bound}});
        csv << csv_number(r.horizon) << ',' << csv_number(r.average.real()) << ',' << csv_number(r.average.imag())
            << ',' << csv_number(r.deviation) << ',' << csv_number(r.envelope) << ',' << csv_number(r.bound) << '\n';
      }
      out.summary = {{"claim", "time averages along a nonresonant linear flow on the torus approach the mean as O(1/T)"},
                     {"harmonic", t.harmonic},
                     {"frequencies", t.frequencies},
                     {"omega", t.omega},
                     {"rows", rows},
                     {"envelope_slope", t.envelope_slope}};
      out.files["kweyl.csv"] = csv.str();
      break;
    }
    case Recipe::SimulateFull:
    case Recipe::SimulateEffective: {
      const auto times = config.sample_times.empty() ? linspace(0.0, T, 11) : config.sample_times;
      const std::string system = config.recipe == Recipe::SimulateFull ? "full" : "effective";
      const auto run = run_system(config, setup, system, {times});
      out.summary = ensemble_summary_json(run);
      out.summary["claim"] = system == "full" ? "ensemble of the full v-equations" : "ensemble of the effective equations";
      if (system == "full") {
        auto ends = run.trajectories;
        for (auto& t : ends)
          if (!t.blowup && t.samples.size() >= 2) t.samples = {t.samples.front(), t.samples.back()};
        try {
          const Perturbation perturbation(setup.basis, setup.coeffs, setup.model);
          const auto e = energy_balance_residual(ends, perturbation).front();
          out.summary["energy_residual"] = {{"mean", e.mean}, {"se", e.se}, {"normalized", e.normalized}};
        } catch (const ValidationError&) {
        }
      }
      out.files["trajectories.csv"] = trajectory_csv(run);
      record_seeds(out, system, run.base_seed, config.ensemble);
      break;
    }
    case Recipe::CompareAveraging: {
      const auto c = run_compare_averaging(config, setup);
      json rows = json::array();
      std::ostringstream dist, ang;
      dist << "nu,k,w1,se\n";
      ang << "nu,k,resultant,ks,n\n";
      for (const auto& r : c.rows) {
        json modes = json::array();
        for (std::size_t k = 0; k < r.distance.size(); ++k) {
          modes.push_back({{"k", k + 1},
                           {"w1", r.distance[k].w1},
                           {"se", r.distance[k].se},
                           {"mean_action", r.mean_action[k]},
                           {"window_angles", uniformity_json(r.window_angles[k])}});
          dist << csv_number(r.nu) << ',' << k + 1 << ',' << csv_number(r.distance[k].w1) << ','
               << csv_number(r.distance[k].se) << '\n';
          ang << csv_number(r.nu) << ',' << k + 1 << ',' << csv_number(r.window_angles[k].resultant) << ','
              << csv_number(r.window_angles[k].ks) << ',' << r.window_angles[k].n << '\n';
        }
        rows.push_back({{"nu", r.nu},
                        {"h", r.h},
                        {"blowups", r.blowups},
                        {"modes", modes},
                        {"energy_residual",
                         {{"mean", r.energy.mean}, {"se", r.energy.se}, {"normalized", r.energy.normalized}}}});
      }
      out.summary = {{"claim", "as nu -> 0 the law of the actions approaches that of the effective equations"},
                     {"T", c.horizon},
                     {"window_start", c.window_start},
                     {"effective_mean_action", c.effective_mean_action},
                     {"rows", rows},
                     {"monotone_in_nu", c.monotone},
                     {"ratio_largest_to_smallest_nu", c.ratio}};
      out.files["distances.csv"] = dist.str();
      out.files["window_angles.csv"] = ang.str();
      record_seeds(out, "full", stream_seed(config.base_seed, Stream::Full), config.ensemble);
      record_seeds(out, "effective", stream_seed(config.base_seed, Stream::Effective), config.ensemble);
      record_seeds(out, "window_times", stream_seed(config.base_seed, Stream::Window), config.ensemble);
      break;
    }
    case Recipe::Stationary: {
      json reports = json::array();
      std::ostringstream csv;
      csv << "system,k,second_moment,se,reference,relative_error,kurtosis_ratio,kurtosis_se,resultant,ks\n";
      for (const auto& system : config.stationary.systems) {
        const auto r = run_stationary(config, setup, system);
        reports.push_back(stationary_json(r));
        for (std::size_t k = 0; k < r.modes.size(); ++k) {
          const auto& m = r.modes[k];
          csv << system << ',' << k + 1 << ',' << csv_number(m.second_moment.mean) << ','
              << csv_number(m.second_moment.se) << ',' << csv_number(m.reference) << ','
              << csv_number(m.relative_error) << ',' << csv_number(m.kurtosis_ratio.mean) << ','
              << csv_number(m.kurtosis_ratio.se) << ',' << csv_number(m.final_angles.resultant) << ','
              << csv_number(m.final_angles.ks) << '\n';
        }
        record_seeds(out, system, stream_seed(config.base_seed, system == "full" ? Stream::Full : Stream::Effective),
                     config.ensemble);
      }
      out.summary = {{"claim", "stationary statistics against the Gaussian law of the linear effective equations"},
                     {"systems", reports}};
      out.files["stationary.csv"] = csv.str();
      break;
    }
    case Recipe::Cascade: {
      const auto r = run_cascade(config, setup);
      json systems = json::array();
      std::ostringstream csv;
      csv << "system,l,E,se\n";
      for (std::size_t s = 0; s < r.systems.size(); ++s) {
        json e = json::array();
        for (std::size_t k = 0; k < r.energy[s].size(); ++k) {
          e.push_back(estimate_json(r.energy[s][k]));
          csv << r.systems[s] << ',' << k + 1 << ',' << csv_number(r.energy[s][k].mean) << ','
              << csv_number(r.energy[s][k].se) << '\n';
        }
        systems.push_back({{"system", r.systems[s]}, {"E", e}});
        record_seeds(out, r.systems[s],
                     stream_seed(config.base_seed, r.systems[s] == "full" ? Stream::Full : Stream::Effective),
                     config.ensemble);
      }
      out.summary = {{"claim", "energy forced into one mode stays near it: no cascade to distant modes"},
                     {"forced_mode", r.forced_mode},
                     {"systems", systems}};
      out.files["cascade.csv"] = csv.str();
      break;
    }
    case Recipe::Contraction: {
      const auto r = run_contraction(config, setup);
      std::ostringstream csv;
      csv << "pair,tau,distance\n";
      for (std::size_t i = 0; i < r.distance.size(); ++i)
        for (std::size_t s = 0; s < r.distance[i].size(); ++s)
          csv << i << ',' << csv_number(r.times[s]) << ',' << csv_number(r.distance[i][s]) << '\n';
      out.summary = {{"claim", "solutions of the effective equations with common noise approach each other"},
                     {"pairs", r.distance.size()},
                     {"blowups", r.blowups},
                     {"worst_increase_per_step", r.worst_increase_per_step},
                     {"max_final_ratio", r.max_final_ratio},
                     {"bound", r.bound}};
      out.files["contraction.csv"] = csv.str();
      record_seeds(out, "effective", stream_seed(config.base_seed, Stream::Effective),
                   static_cast<std::size_t>(config.contraction.pairs));
      break;
    }
  }
  out.summary["experiment"] = recipe_name(config.recipe);
  return out;
}

}  // namespace

RunManifest run(const ExperimentConfig& config, bool force) {
  if (!force) check_budget(config);
  RunManifest manifest;
  manifest.config = config.echo;
  manifest.version = CGL_VERSION;
  manifest.started_utc = utc_now();
  const auto start = std::chrono::steady_clock::now();

  RecipeOutput out = execute(config);
  out.files["summary.json"] = out.summary.dump(2) + "\n";

  const std::filesystem::path dir(config.output_dir);
  std::filesystem::create_directories(dir);
  for (const auto& [name, content] : out.files) {
    std::ofstream f(dir / name, std::ios::binary);
    f << content;
    if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
    manifest.files.push_back({name, content.size(), sha256_hex(content)});
  }
  manifest.seeds = {{"base_seed", config.base_seed}, {"streams", out.seeds}};
  manifest.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::ofstream f(dir / "manifest.json", std::ios::binary);
  f << manifest.to_json().dump(2) << "\n";
  if (!f) throw std::runtime_error("cannot write " + (dir / "manifest.json").string());
  return manifest;
}

}  // namespace cgl
