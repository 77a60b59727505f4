#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "cgl/coefficients.hpp"
#include "cgl/dynamics.hpp"
#include "cgl/effective.hpp"
#include "cgl/errors.hpp"
#include "cgl/spectral.hpp"
#include "cgl/statistics.hpp"

namespace cgl {

enum class Recipe {
  Spectrum,
  Resonance,
  Kweyl,
  SimulateFull,
  SimulateEffective,
  CompareAveraging,
  Stationary,
  Cascade,
  Contraction,
};

std::string_view recipe_name(Recipe recipe);
std::optional<Recipe> parse_recipe(std::string_view name);

/// All schema violations of a config, each prefixed with its field path.
class ConfigError : public ValidationError {
 public:
  explicit ConfigError(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  std::vector<std::string> errors_;
};

struct ResonanceSpec {
  int modes = 0;  // 0: all retained modes
  int s_max = 4;
  double epsilon = 1e-9;
  double budget = 2e8;
};

struct KweylSpec {
  std::vector<int> harmonic;        // s; default (1, -1, 1, 0, ...)
  std::vector<double> frequencies;  // default: the basis eigenvalues
  std::vector<double> phase;        // q0; default 0
  std::vector<double> horizons{1e1, 1e2, 1e3, 1e4};
};

/// Random observation times, uniform on [start, T], drawn per trajectory.
struct WindowSpec {
  double start = -1.0;  // negative: T / 2
  int samples_per_trajectory = 2;
};

struct StationarySpec {
  double window_start = -1.0;  // negative: T / 2
  int samples = 11;            // equispaced on [window_start, T]
  std::vector<std::string> systems{"effective", "full"};
};

struct CascadeSpec {
  int forced_mode = 3;
  double amplitude = 0.1;
  double background = 1e-3;
  std::vector<std::string> systems{"full", "effective"};
};

struct ContractionSpec {
  int pairs = 50;
  ModeVector second_initial;  // empty: zero
  double sample_interval = 0.05;
};

struct ExperimentConfig {
  Recipe recipe = Recipe::Spectrum;
  PotentialSpec potential = PotentialSpec::zero();
  int m = 6;
  int n_galerkin = 32;
  ModelParams model{.nu = 0.1, .kappa = 1.0};  // kappa = 1 so the default p = 1 model is admissible
  ModeVector initial;  // empty: zero
  std::size_t ensemble = 500;
  std::uint64_t base_seed = 1;
  std::vector<double> nu_grid;
  std::vector<double> sample_times;  // empty: 11 equispaced points on [0, T]
  std::string output_dir = "cgl-out";
  unsigned threads = 0;
  double budget_seconds = 600.0;
  double effective_step = 1e-3;
  int bootstrap = 200;
  ResonanceSpec resonance;
  KweylSpec kweyl;
  WindowSpec window;
  StationarySpec stationary;
  CascadeSpec cascade;
  ContractionSpec contraction;
  nlohmann::json echo;  // the validated input with defaults filled in
};

/// Schema check of a JSON config; empty when valid.
std::vector<std::string> validate_config(std::string_view text);
/// Throws ConfigError listing every violation.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig parse_config_json(const nlohmann::json& doc);

/// CPU-second estimate of the simulation work of a recipe.
double estimate_cost_seconds(const ExperimentConfig& config);
/// Throws BudgetError when the estimate exceeds config.budget_seconds.
void check_budget(const ExperimentConfig& config);

struct Setup {
  SpectralBasis basis;
  EffectiveCoefficients coeffs;
  ModelParams model;  // with the recipe's noise applied (cascade forcing)
};
Setup prepare(const ExperimentConfig& config);

ModeVector initial_state(const ExperimentConfig& config);

// ---- recipe results --------------------------------------------------------

struct KweylRow {
  double horizon = 0.0;
  std::complex<double> average;
  double deviation = 0.0;
  double envelope = 0.0;  // max deviation over one slowest period after the horizon
  double bound = 0.0;     // 2 / (T |s.Lambda|) summed over harmonics
};
struct KweylTable {
  std::vector<int> harmonic;
  std::vector<double> frequencies;
  std::vector<double> phase;
  double omega = 0.0;  // s.Lambda
  std::vector<KweylRow> rows;
  double envelope_slope = 0.0;  // least-squares slope of log envelope vs log T
};
KweylTable run_kweyl(const ExperimentConfig& config, const SpectralBasis& basis);

/// Max of |average - f_0| over horizons in [T, T + P], P the period of the
/// slowest harmonic, sampled at `points` points.
double deviation_envelope(const TorusPolynomial& f, std::span<const double> freq, std::span<const double> q0,
                          double horizon, int points = 512);

/// Least-squares slope of log y against log x.
double loglog_slope(std::span<const double> x, std::span<const double> y);

struct EnsembleRun {
  std::string system;  // "full" or "effective"
  double nu = 0.0;     // 0 for the effective system
  double h = 0.0;
  std::uint64_t base_seed = 0;
  std::vector<Trajectory> trajectories;
};

/// Trajectories of the full system at viscosity parameter nu; times(i) gives
/// the sample times of trajectory i.
EnsembleRun run_full_ensemble(const ExperimentConfig& config, const Setup& setup, double nu,
                              std::uint64_t base_seed, const std::vector<std::vector<double>>& times);
EnsembleRun run_effective_ensemble(const ExperimentConfig& config, const Setup& setup, std::uint64_t base_seed,
                                   const std::vector<std::vector<double>>& times);

/// Sorted uniform draws on [t0, t1] for one trajectory, a pure function of its seed.
std::vector<double> window_times(std::uint64_t seed, double t0, double t1, int count);

/// Sub-stream base seeds for the different ensembles of one run.
enum class Stream : std::uint64_t { Full = 0, Effective = 1, Window = 2, Bootstrap = 3, Oracle = 4 };
std::uint64_t stream_seed(std::uint64_t base_seed, Stream stream);

struct StationaryMode {
  Estimate second_moment;  // E|v_k|^2 pooled over the tail window
  Estimate mean_action;
  Estimate kurtosis_ratio;
  CircularUniformity final_angles;
  double reference = 0.0;  // Gaussian sigma_k^2, 0 when not applicable
  double relative_error = 0.0;
};
struct StationaryReport {
  std::string system;
  double h = 0.0;
  double window_start = 0.0;
  std::size_t trajectories = 0;
  std::size_t blowups = 0;
  bool has_reference = false;
  std::vector<StationaryMode> modes;
};
StationaryReport run_stationary(const ExperimentConfig& config, const Setup& setup, const std::string& system);

struct ModeDistance {
  double w1 = 0.0;
  double se = 0.0;
};
struct NuComparison {
  double nu = 0.0;
  double h = 0.0;
  std::size_t blowups = 0;
  std::vector<ModeDistance> distance;            // per mode, actions at tau = T
  std::vector<CircularUniformity> window_angles;  // per mode, pooled over the window
  std::vector<double> mean_action;
  EnergyResidual energy;  // Ito identity over [0, T]
};
struct AveragingComparison {
  double horizon = 0.0;
  double window_start = 0.0;
  std::vector<double> effective_mean_action;
  std::vector<NuComparison> rows;  // nu descending
  /// Per mode: W1 at each smaller nu is at most the previous one plus three
  /// combined standard errors.
  std::vector<bool> monotone;
  std::vector<double> ratio;  // W1(largest nu) / W1(smallest nu)
};
AveragingComparison run_compare_averaging(const ExperimentConfig& config, const Setup& setup);

struct CascadeReport {
  int forced_mode = 0;
  std::vector<std::string> systems;
  std::vector<std::vector<Estimate>> energy;  // [system][mode], E_l = E|v_l|^2 / 2
};
CascadeReport run_cascade(const ExperimentConfig& config, const Setup& setup);

struct ContractionReport {
  std::vector<double> times;
  std::vector<std::vector<double>> distance;  // [pair][time]
  double worst_increase_per_step = 0.0;       // max over pairs and samples of (d_{s+1} - d_s) / steps
  double max_final_ratio = 0.0;               // max over pairs of d(T) / d(0)
  double bound = 0.0;                         // exp(-kappa lambda_1 T / 2)
  std::size_t blowups = 0;
};
ContractionReport run_contraction(const ExperimentConfig& config, const Setup& setup);

// ---- output ----------------------------------------------------------------

nlohmann::json basis_json(const SpectralBasis& basis);
nlohmann::json coefficients_json(const EffectiveCoefficients& coeffs);
nlohmann::json resonance_json(const ResonanceReport& report);
std::string matrix_csv(const Eigen::MatrixXd& a);
std::string trajectory_csv(const EnsembleRun& run);

struct OutputFile {
  std::string name;
  std::size_t bytes = 0;
  std::string sha256;
};
struct RunManifest {
  nlohmann::json config;
  std::string version;
  std::string started_utc;
  double wall_seconds = 0.0;
  nlohmann::json seeds;
  std::vector<OutputFile> files;

  nlohmann::json to_json() const;
};

std::string sha256_hex(std::string_view data);

/// Runs the recipe, writes its outputs, summary.json and manifest.json into
/// config.output_dir. Refuses runs over budget unless `force`.
RunManifest run(const ExperimentConfig& config, bool force = false);

}  // namespace cgl
