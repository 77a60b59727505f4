#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "cgl/experiments.hpp"

namespace cgl {

using nlohmann::json;

namespace {

constexpr std::pair<Recipe, std::string_view> kRecipes[] = {
    {Recipe::Spectrum, "spectrum"},
    {Recipe::Resonance, "resonance"},
    {Recipe::Kweyl, "kweyl"},
    {Recipe::SimulateFull, "simulate-full"},
    {Recipe::SimulateEffective, "simulate-effective"},
    {Recipe::CompareAveraging, "compare-averaging"},
    {Recipe::Stationary, "stationary"},
    {Recipe::Cascade, "cascade"},
    {Recipe::Contraction, "contraction"},
};

std::string join_errors(const std::vector<std::string>& errors) {
  std::ostringstream out;
  out << "invalid config";
  for (const auto& e : errors) out << "\n  " << e;
  return out.str();
}

// Typed reader over one JSON object that records every key it consumes, so
// leftovers can be reported as unknown.
class Fields {
 public:
  Fields(const json& node, std::string path, std::vector<std::string>& errors)
      : node_(node), path_(std::move(path)), errors_(errors) {
    if (!node_.is_object()) fail(path_.empty() ? "<root>" : path_, "must be an object");
  }

  ~Fields() {
    if (!node_.is_object()) return;
    for (const auto& [key, value] : node_.items())
      if (!seen_.contains(key)) fail(where(key), "unknown key");
  }

  Fields(const Fields&) = delete;
  Fields& operator=(const Fields&) = delete;

  bool has(const std::string& key) {
    seen_.insert(key);
    return node_.is_object() && node_.contains(key);
  }

  const json& raw(const std::string& key) { return node_.at(key); }
  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  void fail(const std::string& where, const std::string& what) { errors_.push_back(where + ": " + what); }

  void number(const std::string& key, double& out) {
    if (!has(key)) return;
    const auto& v = raw(key);
    if (!v.is_number()) return fail(where(key), "must be a number");
    out = v.get<double>();
    if (!std::isfinite(out)) fail(where(key), "must be finite");
  }

  template <typename Int>
  void integer(const std::string& key, Int& out) {
    if (!has(key)) return;
    const auto& v = raw(key);
    if (!v.is_number_integer()) return fail(where(key), "must be an integer");
    if constexpr (std::is_unsigned_v<Int>) {
      if (v.is_number_unsigned() || v.get<long long>() >= 0) {
        out = v.get<Int>();
        return;
      }
      return fail(where(key), "must be nonnegative");
    } else {
      out = v.get<Int>();
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (!has(key)) return;
    const auto& v = raw(key);
    if (!v.is_boolean()) return fail(where(key), "must be true or false");
    out = v.get<bool>();
  }

  void string(const std::string& key, std::string& out) {
    if (!has(key)) return;
    const auto& v = raw(key);
    if (!v.is_string()) return fail(where(key), "must be a string");
    out = v.get<std::string>();
  }

  template <typename T>
  void list(const std::string& key, std::vector<T>& out) {
    if (!has(key)) return;
    const auto& v = raw(key);
    if (!v.is_array()) return fail(where(key), "must be an array");
    std::vector<T> values;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const auto& e = v[i];
      const std::string at = where(key) + "[" + std::to_string(i) + "]";
      if constexpr (std::is_same_v<T, std::string>) {
        if (!e.is_string()) return fail(at, "must be a string");
      } else if constexpr (std::is_integral_v<T>) {
        if (!e.is_number_integer()) return fail(at, "must be an integer");
      } else {
        if (!e.is_number()) return fail(at, "must be a number");
      }
      values.push_back(e.get<T>());
    }
    out = std::move(values);
  }

 private:
  const json& node_;
  std::string path_;
  std::vector<std::string>& errors_;
  std::set<std::string> seen_;
};

void read_complex_vector(Fields& parent, const std::string& key, ModeVector& out,
                         std::vector<std::string>& errors) {
  if (!parent.has(key)) return;
  Fields f(parent.raw(key), parent.where(key), errors);
  std::vector<double> re, im;
  f.list("re", re);
  f.list("im", im);
  if (im.empty()) im.assign(re.size(), 0.0);
  if (re.empty()) re.assign(im.size(), 0.0);
  if (re.size() != im.size()) {
    f.fail(parent.where(key), "re and im must have the same length");
    return;
  }
  out.resize(static_cast<Eigen::Index>(re.size()));
  for (std::size_t i = 0; i < re.size(); ++i) out[static_cast<Eigen::Index>(i)] = {re[i], im[i]};
}

json complex_vector_json(const ModeVector& v) {
  json re = json::array(), im = json::array();
  for (const auto& z : v) {
    re.push_back(z.real());
    im.push_back(z.imag());
  }
  return {{"re", re}, {"im", im}};
}

bool needs_effective(const ExperimentConfig& c) {
  switch (c.recipe) {
    case Recipe::SimulateEffective:
    case Recipe::CompareAveraging:
    case Recipe::Contraction:
      return true;
    case Recipe::Stationary:
      return std::ranges::count(c.stationary.systems, "effective") > 0;
    case Recipe::Cascade:
      return std::ranges::count(c.cascade.systems, "effective") > 0;
    default:
      return false;
  }
}

void check_systems(const std::vector<std::string>& systems, const std::string& path,
                   std::vector<std::string>& errors) {
  if (systems.empty()) errors.push_back(path + ": must name at least one system");
  for (const auto& s : systems)
    if (s != "full" && s != "effective") errors.push_back(path + ": unknown system '" + s + "'");
}

json config_to_json(const ExperimentConfig& c) {
  json potential;
  if (c.potential.kind == PotentialSpec::Kind::GridSamples) {
    potential["samples"] = c.potential.samples;
  } else {
    potential["cos"] = c.potential.cos_coeffs;
    if (!c.potential.sin_coeffs.empty()) potential["sin"] = c.potential.sin_coeffs;
  }
  const auto& m = c.model;
  json model = {
      {"nu", m.nu},
      {"kappa", m.kappa},
      {"gamma_R", m.gamma_R},
      {"gamma_I", m.gamma_I},
      {"p", m.p},
      {"q", m.q},
      {"T", m.T},
      {"noise", {{"b", m.noise.b}}},
      {"step", {{"h_max", m.step.h_max}, {"factor", m.step.factor}, {"fixed", m.step.fixed}}},
      {"scheme", m.scheme == Scheme::Heun ? "heun" : "euler"},
      {"linear_damping_substitute", m.linear_damping_substitute},
      {"laplacian_shift", m.laplacian_shift},
      {"blowup_threshold", m.blowup_threshold},
  };
  json out = {
      {"experiment", recipe_name(c.recipe)},
      {"potential", potential},
      {"basis", {{"m", c.m}, {"n_galerkin", c.n_galerkin}}},
      {"model", model},
      {"initial", complex_vector_json(c.initial)},
      {"ensemble", c.ensemble},
      {"seed", c.base_seed},
      {"nu_grid", c.nu_grid},
      {"sample_times", c.sample_times},
      {"output", c.output_dir},
      {"threads", c.threads},
      {"budget_seconds", c.budget_seconds},
      {"effective_step", c.effective_step},
      {"bootstrap", c.bootstrap},
      {"resonance",
       {{"modes", c.resonance.modes},
        {"s_max", c.resonance.s_max},
        {"epsilon", c.resonance.epsilon},
        {"budget", c.resonance.budget}}},
      {"kweyl",
       {{"harmonic", c.kweyl.harmonic},
        {"frequencies", c.kweyl.frequencies},
        {"phase", c.kweyl.phase},
        {"horizons", c.kweyl.horizons}}},
      {"window", {{"start", c.window.start}, {"samples_per_trajectory", c.window.samples_per_trajectory}}},
      {"stationary",
       {{"window_start", c.stationary.window_start},
        {"samples", c.stationary.samples},
        {"systems", c.stationary.systems}}},
      {"cascade",
       {{"forced_mode", c.cascade.forced_mode},
        {"amplitude", c.cascade.amplitude},
        {"background", c.cascade.background},
        {"systems", c.cascade.systems}}},
      {"contraction",
       {{"pairs", c.contraction.pairs},
        {"second_initial", complex_vector_json(c.contraction.second_initial)},
        {"sample_interval", c.contraction.sample_interval}}},
  };
  return out;
}

ExperimentConfig parse_document(const json& doc, std::vector<std::string>& errors) {
  ExperimentConfig c;
  c.initial.resize(0);
  {
    Fields root(doc, "", errors);
    if (!doc.is_object()) return c;

    std::string experiment;
    if (!root.has("experiment")) {
      root.fail("experiment", "is required");
    } else {
      root.string("experiment", experiment);
      if (auto r = parse_recipe(experiment)) {
        c.recipe = *r;
      } else if (!experiment.empty()) {
        root.fail("experiment", "unknown recipe '" + experiment + "'");
      }
    }

    if (root.has("potential")) {
      Fields f(root.raw("potential"), "potential", errors);
      std::vector<double> cos_c, sin_c, samples;
      f.list("cos", cos_c);
      f.list("sin", sin_c);
      f.list("samples", samples);
      if (!samples.empty() && (!cos_c.empty() || !sin_c.empty()))
        f.fail("potential", "give either samples or trigonometric coefficients, not both");
      else if (!samples.empty())
        c.potential = PotentialSpec::from_samples(samples);
      else if (!cos_c.empty() || !sin_c.empty())
        c.potential = PotentialSpec::trig(cos_c.empty() ? std::vector<double>{0.0} : cos_c, sin_c);
    }

    if (root.has("basis")) {
      Fields f(root.raw("basis"), "basis", errors);
      f.integer("m", c.m);
      f.integer("n_galerkin", c.n_galerkin);
    }

    bool noise_given = false;
    if (root.has("model")) {
      Fields f(root.raw("model"), "model", errors);
      auto& m = c.model;
      f.number("nu", m.nu);
      f.number("kappa", m.kappa);
      f.number("gamma_R", m.gamma_R);
      f.number("gamma_I", m.gamma_I);
      f.integer("p", m.p);
      f.integer("q", m.q);
      f.number("T", m.T);
      f.boolean("linear_damping_substitute", m.linear_damping_substitute);
      f.boolean("laplacian_shift", m.laplacian_shift);
      f.number("blowup_threshold", m.blowup_threshold);
      std::string scheme = "euler";
      f.string("scheme", scheme);
      if (scheme == "heun")
        m.scheme = Scheme::Heun;
      else if (scheme != "euler")
        f.fail("model.scheme", "must be 'euler' or 'heun'");
      if (f.has("step")) {
        Fields s(f.raw("step"), "model.step", errors);
        s.number("h_max", m.step.h_max);
        s.number("factor", m.step.factor);
        s.number("fixed", m.step.fixed);
      }
      if (f.has("noise")) {
        noise_given = true;
        Fields n(f.raw("noise"), "model.noise", errors);
        const bool listed = n.has("b");
        const bool decay = n.has("amplitude") || n.has("decay") || n.has("count");
        if (listed && decay) {
          n.fail("model.noise", "give either b or amplitude/decay/count, not both");
        } else if (listed) {
          n.list("b", m.noise.b);
        } else {
          double amplitude = 1.0, rate = 1.0;
          int count = -1;
          n.number("amplitude", amplitude);
          n.number("decay", rate);
          n.integer("count", count);
          if (count == 0 || count < -1) n.fail("model.noise.count", "must be positive");
          m.noise = NoiseSpec::exponential(amplitude, rate, count > 0 ? count : c.n_galerkin);
        }
      }
    }
    if (!noise_given) c.model.noise = NoiseSpec::exponential(1.0, 1.0, c.n_galerkin);

    read_complex_vector(root, "initial", c.initial, errors);
    root.integer("ensemble", c.ensemble);
    root.integer("seed", c.base_seed);
    root.list("nu_grid", c.nu_grid);
    root.list("sample_times", c.sample_times);
    root.string("output", c.output_dir);
    root.integer("threads", c.threads);
    root.number("budget_seconds", c.budget_seconds);
    root.number("effective_step", c.effective_step);
    root.integer("bootstrap", c.bootstrap);

    if (root.has("resonance")) {
      Fields f(root.raw("resonance"), "resonance", errors);
      f.integer("modes", c.resonance.modes);
      f.integer("s_max", c.resonance.s_max);
      f.number("epsilon", c.resonance.epsilon);
      f.number("budget", c.resonance.budget);
    }
    if (root.has("kweyl")) {
      Fields f(root.raw("kweyl"), "kweyl", errors);
      f.list("harmonic", c.kweyl.harmonic);
      f.list("frequencies", c.kweyl.frequencies);
      f.list("phase", c.kweyl.phase);
      f.list("horizons", c.kweyl.horizons);
    }
    if (root.has("window")) {
      Fields f(root.raw("window"), "window", errors);
      f.number("start", c.window.start);
      f.integer("samples_per_trajectory", c.window.samples_per_trajectory);
    }
    if (root.has("stationary")) {
      Fields f(root.raw("stationary"), "stationary", errors);
      f.number("window_start", c.stationary.window_start);
      f.integer("samples", c.stationary.samples);
      f.list("systems", c.stationary.systems);
    }
    if (root.has("cascade")) {
      Fields f(root.raw("cascade"), "cascade", errors);
      f.integer("forced_mode", c.cascade.forced_mode);
      f.number("amplitude", c.cascade.amplitude);
      f.number("background", c.cascade.background);
      f.list("systems", c.cascade.systems);
    }
    if (root.has("contraction")) {
      Fields f(root.raw("contraction"), "contraction", errors);
      f.integer("pairs", c.contraction.pairs);
      read_complex_vector(f, "second_initial", c.contraction.second_initial, errors);
      f.number("sample_interval", c.contraction.sample_interval);
    }
  }
  if (!errors.empty()) return c;

  // Cross-field constraints.
  auto fail = [&](const std::string& path, const std::string& what) { errors.push_back(path + ": " + what); };
  if (c.m < 1) fail("basis.m", "must be at least 1");
  if (c.n_galerkin < 4 * c.m) fail("basis.n_galerkin", "must be at least 4 m");
  if (errors.empty()) {
    try {
      build_basis(c.potential, c.m, c.n_galerkin);
    } catch (const ValidationError& e) {
      fail("potential", e.what());
    }
  }

  if (c.recipe == Recipe::Cascade) {
    const int forced = c.cascade.forced_mode;
    if (forced < 1 || forced > c.n_galerkin) fail("cascade.forced_mode", "must lie in 1..n_galerkin");
    if (!(c.cascade.amplitude > 0.0)) fail("cascade.amplitude", "must be positive");
    if (!(c.cascade.background > 0.0)) fail("cascade.background", "must be positive");
    check_systems(c.cascade.systems, "cascade.systems", errors);
  }
  for (const auto& e : validate_model(c.model)) fail("model", e);

  if (c.initial.size() == 0) c.initial = ModeVector::Zero(c.m);
  if (c.initial.size() != c.m) fail("initial", "must have m entries");
  if (c.contraction.second_initial.size() == 0) c.contraction.second_initial = ModeVector::Zero(c.m);
  if (c.contraction.second_initial.size() != c.m) fail("contraction.second_initial", "must have m entries");

  const bool simulates = c.recipe != Recipe::Spectrum && c.recipe != Recipe::Resonance && c.recipe != Recipe::Kweyl;
  if (simulates && c.ensemble < 1) fail("ensemble", "must be positive");
  if (c.recipe == Recipe::CompareAveraging) {
    if (c.nu_grid.empty()) fail("nu_grid", "is required for compare-averaging");
    if (c.ensemble < 100) fail("ensemble", "compare-averaging needs at least 100 trajectories");
    if (c.bootstrap < 10) fail("bootstrap", "needs at least 10 replicates");
    if (c.window.samples_per_trajectory < 1) fail("window.samples_per_trajectory", "must be positive");
    if (c.window.start >= c.model.T) fail("window.start", "must be below T");
  }
  for (std::size_t i = 0; i < c.nu_grid.size(); ++i)
    if (!(c.nu_grid[i] > 0.0 && c.nu_grid[i] <= 1.0)) fail("nu_grid[" + std::to_string(i) + "]", "must lie in (0, 1]");
  for (std::size_t i = 0; i < c.sample_times.size(); ++i) {
    const double t = c.sample_times[i];
    const std::string at = "sample_times[" + std::to_string(i) + "]";
    if (t < 0.0 || t > c.model.T) fail(at, "must lie in [0, T]");
    if (i > 0 && t < c.sample_times[i - 1]) fail(at, "sample times must be sorted");
  }
  if (!(c.effective_step > 0.0)) fail("effective_step", "must be positive");
  if (!(c.budget_seconds > 0.0)) fail("budget_seconds", "must be positive");
  if (c.recipe == Recipe::Resonance) {
    if (c.resonance.modes < 0 || c.resonance.modes > c.m) fail("resonance.modes", "must lie in 0..m");
    if (c.resonance.s_max < 1) fail("resonance.s_max", "must be at least 1");
  }
  if (c.recipe == Recipe::Kweyl) {
    if (c.kweyl.horizons.empty()) fail("kweyl.horizons", "must not be empty");
    for (double T : c.kweyl.horizons)
      if (!(T > 0.0)) fail("kweyl.horizons", "horizons must be positive");
    const std::size_t n = c.kweyl.frequencies.empty() ? static_cast<std::size_t>(c.m) : c.kweyl.frequencies.size();
    if (c.kweyl.harmonic.size() > n) fail("kweyl.harmonic", "has more entries than frequencies");
    if (!c.kweyl.phase.empty() && c.kweyl.phase.size() != n) fail("kweyl.phase", "must match the frequencies");
  }
  if (c.recipe == Recipe::Stationary) {
    check_systems(c.stationary.systems, "stationary.systems", errors);
    if (c.stationary.samples < 2) fail("stationary.samples", "must be at least 2");
    if (c.stationary.window_start >= c.model.T) fail("stationary.window_start", "must be below T");
  }
  if (c.recipe == Recipe::Contraction) {
    if (c.contraction.pairs < 1) fail("contraction.pairs", "must be positive");
    if (!(c.contraction.sample_interval > 0.0)) fail("contraction.sample_interval", "must be positive");
  }
  if (needs_effective(c) && !c.model.linear_damping_substitute && c.model.p > 1 && c.model.gamma_R != 0.0)
    fail("model.p", "effective equations are available for p = 0 and p = 1 only");

  c.echo = config_to_json(c);
  return c;
}

}  // namespace

std::string_view recipe_name(Recipe recipe) {
  for (const auto& [r, name] : kRecipes)
    if (r == recipe) return name;
  return "unknown";
}

std::optional<Recipe> parse_recipe(std::string_view name) {
  for (const auto& [r, n] : kRecipes)
    if (n == name) return r;
  return std::nullopt;
}

ConfigError::ConfigError(std::vector<std::string> errors)
    : ValidationError(join_errors(errors)), errors_(std::move(errors)) {}

std::vector<std::string> validate_config(std::string_view text) {
  std::vector<std::string> errors;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    errors.push_back(std::string("<root>: not valid JSON: ") + e.what());
    return errors;
  }
  parse_document(doc, errors);
  return errors;
}

ExperimentConfig parse_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError({std::string("<root>: not valid JSON: ") + e.what()});
  }
  return parse_config_json(doc);
}

ExperimentConfig parse_config_json(const json& doc) {
  std::vector<std::string> errors;
  ExperimentConfig c = parse_document(doc, errors);
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return c;
}

}  // namespace cgl
