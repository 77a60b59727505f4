#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "cgl/experiments.hpp"

namespace cgl {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("cgl-test-" + tag + "-" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()));
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

json base_doc(const std::string& experiment) {
  return {{"experiment", experiment},
          {"potential", {{"cos", {1.0, 0.5}}}},
          {"basis", {{"m", 4}, {"n_galerkin", 16}}},
          {"model", {{"nu", 0.1}, {"kappa", 0.5}, {"gamma_R", 0.5}, {"gamma_I", 0.5}, {"T", 0.2}}},
          {"ensemble", 100},
          {"seed", 3},
          {"threads", 1}};
}

bool mentions(const std::vector<std::string>& errors, const std::string& needle) {
  for (const auto& e : errors)
    if (e.find(needle) != std::string::npos) return true;
  return false;
}

TEST(Recipes, NamesRoundTrip) {
  for (const char* name : {"spectrum", "resonance", "kweyl", "simulate-full", "simulate-effective",
                           "compare-averaging", "stationary", "cascade", "contraction"}) {
    const auto r = parse_recipe(name);
    ASSERT_TRUE(r.has_value()) << name;
    EXPECT_EQ(recipe_name(*r), name);
  }
  EXPECT_FALSE(parse_recipe("simulate").has_value());
}

TEST(ValidateConfig, GammaConstraint) {
  auto doc = base_doc("simulate-full");
  doc["model"]["gamma_R"] = 0.3;
  doc["model"]["gamma_I"] = 0.7;
  EXPECT_TRUE(validate_config(doc.dump()).empty());
  doc["model"]["gamma_I"] = 0.3;
  const auto errors = validate_config(doc.dump());
  ASSERT_FALSE(errors.empty());
  EXPECT_TRUE(mentions(errors, "model"));
  EXPECT_TRUE(mentions(errors, "gamma"));
}

TEST(ValidateConfig, NonViscousRegimeNeedsLinearDamping) {
  auto doc = base_doc("simulate-full");
  doc["model"]["kappa"] = 0.0;
  EXPECT_FALSE(validate_config(doc.dump()).empty());
  doc["model"]["p"] = 0;
  EXPECT_TRUE(validate_config(doc.dump()).empty());
}

TEST(ValidateConfig, ReportsEveryViolationWithItsPath) {
  auto doc = base_doc("compare-averaging");
  doc["basis"]["colour"] = "red";
  doc["ensemble"] = "many";
  doc["model"]["scheme"] = "rk4";
  const auto errors = validate_config(doc.dump());
  EXPECT_TRUE(mentions(errors, "basis.colour"));
  EXPECT_TRUE(mentions(errors, "ensemble"));
  EXPECT_TRUE(mentions(errors, "model.scheme"));
  EXPECT_EQ(errors.size(), 3u);
  try {
    parse_config(doc.dump());
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.errors(), errors);
  }
}

TEST(ValidateConfig, CrossFieldChecksOnWellTypedInput) {
  auto doc = base_doc("compare-averaging");
  doc["basis"]["n_galerkin"] = 8;
  doc["model"]["nu"] = 2.0;
  const auto errors = validate_config(doc.dump());
  EXPECT_TRUE(mentions(errors, "basis.n_galerkin"));
  EXPECT_TRUE(mentions(errors, "nu_grid"));
  EXPECT_GE(errors.size(), 2u);
}

TEST(ValidateConfig, MalformedJsonAndUnknownExperiment) {
  EXPECT_FALSE(validate_config("{ not json").empty());
  EXPECT_FALSE(validate_config(R"({"experiment": "warp"})").empty());
  EXPECT_FALSE(validate_config("[1, 2]").empty());
}

TEST(ParseConfig, DefaultsAndEcho) {
  const auto c = parse_config(std::string(R"({"experiment": "spectrum"})"));
  EXPECT_EQ(c.recipe, Recipe::Spectrum);
  EXPECT_EQ(c.m, 6);
  EXPECT_EQ(c.n_galerkin, 32);
  EXPECT_EQ(c.model.noise.b.size(), 32u);
  for (const char* key : {"potential", "basis", "model", "initial", "ensemble", "seed", "nu_grid", "sample_times",
                          "output", "threads", "budget_seconds", "effective_step", "bootstrap", "resonance", "kweyl",
                          "window", "stationary", "cascade", "contraction"})
    EXPECT_TRUE(c.echo.contains(key)) << key;
  // The echo is itself a valid config describing the same run.
  const auto again = parse_config_json(c.echo);
  EXPECT_EQ(again.echo, c.echo);
}

TEST(Budget, EstimateScalesAndRefuses) {
  auto doc = base_doc("simulate-full");
  auto c = parse_config_json(doc);
  const double one = estimate_cost_seconds(c);
  EXPECT_GT(one, 0.0);
  c.ensemble *= 10;
  EXPECT_NEAR(estimate_cost_seconds(c), 10.0 * one, 1e-9 * one);
  c.model.scheme = Scheme::Heun;
  EXPECT_GT(estimate_cost_seconds(c), 10.0 * one);
  c.budget_seconds = 0.5 * estimate_cost_seconds(c);
  try {
    check_budget(c);
    FAIL() << "expected BudgetError";
  } catch (const BudgetError& e) {
    EXPECT_DOUBLE_EQ(e.estimate(), estimate_cost_seconds(c));
  }
  EXPECT_EQ(estimate_cost_seconds(parse_config_json(base_doc("spectrum"))), 0.0);
}

TEST(Sha256, KnownVectors) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Run, SpectrumOfFreeOperatorWithCompleteManifest) {
  TempDir dir("spectrum");
  json doc = {{"experiment", "spectrum"}, {"potential", {{"cos", {0.0}}}}, {"output", dir.path.string()}};
  const auto manifest = run(parse_config_json(doc));
  const auto basis = json::parse(slurp(dir.path / "basis.json"));
  for (int k = 0; k < 6; ++k) EXPECT_NEAR(basis["lambda"][k].get<double>(), (k + 1.0) * (k + 1.0), 1e-10);

  std::set<std::string> listed;
  for (const auto& f : manifest.files) {
    listed.insert(f.name);
    const auto content = slurp(dir.path / f.name);
    EXPECT_EQ(content.size(), f.bytes);
    EXPECT_EQ(sha256_hex(content), f.sha256) << f.name;
  }
  std::set<std::string> on_disk;
  for (const auto& e : fs::directory_iterator(dir.path)) on_disk.insert(e.path().filename().string());
  listed.insert("manifest.json");
  EXPECT_EQ(listed, on_disk);
  const auto m = json::parse(slurp(dir.path / "manifest.json"));
  EXPECT_EQ(m["config"], manifest.config);
  EXPECT_TRUE(m.contains("version"));
  EXPECT_TRUE(m.contains("wall_seconds"));
}

TEST(Run, DeterministicRecipesAreBitExact) {
  for (const char* recipe : {"spectrum", "resonance", "kweyl"}) {
    TempDir a(std::string(recipe) + "-a"), b(std::string(recipe) + "-b");
    auto doc = base_doc(recipe);
    doc["output"] = a.path.string();
    const auto ma = run(parse_config_json(doc));
    doc["output"] = b.path.string();
    const auto mb = run(parse_config_json(doc));
    ASSERT_EQ(ma.files.size(), mb.files.size());
    for (std::size_t i = 0; i < ma.files.size(); ++i) EXPECT_EQ(ma.files[i].sha256, mb.files[i].sha256) << recipe;
  }
}

TEST(Run, StochasticRecipeReproducesAcrossThreadCounts) {
  TempDir a("sim-a"), b("sim-b");
  auto doc = base_doc("simulate-full");
  doc["model"]["scheme"] = "heun";
  doc["output"] = a.path.string();
  run(parse_config_json(doc));
  doc["output"] = b.path.string();
  doc["threads"] = 3;
  run(parse_config_json(doc));
  EXPECT_EQ(slurp(a.path / "summary.json"), slurp(b.path / "summary.json"));
  EXPECT_EQ(slurp(a.path / "trajectories.csv"), slurp(b.path / "trajectories.csv"));
  const auto header = slurp(a.path / "trajectories.csv").substr(0, 40);
  EXPECT_EQ(header.rfind("trajectory,tau,k,re_v,im_v,I,phi,system", 0), 0u);
}

TEST(Run, RefusesOverBudgetUnlessForced) {
  TempDir dir("budget");
  auto doc = base_doc("simulate-effective");
  doc["budget_seconds"] = 1e-9;
  doc["output"] = dir.path.string();
  const auto c = parse_config_json(doc);
  EXPECT_THROW(run(c), BudgetError);
  EXPECT_FALSE(fs::exists(dir.path / "manifest.json"));
  EXPECT_NO_THROW(run(c, true));
}

TEST(Kweyl, EnvelopeDecaysLikeInverseHorizon) {
  auto c = parse_config_json(base_doc("kweyl"));
  const auto basis = build_basis(c.potential, c.m, c.n_galerkin);
  const auto t = run_kweyl(c, basis);
  EXPECT_NEAR(t.envelope_slope, -1.0, 0.1);
  for (const auto& r : t.rows) {
    EXPECT_LE(r.deviation, r.bound + 1e-15);
    EXPECT_LE(r.envelope, r.bound + 1e-15);
    EXPECT_GE(r.envelope, r.deviation);
  }
  EXPECT_EQ(t.harmonic.size(), 4u);
}

TEST(Kweyl, LogLogSlopeOfPowerLaw) {
  const std::vector<double> x{1.0, 10.0, 100.0}, y{3.0, 0.3, 0.03};
  EXPECT_NEAR(loglog_slope(x, y), -1.0, 1e-12);
  EXPECT_THROW(loglog_slope(std::vector<double>{1.0}, std::vector<double>{1.0}), ValidationError);
}

TEST(Seeds, StreamsAndWindowTimes) {
  std::set<std::uint64_t> seen;
  for (auto s : {Stream::Full, Stream::Effective, Stream::Window, Stream::Bootstrap, Stream::Oracle})
    seen.insert(stream_seed(1, s));
  EXPECT_EQ(seen.size(), 5u);
  const auto t = window_times(12, 1.0, 2.0, 50);
  EXPECT_EQ(t, window_times(12, 1.0, 2.0, 50));
  EXPECT_TRUE(std::is_sorted(t.begin(), t.end()));
  EXPECT_GE(t.front(), 1.0);
  EXPECT_LE(t.back(), 2.0);
}

TEST(Prepare, CascadeForcingProfile) {
  auto doc = base_doc("cascade");
  doc["cascade"] = {{"forced_mode", 2}, {"amplitude", 0.2}, {"background", 1e-3}};
  const auto s = prepare(parse_config_json(doc));
  ASSERT_EQ(s.model.noise.b.size(), 16u);
  EXPECT_EQ(s.model.noise.b[1], 0.2);
  EXPECT_EQ(s.model.noise.b[0], 1e-3);
  EXPECT_EQ(s.model.noise.b[15], 1e-3);
}

TEST(CompareAveraging, SmallRunProducesOrderedTable) {
  auto doc = base_doc("compare-averaging");
  doc["nu_grid"] = {0.05, 0.1};
  doc["bootstrap"] = 20;
  doc["initial"] = {{"re", {1.0, 0.5, 0.0, 0.0}}, {"im", {0.0, 0.0, 0.0, 0.0}}};
  const auto c = parse_config_json(doc);
  const auto s = prepare(c);
  const auto r = run_compare_averaging(c, s);
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_GT(r.rows[0].nu, r.rows[1].nu);
  EXPECT_EQ(r.monotone.size(), 4u);
  EXPECT_NEAR(r.window_start, 0.1, 1e-15);
  for (const auto& row : r.rows) {
    EXPECT_EQ(row.distance.size(), 4u);
    EXPECT_EQ(row.window_angles.front().n, 200u);
    EXPECT_EQ(row.blowups, 0u);
  }
}

TEST(Contraction, PairsDoNotSeparate) {
  auto doc = base_doc("contraction");
  doc["model"]["T"] = 1.0;
  doc["contraction"] = {{"pairs", 5}, {"sample_interval", 0.1}};
  doc["initial"] = {{"re", {1.0, 1.0, 1.0, 1.0}}, {"im", {0.0, 0.0, 0.0, 0.0}}};
  const auto c = parse_config_json(doc);
  const auto r = run_contraction(c, prepare(c));
  EXPECT_EQ(r.times.size(), 11u);
  EXPECT_LE(r.worst_increase_per_step, 1e-10);
  EXPECT_LT(r.max_final_ratio, 1.0);
  EXPECT_EQ(r.blowups, 0u);
}

}  // namespace
}  // namespace cgl
