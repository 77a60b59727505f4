// cgl-lab: runs one experiment recipe from a JSON config.
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "cgl/experiments.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw cgl::ValidationError("cannot open config " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Experiments for the stochastic CGL equation near the Hamiltonian limit"};
  std::string recipe, config_path, out_dir;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  bool force = false, estimate_only = false;
  app.add_option("recipe", recipe,
                 "spectrum | resonance | kweyl | simulate-full | simulate-effective | compare-averaging | "
                 "stationary | cascade | contraction")
      ->required();
  app.add_option("--config", config_path, "JSON experiment config")->required();
  auto* out_opt = app.add_option("--out", out_dir, "output directory (overrides config.output)");
  auto* seed_opt = app.add_option("--seed", seed, "base seed (overrides config.seed)");
  auto* threads_opt = app.add_option("--threads", threads, "worker threads, 0 for all cores");
  app.add_flag("--force", force, "run even when the cost estimate exceeds budget_seconds");
  app.add_flag("--estimate", estimate_only, "print the cost estimate and exit");
  CLI11_PARSE(app, argc, argv);

  try {
    const auto requested = cgl::parse_recipe(recipe);
    if (!requested) throw cgl::ValidationError("unknown recipe '" + recipe + "'");
    cgl::ExperimentConfig config = cgl::parse_config(read_file(config_path));
    if (config.recipe != *requested)
      throw cgl::ValidationError("config experiment is '" + std::string(cgl::recipe_name(config.recipe)) +
                                 "' but recipe '" + recipe + "' was requested");
    if (*out_opt) {
      config.output_dir = out_dir;
      config.echo["output"] = out_dir;
    }
    if (*seed_opt) {
      config.base_seed = seed;
      config.echo["seed"] = seed;
    }
    if (*threads_opt) {
      config.threads = threads;
      config.echo["threads"] = threads;
    }

    if (estimate_only) {
      std::cout << "estimated cost: " << cgl::estimate_cost_seconds(config) << " CPU-seconds (budget "
                << config.budget_seconds << ")\n";
      return 0;
    }
    const auto manifest = cgl::run(config, force);
    std::cout << "wrote " << manifest.files.size() + 1 << " files to " << config.output_dir << " in "
              << manifest.wall_seconds << " s\n";
    return 0;
  } catch (const cgl::ConfigError& e) {
    std::cerr << "invalid config:\n";
    for (const auto& err : e.errors()) std::cerr << "  " << err << "\n";
    return 2;
  } catch (const cgl::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const cgl::BudgetError& e) {
    std::cerr << "refused: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
