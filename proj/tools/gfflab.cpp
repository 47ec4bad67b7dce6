#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "gfflab/experiments.hpp"
#include "gfflab/gff.hpp"

using namespace gfflab;

namespace {

int run_experiment(const std::string &name, const std::string &config_path, const std::optional<std::uint64_t> &seed,
                   const std::optional<std::string> &out_dir, bool audit) {
  auto config = ExperimentConfig::load(config_path);
  if (to_string(config.experiment) != name)
    throw std::invalid_argument("config describes experiment '" + to_string(config.experiment) + "', not '" + name + "'");
  if (seed) config.seed = *seed;
  if (out_dir) config.out = *out_dir;
  RunOptions opt;
  opt.audit = audit;
  const auto result = run(config, opt);
  std::filesystem::create_directories(config.out);
  const auto base = std::filesystem::path(config.out) / name;
  {
    std::ofstream csv(base.string() + ".csv", std::ios::binary);
    write_csv(csv, result.records);
  }
  {
    std::ofstream js(base.string() + ".json", std::ios::binary);
    js << summary_json(result).dump(2) << '\n';
  }
  write_csv(std::cout, result.records);
  if (result.fit)
    std::cout << "fit: slope " << format_double(result.fit->slope) << " +- " << format_double(result.fit->slope_se) << '\n';
  if (result.audit.performed)
    std::cout << "audit (padding " << result.audit.padding << "): delta " << format_double(result.audit.delta) << '\n';
  else if (!result.audit.note.empty())
    std::cout << "audit " << result.audit.note << '\n';
  for (double t : result.truncated) std::cout << "truncated by memory ceiling: " << format_double(t) << '\n';
  std::cout << "wrote " << base.string() << ".csv and .json\n";
  return 0;
}

int run_validate(std::uint64_t seed, const std::optional<std::string> &out_dir, bool mutate) {
  ValidationOptions opt;
  opt.corrupt_bridge = mutate;
  const auto report = validate(seed, opt);
  const std::string text = report.to_json().dump(2) + "\n";
  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    std::ofstream(std::filesystem::path(*out_dir) / "validate.json", std::ios::binary) << text;
  }
  std::cout << text;
  return report.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Level-set percolation of the metric-graph Gaussian free field: experiments and validation"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  bool no_audit = false;
  std::string chosen;
  for (const char *name : {"onearm", "twopoint", "volume_tail", "boundary_moment", "ghost", "capacity_scaling",
                           "crossing_measure", "isomorphism", "max_cluster"}) {
    auto *sub = app.add_subcommand(name, std::string("run the ") + name + " experiment");
    sub->add_option("--config", config_path, "JSON config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "override the master seed");
    sub->add_option("--out", out_dir, "override the output directory");
    sub->add_flag("--no-audit", no_audit, "skip the doubled-padding audit run");
    sub->callback([&chosen, name] { chosen = name; });
  }
  std::uint64_t validate_seed = 1;
  bool mutate = false;
  auto *val = app.add_subcommand("validate", "run the cross-oracle validation suite");
  val->add_option("--seed", validate_seed, "master seed");
  val->add_option("--out", out_dir, "also write validate.json here");
  val->add_flag("--mutate-bridge", mutate, "mutation hook: corrupt the bridge variance constant");
  val->callback([&chosen] { chosen = "validate"; });

  CLI11_PARSE(app, argc, argv);
  try {
    if (chosen == "validate") return run_validate(validate_seed, out_dir, mutate);
    return run_experiment(chosen, config_path, seed, out_dir, !no_audit);
  } catch (const MemoryBudgetExceeded &e) {
    std::cerr << "gfflab: infeasible: " << e.what() << '\n';
    return 3;
  } catch (const std::exception &e) {
    std::cerr << "gfflab: " << e.what() << '\n';
    return 2;
  }
}
