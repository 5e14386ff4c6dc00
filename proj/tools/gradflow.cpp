#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "gradflow/config.hpp"
#include "gradflow/experiment.hpp"

namespace {

int report_errors(const gradflow::ConfigReport& report) {
  for (const auto& e : report.errors) std::cerr << "error: " << e << "\n";
  return gradflow::kExitConfigError;
}

int cmd_validate(const std::string& path) {
  const auto report = gradflow::validate_config_file(path);
  if (!report.ok()) return report_errors(report);
  std::cout << "ok\n";
  return gradflow::kExitOk;
}

int cmd_run(const std::string& path, const std::optional<std::string>& out, const std::optional<std::uint64_t>& seed) {
  auto report = gradflow::validate_config_file(path);
  if (!report.ok()) return report_errors(report);
  auto cfg = *report.config;
  if (seed) cfg.seed = *seed;
  const std::optional<std::string> dir = out ? out : cfg.output_dir;
  if (!dir) {
    std::cerr << "error: output_dir: missing (set it in the config or pass --out)\n";
    return gradflow::kExitConfigError;
  }
  const auto outcome = gradflow::run_experiment(cfg, *dir);
  if (outcome.status == gradflow::kExitRuntimeError) std::cerr << "error: " << outcome.error << "\n";
  for (const auto& inv : outcome.summary["invariants"])
    std::cout << (inv["passed"].get<bool>() ? "PASS " : "FAIL ") << inv["name"].get<std::string>() << "\n";
  std::cout << cfg.experiment << ": " << outcome.summary["status"].get<std::string>() << " (" << *dir << ")\n";
  return outcome.status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient-flow experiment runner"};
  app.require_subcommand(1);

  std::string run_config;
  std::optional<std::string> run_out;
  std::optional<std::uint64_t> run_seed;
  auto* run = app.add_subcommand("run", "Run one experiment");
  run->add_option("--config", run_config, "Experiment config (JSON)")->required();
  run->add_option("--out", run_out, "Output directory (overrides output_dir)");
  run->add_option("--seed", run_seed, "Seed (overrides seed)");

  std::string validate_config;
  auto* validate = app.add_subcommand("validate", "Check a config without running it");
  validate->add_option("--config", validate_config, "Experiment config (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : gradflow::kExitConfigError;
  }
  if (*run) return cmd_run(run_config, run_out, run_seed);
  return cmd_validate(validate_config);
}
