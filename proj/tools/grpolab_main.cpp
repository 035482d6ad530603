#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "grpolab/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"grpolab: group-relative policy gradient laboratory"};
  app.require_subcommand(1);

  std::string spec_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out_dir;
  int workers = 0;
  std::string format = "both";

  auto* run = app.add_subcommand("run", "execute an experiment spec");
  run->add_option("--spec", spec_path, "experiment spec JSON")->required();
  run->add_option("--seed", seed, "override the spec seed")->each([&](const std::string&) {
    seed_set = true;
  });
  run->add_option("--out", out_dir, "output directory root");
  run->add_option("--workers", workers, "worker pool size (0: OpenMP default)");
  run->add_option("--format", format, "result format: csv, json, both")
      ->check(CLI::IsMember({"csv", "json", "both"}));

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "list schema violations without running");
  validate->add_option("--spec", validate_path, "experiment spec JSON")->required();

  CLI11_PARSE(app, argc, argv);

  if (validate->parsed()) {
    const auto diags = grpolab::validate_experiment(validate_path);
    for (const auto& d : diags) std::cout << d << '\n';
    if (diags.empty()) std::cout << "spec is valid\n";
    return diags.empty() ? 0 : 2;
  }

  grpolab::RunOverrides overrides;
  if (seed_set) overrides.seed = seed;
  if (!out_dir.empty()) overrides.out_dir = out_dir;
  if (workers > 0) overrides.workers = workers;
  overrides.format = format;

  const grpolab::RunOutcome outcome = grpolab::run_experiment(spec_path, overrides);
  if (outcome.exit_code == 0) {
    std::cout << "results written to " << outcome.out_dir << '\n';
  } else {
    std::cerr << outcome.error_json << '\n';
  }
  return outcome.exit_code;
}
