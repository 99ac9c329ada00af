// Copyright 2026 The trainflow Authors
// SPDX-License-Identifier: Apache-2.0

// trainflow <subcommand> --config <path> [--out <dir>] [--seed <u64>] [--svg]
//
// Exit codes: 0 success, 2 configuration error, 3 numerical error.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "trainflow/bench.hpp"
#include "trainflow/errors.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kNumericalError = 3;

}  // namespace

int main(int argc, char** argv) {
  using namespace trainflow;

  CLI::App app{"Training-dynamics experiments for learned linear simulators"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(bench::kVersion));

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  bool svg = false;

  for (const char* name : {"spectrum", "convergence", "noise-bias", "remedies", "rollout"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON experiment config")->required();
    sub->add_option("--out", out_dir, "Output directory (overrides output_dir)");
    sub->add_option("--seed", seed, "Base seed (overrides base_seed)");
    sub->add_flag("--svg", svg, "Also write SVG figures");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  const std::string subcommand = app.get_subcommands().front()->get_name();
  try {
    bench::ExperimentConfig config = bench::load_config(config_path);
    if (config.experiment != bench::parse_experiment(subcommand)) {
      throw ConfigError("config experiment '" + std::string(bench::to_string(config.experiment)) +
                        "' does not match subcommand '" + subcommand + "'");
    }
    if (!out_dir.empty()) config.output_dir = out_dir;
    if (seed) config.base_seed = *seed;
    if (svg) config.emit_svg = true;

    const bench::RunArtifacts artifacts = bench::run_experiment(config);
    std::cout << "metadata " << artifacts.metadata_path.string() << '\n';
    for (const auto& p : artifacts.csv_paths) std::cout << "csv " << p.string() << '\n';
    for (const auto& p : artifacts.svg_paths) std::cout << "svg " << p.string() << '\n';
    return 0;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumericalError;
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  }
}
