// Copyright 2026 The trainflow Authors
// SPDX-License-Identifier: Apache-2.0

// Experiment runners with CSV / JSON / SVG outputs, and rollout diagnostics.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "trainflow/initgen.hpp"
#include "trainflow/matcore.hpp"

namespace trainflow::bench {

inline constexpr std::string_view kVersion = "0.1.0";

enum class Experiment { spectrum, convergence, noise_bias, remedies, rollout };

std::string_view to_string(Experiment e);
/// Accepts both "noise_bias" and the CLI spelling "noise-bias".
Experiment parse_experiment(std::string_view name);

/// Mirrors the JSON config file field for field.  `n` accepts a single
/// integer or a list (spectrum sweeps several sizes).
struct ExperimentConfig {
  Experiment experiment = Experiment::spectrum;
  std::vector<int> n;
  int r = 0;
  int m = 0;
  std::optional<double> dt;
  double sigma = 0.0;
  int trials = 0;  // 0 selects the experiment's default
  std::uint64_t base_seed = 0;
  std::vector<initgen::InitKind> schemes;
  std::vector<double> tau_grid;
  std::filesystem::path output_dir = "out";
  bool emit_svg = false;

  // Optional extras.
  std::vector<double> sigma_grid;  // noise_bias sweep; default derived from sigma
  int rollout_steps = 500;
  double rollout_bound = 1e3;

  /// Fills experiment-specific defaults and checks consistency.  Throws
  /// ConfigError.
  void validate();

  int single_n() const { return n.front(); }
};

/// Parses and validates.  Unknown fields are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& config);

struct RunArtifacts {
  std::vector<std::filesystem::path> csv_paths;
  std::vector<std::filesystem::path> svg_paths;
  std::filesystem::path metadata_path;
};

RunArtifacts exp_spectrum(const ExperimentConfig& config);
RunArtifacts exp_convergence(const ExperimentConfig& config);
RunArtifacts exp_noise_bias(const ExperimentConfig& config);
RunArtifacts exp_remedies(const ExperimentConfig& config);
RunArtifacts exp_rollout(const ExperimentConfig& config);

/// Dispatches on config.experiment.
RunArtifacts run_experiment(const ExperimentConfig& config);

enum class RolloutMode { discrete, continuous_euler };

struct RolloutStep {
  long step = 0;
  double norm = 0.0;
  Vec state;
};

struct RolloutResult {
  std::vector<RolloutStep> trajectory;  // step 0 is x0
  bool diverged = false;
  long diverged_step = -1;
};

/// Iterates x <- Ahat x (discrete) or x <- (I + Ahat dt) x and flags
/// divergence once ||x|| > bound ||x0||; iteration stops at that step.
RolloutResult rollout(const Mat& ahat, const Vec& x0, long steps, RolloutMode mode,
                      std::optional<double> dt, double bound);

/// |lambda| < 1 - 1e-9 for every eigenvalue.
bool is_stable_discrete(const ComplexList& eigenvalues);
/// Re lambda < -1e-9 for every eigenvalue.
bool is_stable_continuous(const ComplexList& eigenvalues);
/// Inside the forward-Euler stability region: |1 + lambda dt| < 1.
bool is_stable_euler(const ComplexList& eigenvalues, double dt);

/// Largest |a_i - b_pi(i)| under the assignment pi minimizing that value
/// (exhaustive up to 8 eigenvalues, greedy beyond).  Lists must have equal
/// length.
double max_matched_distance(const ComplexList& a, const ComplexList& b);

/// Reorders `current` so that entry i is the one assigned to `previous[i]`.
ComplexList track_eigenvalues(const ComplexList& previous, const ComplexList& current);

}  // namespace trainflow::bench
