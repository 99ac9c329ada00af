// Copyright 2026 The trainflow Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <fstream>
#include <set>

#include <fmt/format.h>

#include "trainflow/bench.hpp"
#include "trainflow/errors.hpp"

namespace trainflow::bench {

using nlohmann::json;

std::string_view to_string(Experiment e) {
  switch (e) {
    case Experiment::spectrum: return "spectrum";
    case Experiment::convergence: return "convergence";
    case Experiment::noise_bias: return "noise_bias";
    case Experiment::remedies: return "remedies";
    case Experiment::rollout: return "rollout";
  }
  return "unknown";
}

Experiment parse_experiment(std::string_view name) {
  if (name == "noise-bias") return Experiment::noise_bias;
  for (Experiment e : {Experiment::spectrum, Experiment::convergence, Experiment::noise_bias,
                       Experiment::remedies, Experiment::rollout}) {
    if (to_string(e) == name) return e;
  }
  throw ConfigError(fmt::format("unknown experiment '{}'", name));
}

namespace {

void require(bool ok, std::string_view message) {
  if (!ok) throw ConfigError(std::string(message));
}

void default_n(ExperimentConfig& c, std::vector<int> fallback) {
  if (c.n.empty()) c.n = std::move(fallback);
}

void require_single_n(const ExperimentConfig& c) {
  require(c.n.size() == 1, fmt::format("{} takes a single n", to_string(c.experiment)));
}

}  // namespace

void ExperimentConfig::validate() {
  require(sigma >= 0.0, "sigma must be >= 0");
  require(!dt || *dt > 0.0, "dt must be positive when given");
  require(trials >= 0, "trials must be >= 0");
  for (double t : tau_grid) require(t >= 0.0 && std::isfinite(t), "tau_grid entries must be finite and >= 0");
  for (double s : sigma_grid) require(s >= 0.0, "sigma_grid entries must be >= 0");
  require(rollout_steps >= 1, "rollout_steps must be >= 1");
  require(rollout_bound > 0.0, "rollout_bound must be > 0");

  switch (experiment) {
    case Experiment::spectrum:
      default_n(*this, {8, 16, 64, 100, 256});
      if (schemes.empty()) schemes = {initgen::InitKind::glorot_normal};
      for (int size : n) {
        for (initgen::InitKind k : schemes) initgen::InitScheme{k, size}.validate();
      }
      break;
    case Experiment::convergence:
      default_n(*this, {3});
      require_single_n(*this);
      if (r == 0) r = 2;
      if (m == 0) m = 64;
      break;
    case Experiment::noise_bias:
      default_n(*this, {4});
      require_single_n(*this);
      if (r == 0) r = 3;
      if (m == 0) m = 200;
      if (trials == 0) trials = 2000;
      if (sigma == 0.0) sigma = 0.1;
      require(trials >= 100, "noise_bias needs trials >= 100");
      require(m >= single_n(), "noise_bias needs m >= n");
      break;
    case Experiment::remedies:
      default_n(*this, {6});
      require_single_n(*this);
      if (r == 0) r = 3;
      if (m == 0) m = 64;
      if (trials == 0) trials = 200;
      if (sigma == 0.0) sigma = 0.1;
      require(r < single_n(), "remedies needs r < n");
      break;
    case Experiment::rollout:
      default_n(*this, {6});
      require_single_n(*this);
      if (r == 0) r = 3;
      if (m == 0) m = 64;
      if (trials == 0) trials = 20;
      if (schemes.empty()) {
        schemes = {initgen::InitKind::glorot_normal, initgen::InitKind::gershgorin_discrete};
      }
      break;
  }
  if (experiment != Experiment::spectrum) {
    const int size = single_n();
    require(size >= 1, "n must be >= 1");
    require(r >= 1 && r <= size, fmt::format("need 1 <= r <= n, got r={}, n={}", r, size));
    require(m >= r, "m must be >= r");
    for (initgen::InitKind k : schemes) initgen::InitScheme{k, size}.validate();
  }
  for (int size : n) require(size >= 1, "n must be >= 1");
}

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> known = {
      "experiment", "n",          "r",        "m",          "dt",
      "sigma",      "trials",     "base_seed", "schemes",   "tau_grid",
      "output_dir", "emit_svg",   "sigma_grid", "rollout_steps", "rollout_bound"};
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError(fmt::format("unknown config field '{}'", key));
  }

  ExperimentConfig c;
  try {
    if (!j.contains("experiment")) throw ConfigError("config needs an 'experiment' field");
    c.experiment = parse_experiment(j.at("experiment").get<std::string>());
    if (j.contains("n")) {
      const json& n = j.at("n");
      if (n.is_array()) {
        c.n = n.get<std::vector<int>>();
      } else {
        c.n = {n.get<int>()};
      }
    }
    if (j.contains("r")) c.r = j.at("r").get<int>();
    if (j.contains("m")) c.m = j.at("m").get<int>();
    if (j.contains("dt") && !j.at("dt").is_null()) c.dt = j.at("dt").get<double>();
    if (j.contains("sigma")) c.sigma = j.at("sigma").get<double>();
    if (j.contains("trials")) c.trials = j.at("trials").get<int>();
    if (j.contains("base_seed")) c.base_seed = j.at("base_seed").get<std::uint64_t>();
    if (j.contains("schemes")) {
      for (const auto& s : j.at("schemes")) {
        c.schemes.push_back(initgen::parse_init_kind(s.get<std::string>()));
      }
    }
    if (j.contains("tau_grid")) c.tau_grid = j.at("tau_grid").get<std::vector<double>>();
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("emit_svg")) c.emit_svg = j.at("emit_svg").get<bool>();
    if (j.contains("sigma_grid")) c.sigma_grid = j.at("sigma_grid").get<std::vector<double>>();
    if (j.contains("rollout_steps")) c.rollout_steps = j.at("rollout_steps").get<int>();
    if (j.contains("rollout_bound")) c.rollout_bound = j.at("rollout_bound").get<double>();
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("bad config value: {}", e.what()));
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config '{}'", path.string()));
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("config '{}' is not valid JSON: {}", path.string(), e.what()));
  }
  return config_from_json(j);
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["experiment"] = to_string(c.experiment);
  if (c.n.size() == 1) {
    j["n"] = c.n.front();
  } else {
    j["n"] = c.n;
  }
  j["r"] = c.r;
  j["m"] = c.m;
  j["dt"] = c.dt ? json(*c.dt) : json(nullptr);
  j["sigma"] = c.sigma;
  j["trials"] = c.trials;
  j["base_seed"] = c.base_seed;
  j["schemes"] = json::array();
  for (auto k : c.schemes) j["schemes"].push_back(std::string(initgen::to_string(k)));
  j["tau_grid"] = c.tau_grid;
  j["output_dir"] = c.output_dir.string();
  j["emit_svg"] = c.emit_svg;
  j["sigma_grid"] = c.sigma_grid;
  j["rollout_steps"] = c.rollout_steps;
  j["rollout_bound"] = c.rollout_bound;
  return j;
}

}  // namespace trainflow::bench
