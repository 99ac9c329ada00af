// Copyright 2026 The trainflow Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "output.hpp"
#include "trainflow/bench.hpp"
#include "trainflow/errors.hpp"
#include "trainflow/flowlab.hpp"
#include "trainflow/parallel.hpp"
#include "trainflow/rng.hpp"
#include "trainflow/sysgen.hpp"

namespace trainflow::bench {

namespace {

using detail::CsvWriter;
using flowlab::PseudoTime;
using sysgen::BasisPair;
using sysgen::SnapshotData;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// A true system in block form together with clean snapshot data confined
/// to its invariant subspace.
struct Problem {
  Mat a;
  Mat atilde;  // U^T A U
  BasisPair basis;
  SnapshotData data;
  Vec singular_values;  // length r
  std::optional<double> dt;

  int n() const { return static_cast<int>(a.rows()); }
  int r() const { return basis.r; }
  /// The one-step map that generated the data.
  Mat step() const {
    return dt ? Mat(Mat::Identity(n(), n()) + a * *dt) : a;
  }
};

ComplexList linspace_real(double from, double to, int count) {
  ComplexList out;
  for (int i = 0; i < count; ++i) {
    const double t = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    out.emplace_back(from + (to - from) * t, 0.0);
  }
  return out;
}

/// Stable true dynamics: real learnable eigenvalues and a strongly stable
/// complement, chosen per time model.
sysgen::BlockSpec default_block_spec(int n, int r, bool continuous) {
  sysgen::BlockSpec spec;
  spec.n = n;
  spec.r = r;
  spec.coupling_scale = 0.5;
  if (continuous) {
    spec.learnable_eigenvalues = linspace_real(-0.5, -2.0, r);
    spec.complement_eigenvalues = ComplexList(static_cast<std::size_t>(n - r), Complex(-3.0, 0.0));
  } else {
    spec.learnable_eigenvalues = linspace_real(0.9, 0.5, r);
    spec.complement_eigenvalues = ComplexList(static_cast<std::size_t>(n - r), Complex(0.3, 0.0));
  }
  return spec;
}

Problem make_problem(const sysgen::BlockSpec& spec, const Vec& singular_values, int m,
                     std::optional<double> dt, std::uint64_t seed) {
  Problem p;
  const sysgen::BlockSystem system = sysgen::build_block_system(spec, sub_seed(seed, 0));
  p.a = system.a;
  p.basis = system.basis;
  p.atilde = sysgen::to_svd_basis(p.a, p.basis);
  p.dt = dt;
  p.singular_values = singular_values;
  p.data = sysgen::snapshots_with_spectrum(p.step(), p.basis, singular_values, m,
                                           sub_seed(seed, 1));
  p.data.dt = dt;
  return p;
}

/// sqrt(m) * 10^(-decades * i / (r - 1)).
Vec geometric_singular_values(int r, int m, double decades) {
  Vec s(r);
  for (int i = 0; i < r; ++i) {
    const double t = r == 1 ? 0.0 : static_cast<double>(i) / (r - 1);
    s(i) = std::sqrt(static_cast<double>(m)) * std::pow(10.0, -decades * t);
  }
  return s;
}

Mat clean_limit(const Mat& ahat0, const Problem& p) {
  return p.dt ? flowlab::flow_closed_continuous(ahat0, p.a, p.data.x, *p.dt, PseudoTime::infinity())
              : flowlab::flow_closed_discrete(ahat0, p.a, p.data.x, PseudoTime::infinity());
}

bool stable(const ComplexList& eigs, std::optional<double> dt) {
  return dt ? is_stable_continuous(eigs) && is_stable_euler(eigs, *dt) : is_stable_discrete(eigs);
}

double max_real_part(const ComplexList& eigs) {
  double v = -std::numeric_limits<double>::infinity();
  for (const Complex& z : eigs) v = std::max(v, z.real());
  return v;
}

double radius(const ComplexList& eigs) {
  double v = 0.0;
  for (const Complex& z : eigs) v = std::max(v, std::abs(z));
  return v;
}

Vec random_unit(int n, std::uint64_t seed) {
  Rng rng(seed);
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.normal();
  return v / v.norm();
}

RolloutMode rollout_mode(std::optional<double> dt) {
  return dt ? RolloutMode::continuous_euler : RolloutMode::discrete;
}

// ---------------------------------------------------------------- spectrum

}  // namespace

RunArtifacts exp_spectrum(const ExperimentConfig& config) {
  RunArtifacts artifacts;
  detail::RunRecorder recorder(config, artifacts);
  if (config.schemes.empty()) throw ConfigError("spectrum: schemes must be nonempty");

  CsvWriter summary(recorder.csv("spectrum_summary.csv"),
                    {"scheme", "n", "trials", "base_seed", "phi", "frac_positive_real",
                     "max_abs", "max_real", "out_of_window"});
  for (initgen::InitKind kind : config.schemes) {
    for (int n : config.n) {
      const initgen::InitScheme scheme{kind, n};
      const int trials = config.trials > 0 ? config.trials : initgen::default_trials(n);
      const initgen::SpectrumStats stats =
          initgen::spectrum_stats(scheme, trials, config.base_seed);

      summary.row(initgen::to_string(kind), n, trials, config.base_seed, stats.phi,
                  stats.frac_positive_real, radius(stats.eigenvalues),
                  max_real_part(stats.eigenvalues), stats.histogram.out_of_window);

      const std::string stem = fmt::format("histogram_{}_n{}", initgen::to_string(kind), n);
      CsvWriter hist(recorder.csv(stem + ".csv"), {"bin_re", "bin_im", "count"});
      const auto& g = stats.histogram.grid;
      for (int i = 0; i < g.bins_re; ++i) {
        for (int j = 0; j < g.bins_im; ++j) {
          hist.row(g.re_min + (i + 0.5) * g.re_width(), g.im_min + (j + 0.5) * g.im_width(),
                   stats.histogram.at(i, j));
        }
      }
      if (config.emit_svg) {
        const auto svg = config.output_dir / (stem + ".svg");
        detail::write_histogram_svg(
            svg,
            fmt::format("{} n={} trials={} phi={:.4f}", initgen::to_string(kind), n, trials,
                        stats.phi),
            stats.histogram);
        artifacts.svg_paths.push_back(svg);
      }
    }
  }
  recorder.finish();
  return artifacts;
}

// ------------------------------------------------------------- convergence

RunArtifacts exp_convergence(const ExperimentConfig& config) {
  RunArtifacts artifacts;
  detail::RunRecorder recorder(config, artifacts);
  const int n = config.single_n();
  const int r = config.r;
  const int m = config.m;
  const std::optional<double> dt = config.dt;
  const double dt2 = dt ? *dt * *dt : 1.0;

  const Problem p = make_problem(default_block_spec(n, r, dt.has_value()),
                                 geometric_singular_values(r, m, 1.0), m, dt, config.base_seed);

  // Initialization in the data basis: equal-norm errors in the learnable
  // columns, an unstable block in the zero-energy directions.
  Rng init_rng(sub_seed(config.base_seed, 2));
  Mat init_tilde = p.atilde;
  for (int i = 0; i < r; ++i) {
    Vec d(n);
    for (int k = 0; k < n; ++k) d(k) = init_rng.normal();
    init_tilde.col(i) += 0.5 * d / d.norm();
  }
  const double unstable = dt ? 0.5 : 1.2;
  for (int j = r; j < n; ++j) {
    for (int i = 0; i < n; ++i) init_tilde(i, j) = init_rng.normal() / std::sqrt(double(n));
  }
  init_tilde.bottomRightCorner(n - r, n - r) =
      unstable * Mat::Identity(n - r, n - r);
  const Mat& u = p.basis.u;
  const Mat ahat0 = u * init_tilde * u.transpose();

  const double mn = static_cast<double>(m) * n;
  const double slowest_learnable = dt2 * p.singular_values(r - 1) * p.singular_values(r - 1) / mn;
  double slowest = slowest_learnable;
  if (config.sigma > 0.0) {
    slowest = std::min(slowest, dt2 * flowlab::unlearnable_decay_rate(config.sigma * config.sigma, n));
  }
  std::vector<double> taus = config.tau_grid;
  if (taus.empty()) {
    const double end = 5.0 / slowest;
    for (int k = 0; k <= 50; ++k) taus.push_back(end * k / 50.0);
  }

  sysgen::NoisePair noise{Mat::Zero(n, m), Mat::Zero(n, m)};
  if (config.sigma > 0.0) {
    noise = sysgen::draw_noise(p.data, config.sigma, sub_seed(config.base_seed, 3),
                               sysgen::NoiseStructure::iid);
  }

  struct Run {
    std::string name;
    bool noisy;
  };
  std::vector<Run> runs = {{"clean", false}};
  if (config.sigma > 0.0) runs.push_back({"noisy", true});

  CsvWriter csv(recorder.csv("convergence.csv"),
                {"run", "tau", "direction", "singular_value", "column_error", "diagonal",
                 "eigenvalue_real", "eigenvalue_imag"});
  std::vector<detail::Series> eig_series;
  std::vector<detail::Series> err_series;
  for (const Run& run : runs) {
    auto flow = [&](PseudoTime tau) -> Mat {
      if (!run.noisy) {
        return dt ? flowlab::flow_closed_continuous(ahat0, p.a, p.data.x, *dt, tau)
                  : flowlab::flow_closed_discrete(ahat0, p.a, p.data.x, tau);
      }
      return dt ? flowlab::flow_closed_continuous_noisy(ahat0, p.a, p.data.x, noise.n,
                                                        noise.nsharp, *dt, tau)
                : flowlab::flow_closed_discrete_noisy(ahat0, p.a, p.data.x, noise.n,
                                                      noise.nsharp, tau);
    };
    const Mat limit = sysgen::to_svd_basis(flow(PseudoTime::infinity()), p.basis);

    ComplexList tracked;
    for (int i = 0; i < n; ++i) tracked.emplace_back(init_tilde(i, i), 0.0);
    std::vector<detail::Series> eig_dir(n), err_dir(n);
    for (double tau : taus) {
      const Mat current = sysgen::to_svd_basis(flow(PseudoTime(tau)), p.basis);
      tracked = track_eigenvalues(tracked, matcore::eig(current));
      for (int i = 0; i < n; ++i) {
        const double s = i < r ? p.singular_values(i) : 0.0;
        const double err = (current.col(i) - limit.col(i)).norm();
        csv.row(run.name, tau, i + 1, s, err, current(i, i), tracked[i].real(),
                tracked[i].imag());
        eig_dir[i].xs.push_back(tau);
        eig_dir[i].ys.push_back(tracked[i].real());
        err_dir[i].xs.push_back(tau);
        err_dir[i].ys.push_back(err > 0 ? std::log10(err) : kNaN);
      }
    }
    for (int i = 0; i < n; ++i) {
      eig_dir[i].label = fmt::format("{} dir {}", run.name, i + 1);
      err_dir[i].label = eig_dir[i].label;
      eig_series.push_back(std::move(eig_dir[i]));
      err_series.push_back(std::move(err_dir[i]));
    }
  }
  if (config.emit_svg) {
    auto svg = config.output_dir / "convergence_eigenvalues.svg";
    detail::write_line_plot_svg(svg, "Training dynamics", "tau", "Re(eigenvalue)", eig_series);
    artifacts.svg_paths.push_back(svg);
    svg = config.output_dir / "convergence_errors.svg";
    detail::write_line_plot_svg(svg, "Column error", "tau", "log10 error", err_series);
    artifacts.svg_paths.push_back(svg);
  }
  recorder.finish();
  return artifacts;
}

// -------------------------------------------------------------- noise bias

namespace {

struct ColumnFit {
  double factor;
  double additive;
};

/// Least-squares fit of column i of `learned` as factor * atilde.col(i) +
/// additive * e_i.
ColumnFit fit_column(const Mat& learned, const Mat& atilde, int i) {
  const Vec a = atilde.col(i);
  const Vec c = learned.col(i);
  const double aa = a.squaredNorm();
  const double ai = a(i);
  const double det = aa - ai * ai;
  if (det > 1e-12 * std::max(aa, 1e-300)) {
    const double ac = a.dot(c);
    const double f = (ac - ai * c(i)) / det;
    return {f, c(i) - f * ai};
  }
  // atilde.col(i) is (numerically) parallel to e_i: the diagonal cannot
  // separate factor from offset, so attribute it all to the factor.
  if (aa > 0.0) return {a.dot(c) / aa, 0.0};
  return {0.0, c(i)};
}

}  // namespace

RunArtifacts exp_noise_bias(const ExperimentConfig& config) {
  RunArtifacts artifacts;
  detail::RunRecorder recorder(config, artifacts);
  const int n = config.single_n();
  const int r = config.r;
  const int m = config.m;
  const std::optional<double> dt = config.dt;

  // Singular values chosen so the reference sigma gives SNR from 10 down to
  // 0.1 across the learnable directions.
  Vec s(r);
  for (int i = 0; i < r; ++i) {
    const double t = r == 1 ? 0.0 : static_cast<double>(i) / (r - 1);
    const double snr = std::pow(10.0, 1.0 - 2.0 * t);
    s(i) = std::sqrt(m * config.sigma * config.sigma * snr);
  }
  const Problem p =
      make_problem(default_block_spec(n, r, dt.has_value()), s, m, dt, config.base_seed);

  std::vector<double> sigmas = config.sigma_grid;
  if (sigmas.empty()) {
    sigmas = {0.0, config.sigma / std::sqrt(10.0), config.sigma, config.sigma * std::sqrt(10.0)};
  }

  CsvWriter csv(recorder.csv("noise_bias.csv"),
                {"sigma", "direction", "empirical_mean_factor", "predicted_factor",
                 "empirical_additive", "predicted_additive", "stderr", "singular_value", "snr",
                 "stderr_additive"});
  const Mat zero = Mat::Zero(n, n);
  std::vector<detail::Series> empirical(r), predicted(r);
  for (double sigma : sigmas) {
    const double sigma2 = sigma * sigma;
    const flowlab::BiasPrediction pred =
        dt ? flowlab::predict_bias_continuous(p.atilde, p.singular_values, m, sigma2, *dt)
           : flowlab::predict_bias_discrete(p.atilde, p.singular_values, m, sigma2);

    std::vector<std::vector<ColumnFit>> fits;
    if (sigma == 0.0) {
      // Noise-free: the limit exists only as the projector limit, starting
      // from a zero initialization.
      const Mat learned = sysgen::to_svd_basis(clean_limit(zero, p), p.basis);
      std::vector<ColumnFit> row;
      for (int i = 0; i < n; ++i) row.push_back(fit_column(learned, p.atilde, i));
      fits.push_back(std::move(row));
    } else {
      fits = parallel_map(static_cast<std::size_t>(config.trials), [&](std::size_t t) {
        const sysgen::NoisePair noise = sysgen::draw_noise(
            p.data, sigma, derive_seed(config.base_seed, t), sysgen::NoiseStructure::iid);
        const Mat learned =
            dt ? flowlab::flow_closed_continuous_noisy(zero, p.a, p.data.x, noise.n,
                                                       noise.nsharp, *dt, PseudoTime::infinity())
               : flowlab::flow_closed_discrete_noisy(zero, p.a, p.data.x, noise.n,
                                                     noise.nsharp, PseudoTime::infinity());
        const Mat tilde = sysgen::to_svd_basis(learned, p.basis);
        std::vector<ColumnFit> row;
        for (int i = 0; i < n; ++i) row.push_back(fit_column(tilde, p.atilde, i));
        return row;
      });
    }

    const auto count = static_cast<double>(fits.size());
    for (int i = 0; i < n; ++i) {
      double f_sum = 0, f_sq = 0, d_sum = 0, d_sq = 0;
      for (const auto& row : fits) {
        f_sum += row[i].factor;
        f_sq += row[i].factor * row[i].factor;
        d_sum += row[i].additive;
        d_sq += row[i].additive * row[i].additive;
      }
      const double f_mean = f_sum / count;
      const double d_mean = d_sum / count;
      auto stderr_of = [&](double sum, double sq) {
        if (fits.size() < 2) return 0.0;
        const double var = std::max(0.0, (sq - sum * sum / count) / (count - 1));
        return std::sqrt(var / count);
      };
      csv.row(sigma, i + 1, f_mean, pred.multiplicative_factors(i), d_mean,
              pred.additive_diagonal(i), stderr_of(f_sum, f_sq),
              i < r ? p.singular_values(i) : 0.0, pred.snr(i), stderr_of(d_sum, d_sq));
      if (i < r) {
        empirical[i].xs.push_back(sigma);
        empirical[i].ys.push_back(f_mean);
        predicted[i].xs.push_back(sigma);
        predicted[i].ys.push_back(pred.multiplicative_factors(i));
      }
    }
  }
  if (config.emit_svg) {
    std::vector<detail::Series> series;
    for (int i = 0; i < r; ++i) {
      empirical[i].label = fmt::format("dir {} empirical", i + 1);
      predicted[i].label = fmt::format("dir {} predicted", i + 1);
      series.push_back(std::move(empirical[i]));
      series.push_back(std::move(predicted[i]));
    }
    const auto svg = config.output_dir / "noise_bias_factors.svg";
    detail::write_line_plot_svg(svg, "Multiplicative bias factor", "sigma", "factor", series);
    artifacts.svg_paths.push_back(svg);
  }
  recorder.finish();
  return artifacts;
}

// ---------------------------------------------------------------- remedies

namespace {

struct ArmRow {
  std::string arm;
  std::uint64_t seed = 0;
  double spectral_radius = 0;
  bool diverged = false;
  double learnable_error = 0;
  double max_real = 0;
  bool stable = false;
  double bias_deviation = 0;
  double spectrum_error = kNaN;
};

/// max_i |f_i - 1| with f_i = <learned_i, true_i> / |true_i|^2 over the
/// first r columns.
double bias_deviation(const Mat& learned, const Mat& truth, int r) {
  double worst = 0.0;
  for (int i = 0; i < r; ++i) {
    const double denom = truth.col(i).squaredNorm();
    if (denom == 0.0) continue;
    worst = std::max(worst, std::abs(learned.col(i).dot(truth.col(i)) / denom - 1.0));
  }
  return worst;
}

ArmRow evaluate(std::string arm, std::uint64_t seed, const Mat& learned, const Problem& p,
                const Vec& x0, const ExperimentConfig& config) {
  ArmRow row;
  row.arm = std::move(arm);
  row.seed = seed;
  const ComplexList eigs = matcore::eig(learned);
  row.spectral_radius = radius(eigs);
  row.max_real = max_real_part(eigs);
  row.stable = stable(eigs, p.dt);
  row.diverged =
      rollout(learned, x0, config.rollout_steps, rollout_mode(p.dt), p.dt, config.rollout_bound)
          .diverged;
  return row;
}

std::vector<ArmRow> remedy_trial(const ExperimentConfig& config, std::uint64_t seed) {
  const int n = config.single_n();
  const int r = config.r;
  const std::optional<double> dt = config.dt;
  const Problem p = make_problem(default_block_spec(n, r, dt.has_value()),
                                 geometric_singular_values(r, config.m, 1.0), config.m, dt, seed);
  const Mat u1 = p.basis.leading();
  const double a_scale = (p.a * u1).norm();
  auto learnable_error = [&](const Mat& learned) {
    return ((learned - p.a) * u1).norm() / a_scale;
  };
  const Vec x0 = random_unit(n, sub_seed(seed, 4));
  const Mat glorot =
      initgen::sample_init({initgen::InitKind::glorot_normal, n}, sub_seed(seed, 2));

  std::vector<ArmRow> rows;

  // (a) Glorot baseline.
  {
    const Mat learned = clean_limit(glorot, p);
    ArmRow row = evaluate("glorot", seed, learned, p, x0, config);
    row.learnable_error = learnable_error(learned);
    row.bias_deviation = bias_deviation(sysgen::to_svd_basis(learned, p.basis), p.atilde, r);
    rows.push_back(row);
  }
  // (b) Gershgorin initialization matched to the time model.
  {
    const auto kind =
        dt ? initgen::InitKind::gershgorin_continuous : initgen::InitKind::gershgorin_discrete;
    const Mat learned = clean_limit(initgen::sample_init({kind, n}, sub_seed(seed, 2)), p);
    ArmRow row = evaluate("gershgorin", seed, learned, p, x0, config);
    row.learnable_error = learnable_error(learned);
    row.bias_deviation = bias_deviation(sysgen::to_svd_basis(learned, p.basis), p.atilde, r);
    rows.push_back(row);
  }
  // (c) Projection onto the data subspace, trained in r dimensions.
  {
    const sysgen::ProjectionResult proj = sysgen::project_to_data_subspace(p.data);
    const int k = proj.basis.r;
    const Mat& xr = proj.data.x;
    // Operator implied by the reduced data alone.
    const Mat implied = dt ? Mat((proj.data.xsharp - xr) * matcore::pinv(xr) / *dt)
                           : Mat(proj.data.xsharp * matcore::pinv(xr));
    const Mat init_r =
        initgen::sample_init({initgen::InitKind::glorot_normal, k}, sub_seed(seed, 2));
    const Mat learned =
        dt ? flowlab::flow_closed_continuous(init_r, implied, xr, *dt, PseudoTime::infinity())
           : flowlab::flow_closed_discrete(init_r, implied, xr, PseudoTime::infinity());
    const Mat u1d = proj.basis.leading();
    const Mat truth = u1d.transpose() * p.a * u1d;
    Vec x0r = u1d.transpose() * x0;
    if (x0r.norm() == 0.0) x0r = Vec::Unit(k, 0);
    ArmRow row = evaluate("projection", seed, learned, p, x0r / x0r.norm(), config);
    row.learnable_error = (learned - truth).norm() / truth.norm();
    row.bias_deviation = bias_deviation(learned, truth, k);
    const ComplexList target = matcore::eig(p.atilde.topLeftCorner(r, r));
    const ComplexList got = matcore::eig(learned);
    row.spectrum_error = got.size() == target.size() ? max_matched_distance(got, target) : kNaN;
    rows.push_back(row);
  }
  // (d) Whitened data, Glorot initialization.
  {
    const sysgen::WhitenResult white = sysgen::whiten(p.data);
    const Mat w_inv = white.w.inverse();
    const Mat a_white = white.w * p.a * w_inv;
    const Mat learned_white =
        dt ? flowlab::flow_closed_continuous(glorot, a_white, white.data.x, *dt, PseudoTime::infinity())
           : flowlab::flow_closed_discrete(glorot, a_white, white.data.x, PseudoTime::infinity());
    const Mat learned = w_inv * learned_white * white.w;
    ArmRow row = evaluate("whitened", seed, learned, p, x0, config);
    row.learnable_error = learnable_error(learned);
    row.bias_deviation = bias_deviation(sysgen::to_svd_basis(learned, p.basis), p.atilde, r);
    rows.push_back(row);
  }
  // (e) Noise restricted to the complement of the data subspace.
  {
    const sysgen::ProjectionResult proj = sysgen::project_to_data_subspace(p.data);
    const sysgen::NoisePair noise =
        sysgen::draw_noise(p.data, config.sigma, sub_seed(seed, 3), sysgen::NoiseStructure::iid,
                           &proj.basis);
    const Mat learned =
        dt ? flowlab::flow_closed_continuous_noisy(glorot, p.a, p.data.x, noise.n, noise.nsharp,
                                                   *dt, PseudoTime::infinity())
           : flowlab::flow_closed_discrete_noisy(glorot, p.a, p.data.x, noise.n, noise.nsharp,
                                                 PseudoTime::infinity());
    ArmRow row = evaluate("selective_noise", seed, learned, p, x0, config);
    row.learnable_error = learnable_error(learned);
    row.bias_deviation = bias_deviation(sysgen::to_svd_basis(learned, p.basis), p.atilde, r);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

RunArtifacts exp_remedies(const ExperimentConfig& config) {
  RunArtifacts artifacts;
  detail::RunRecorder recorder(config, artifacts);
  if (!(config.sigma > 0.0)) throw ConfigError("remedies: selective-noise arm needs sigma > 0");

  const auto per_seed = parallel_map(static_cast<std::size_t>(config.trials), [&](std::size_t k) {
    return remedy_trial(config, derive_seed(config.base_seed, k));
  });

  CsvWriter csv(recorder.csv("remedies.csv"),
                {"arm", "seed", "spectral_radius_learned", "rollout_diverged", "learnable_error",
                 "max_real_part", "stable", "learnable_bias_deviation", "spectrum_error"});
  struct Tally {
    std::string arm;
    long seeds = 0, stable = 0, diverged = 0;
    double error_sum = 0, worst_bias = 0, worst_spectrum = 0;
  };
  std::vector<Tally> tallies;
  for (const auto& rows : per_seed) {
    for (const ArmRow& row : rows) {
      csv.row(row.arm, row.seed, row.spectral_radius, row.diverged, row.learnable_error,
              row.max_real, row.stable, row.bias_deviation, row.spectrum_error);
      auto it = std::find_if(tallies.begin(), tallies.end(),
                             [&](const Tally& t) { return t.arm == row.arm; });
      if (it == tallies.end()) {
        tallies.push_back({row.arm});
        it = std::prev(tallies.end());
      }
      ++it->seeds;
      it->stable += row.stable;
      it->diverged += row.diverged;
      it->error_sum += row.learnable_error;
      it->worst_bias = std::max(it->worst_bias, row.bias_deviation);
      if (!std::isnan(row.spectrum_error)) {
        it->worst_spectrum = std::max(it->worst_spectrum, row.spectrum_error);
      }
    }
  }
  CsvWriter summary(recorder.csv("remedies_summary.csv"),
                    {"arm", "seeds", "fraction_stable", "fraction_diverged",
                     "mean_learnable_error", "max_bias_deviation", "max_spectrum_error"});
  for (const Tally& t : tallies) {
    const double seeds = static_cast<double>(t.seeds);
    summary.row(t.arm, t.seeds, t.stable / seeds, t.diverged / seeds, t.error_sum / seeds,
                t.worst_bias, t.arm == "projection" ? t.worst_spectrum : kNaN);
  }
  if (config.emit_svg) {
    // Sorted spectral radii per arm, one curve each.
    std::vector<detail::Series> series;
    for (const Tally& t : tallies) {
      detail::Series s{t.arm, {}, {}};
      for (const auto& rows : per_seed)
        for (const ArmRow& row : rows)
          if (row.arm == t.arm) s.ys.push_back(row.spectral_radius);
      std::sort(s.ys.begin(), s.ys.end());
      for (std::size_t k = 0; k < s.ys.size(); ++k) {
        s.xs.push_back((k + 0.5) / static_cast<double>(s.ys.size()));
      }
      series.push_back(std::move(s));
    }
    const auto svg = config.output_dir / "remedies_spectral_radius.svg";
    detail::write_line_plot_svg(svg, "Learned spectral radius by arm", "quantile",
                                "spectral radius", series);
    artifacts.svg_paths.push_back(svg);
  }
  recorder.finish();
  return artifacts;
}

// ----------------------------------------------------------------- rollout

RunArtifacts exp_rollout(const ExperimentConfig& config) {
  RunArtifacts artifacts;
  detail::RunRecorder recorder(config, artifacts);
  const int n = config.single_n();
  const int r = config.r;
  const std::optional<double> dt = config.dt;

  CsvWriter summary(recorder.csv("rollout_summary.csv"),
                    {"scheme", "seed", "spectral_radius", "max_real_part", "stable", "diverged",
                     "diverged_step", "final_norm_ratio"});
  CsvWriter traj(recorder.csv("rollout_trajectories.csv"), {"scheme", "seed", "step", "norm"});
  std::vector<detail::Series> series;
  constexpr int kTrajectorySeeds = 8;

  for (initgen::InitKind kind : config.schemes) {
    struct Outcome {
      Mat learned;
      RolloutResult result;
    };
    const auto outcomes =
        parallel_map(static_cast<std::size_t>(config.trials), [&](std::size_t k) {
          const std::uint64_t seed = derive_seed(config.base_seed, k);
          const Problem p = make_problem(default_block_spec(n, r, dt.has_value()),
                                         geometric_singular_values(r, config.m, 1.0), config.m,
                                         dt, seed);
          const Mat learned = clean_limit(initgen::sample_init({kind, n}, sub_seed(seed, 2)), p);
          return Outcome{learned, rollout(learned, random_unit(n, sub_seed(seed, 4)),
                                          config.rollout_steps, rollout_mode(dt), dt,
                                          config.rollout_bound)};
        });
    for (std::size_t k = 0; k < outcomes.size(); ++k) {
      const std::uint64_t seed = derive_seed(config.base_seed, k);
      const auto& [learned, result] = outcomes[k];
      const ComplexList eigs = matcore::eig(learned);
      const double x0_norm = result.trajectory.front().norm;
      summary.row(initgen::to_string(kind), seed, radius(eigs), max_real_part(eigs),
                  stable(eigs, dt), result.diverged, result.diverged_step,
                  result.trajectory.back().norm / x0_norm);
      if (static_cast<int>(k) < kTrajectorySeeds) {
        detail::Series s;
        s.label = fmt::format("{} {}", initgen::to_string(kind), seed);
        for (const RolloutStep& st : result.trajectory) {
          traj.row(initgen::to_string(kind), seed, st.step, st.norm);
          s.xs.push_back(static_cast<double>(st.step));
          s.ys.push_back(std::log10(st.norm / x0_norm));
        }
        series.push_back(std::move(s));
      }
    }
  }
  if (config.emit_svg) {
    const auto svg = config.output_dir / "rollout.svg";
    detail::write_line_plot_svg(svg, "Rollout norms", "step", "log10 |x|/|x0|", series);
    artifacts.svg_paths.push_back(svg);
  }
  recorder.finish();
  return artifacts;
}

RunArtifacts run_experiment(const ExperimentConfig& config) {
  switch (config.experiment) {
    case Experiment::spectrum: return exp_spectrum(config);
    case Experiment::convergence: return exp_convergence(config);
    case Experiment::noise_bias: return exp_noise_bias(config);
    case Experiment::remedies: return exp_remedies(config);
    case Experiment::rollout: return exp_rollout(config);
  }
  throw ConfigError("unknown experiment");
}

}  // namespace trainflow::bench
