#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "proxidist/bands.hpp"
#include "proxidist/basis.hpp"
#include "proxidist/dataset.hpp"
#include "proxidist/estimator.hpp"
#include "proxidist/experiments.hpp"
#include "proxidist/isotonic.hpp"
#include "proxidist/preprocess.hpp"
#include "proxidist/report.hpp"

namespace proxidist {

struct EstimateConfig {
  std::string data_path;
  std::string recipe = "generic";  // generic | rhc
  Schema schema;
  int screen_k = 5;
  int folds = 5;
  int grid_size = 61;
  std::vector<double> taus = {0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50,
                              0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90};
  std::vector<double> cvar_taus = {0.25, 0.50, 0.75};
  double c_lambda = 0.1;
  double alpha = 0.05;
  int multipliers = 1000;
  std::uint64_t seed = 20240817;
  std::string out_dir = "out";
};

struct EstimateOutputs {
  Grid grid;
  std::vector<double> taus;
  std::array<Vector, 2> pdr_cdf, pdr_proj, por_cdf, pipw_cdf, naive_cdf;
  BandSet band;
  QuantileBands qte_bands;
  std::vector<double> pdr_qte, por_qte, pipw_qte, naive_qte;
  std::vector<double> pdr_cvar, por_cvar, pipw_cvar, naive_cvar, pdr_cvar_se;
  std::vector<Interval> pdr_cvar_interval;
  double critical_value = 0.0;
  std::array<double, 2> kappa_min{0.0, 0.0};
  std::array<double, 2> q_weighted_norm{0.0, 0.0};
  std::vector<std::string> screened_features;
  long dropped_rows = 0;
  long clipped = 0;
  Eigen::Index n = 0;
  std::array<long, 2> arm_counts{0, 0};
  std::vector<std::string> output_files;
};

namespace detail {

inline double cvar_from_curve(const Grid& levels, const Vector& shortfall, double tau) {
  double best = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < shortfall.size(); ++j) {
    best = std::max(best, levels[static_cast<std::size_t>(j)] - shortfall[j] / tau);
  }
  return best;
}

}  // namespace detail

inline EstimateOutputs run_estimate(const EstimateConfig& cfg, const Json& manifest_config) {
  Dataset data = cfg.recipe == "rhc" ? load_rhc(cfg.data_path)
                                     : load_dataset(cfg.data_path, cfg.schema);
  if (data.arm_count(0) == 0 || data.arm_count(1) == 0)
    fail_input("ingestion", "both treatment arms must be nonempty");

  const PreprocessPlan plan = fit_preprocess(data);
  const Design design = apply_preprocess(plan, data);
  const int k = std::min<int>(cfg.screen_k, static_cast<int>(design.x.cols()));
  const ScreenResult screen = screen_covariates(design.x, data.a, data.y, k);

  EstimateOutputs out;
  out.n = data.n();
  out.dropped_rows = data.dropped_rows;
  out.arm_counts = {data.arm_count(0), data.arm_count(1)};
  Matrix screened(design.x.rows(), k);
  for (int j = 0; j < k; ++j) {
    screened.col(j) = design.x.col(screen.selected[static_cast<std::size_t>(j)]);
    out.screened_features.push_back(design.x_names[static_cast<std::size_t>(
        screen.selected[static_cast<std::size_t>(j)])]);
  }

  const FeatureMatrix bw = build_realdata_basis(screened, out.screened_features, design.w,
                                                design.w_names, data.n());
  const FeatureMatrix bz = build_realdata_basis(screened, out.screened_features, design.z,
                                                design.z_names, data.n());

  const Grid grid = quantile_grid(data.y, cfg.grid_size);
  const Grid levels = grid;
  out.grid = grid;
  out.taus = cfg.taus;
  const FoldPlan folds =
      make_folds(static_cast<int>(data.n()), cfg.folds, derive_seed(cfg.seed, 3));

  SolverConfig solver;
  solver.mode = SolverConfig::Mode::Ridge;
  solver.c_lambda = cfg.c_lambda;
  CrossfitOptions opts;
  opts.one_bridge_curves = true;
  const CdfProcessEstimate est =
      crossfit_cdf(bw.values, bz.values, data.y, data.a, folds, grid, levels, solver, opts);
  out.kappa_min = est.kappa_min;
  out.q_weighted_norm = est.q_weighted_norm;

  Matrix naive_features(data.n(), design.x.cols() + design.z.cols() + design.w.cols());
  naive_features << design.x, design.z, design.w;
  const NaiveAipwEstimate naive =
      naive_aipw_cdf(naive_features, data.y, data.a, folds, grid, levels);
  out.clipped = naive.clipped;

  const std::vector<const Matrix*> influence{&est.influence[0], &est.influence[1]};
  out.critical_value = multiplier_critical_value(influence, cfg.multipliers, cfg.alpha,
                                                 derive_seed(cfg.seed, 5));
  out.band = cdf_band(grid, est.cdf, data.n(), out.critical_value, cfg.alpha);
  out.qte_bands = invert_band(monotone_envelope(out.band), cfg.taus);

  auto project = [](const Vector& v) {
    std::vector<double> raw(v.data(), v.data() + v.size());
    const auto proj = isotonic_project(raw, std::vector<double>(raw.size(), 1.0));
    return Vector(Eigen::Map<const Vector>(proj.data(), v.size()));
  };
  for (int arm = 0; arm < 2; ++arm) {
    const auto ai = static_cast<std::size_t>(arm);
    out.pdr_cdf[ai] = est.cdf[ai];
    out.pdr_proj[ai] = project(est.cdf[ai]);
    out.por_cdf[ai] = project(est.por[ai]);
    out.pipw_cdf[ai] = project(est.pipw[ai]);
    out.naive_cdf[ai] = project(naive.cdf[ai]);
  }
  for (double tau : cfg.taus) {
    out.pdr_qte.push_back(curve_quantile(grid, out.pdr_proj[1], tau) -
                          curve_quantile(grid, out.pdr_proj[0], tau));
    out.por_qte.push_back(curve_quantile(grid, out.por_cdf[1], tau) -
                          curve_quantile(grid, out.por_cdf[0], tau));
    out.pipw_qte.push_back(curve_quantile(grid, out.pipw_cdf[1], tau) -
                           curve_quantile(grid, out.pipw_cdf[0], tau));
    out.naive_qte.push_back(curve_quantile(grid, out.naive_cdf[1], tau) -
                            curve_quantile(grid, out.naive_cdf[0], tau));
  }

  const CvarEstimate cv =
      cvar_estimate(levels, est.shortfall, est.shortfall_influence, cfg.cvar_taus, cfg.alpha);
  const double z = two_sided_z(cfg.alpha);
  for (std::size_t t = 0; t < cfg.cvar_taus.size(); ++t) {
    const auto ti = static_cast<Eigen::Index>(t);
    const double tau = cfg.cvar_taus[t];
    out.pdr_cvar.push_back(cv.value[1][ti] - cv.value[0][ti]);
    const Vector chi = cv.influence[1].col(ti) - cv.influence[0].col(ti);
    const double se = column_sd(chi) / std::sqrt(static_cast<double>(data.n()));
    out.pdr_cvar_se.push_back(se);
    out.pdr_cvar_interval.push_back(
        {out.pdr_cvar.back() - z * se, out.pdr_cvar.back() + z * se});
    out.por_cvar.push_back(detail::cvar_from_curve(levels, est.shortfall_por[1], tau) -
                           detail::cvar_from_curve(levels, est.shortfall_por[0], tau));
    out.pipw_cvar.push_back(detail::cvar_from_curve(levels, est.shortfall_pipw[1], tau) -
                            detail::cvar_from_curve(levels, est.shortfall_pipw[0], tau));
    out.naive_cvar.push_back(detail::cvar_from_curve(levels, naive.shortfall[1], tau) -
                             detail::cvar_from_curve(levels, naive.shortfall[0], tau));
  }

  // Report emission.
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  const std::string hash = config_hash(canonical_config(manifest_config));
  auto path = [&](const std::string& name) { return (fs::path(cfg.out_dir) / name).string(); };
  auto fmt = [](double v) { return format_double(v); };

  {
    std::vector<std::vector<std::string>> rows;
    for (int arm = 0; arm < 2; ++arm) {
      const auto ai = static_cast<std::size_t>(arm);
      for (std::size_t kk = 0; kk < grid.size(); ++kk) {
        const auto ki = static_cast<Eigen::Index>(kk);
        rows.push_back({std::to_string(arm), fmt(grid[kk]), fmt(out.pdr_cdf[ai][ki]),
                        fmt(out.pdr_proj[ai][ki]), fmt(out.por_cdf[ai][ki]),
                        fmt(out.pipw_cdf[ai][ki]), fmt(out.naive_cdf[ai][ki])});
      }
    }
    write_table(path("cdf.csv"), "probability", hash,
                {"arm", "y", "F_hat", "F_proj", "POR", "PIPW", "naive"}, rows);
    out.output_files.push_back("cdf.csv");
  }
  {
    std::vector<std::vector<std::string>> rows;
    for (int arm = 0; arm < 2; ++arm) {
      const auto ai = static_cast<std::size_t>(arm);
      for (std::size_t kk = 0; kk < grid.size(); ++kk) {
        const auto ki = static_cast<Eigen::Index>(kk);
        rows.push_back({std::to_string(arm), fmt(grid[kk]), fmt(out.pdr_cdf[ai][ki]),
                        fmt(out.pdr_proj[ai][ki]), fmt(out.band.lower[ai][ki]),
                        fmt(out.band.upper[ai][ki])});
      }
    }
    write_table(path("bands.csv"), "probability", hash,
                {"arm", "y", "F_hat", "F_proj", "L", "U"}, rows);
    out.output_files.push_back("bands.csv");
  }
  {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t t = 0; t < cfg.taus.size(); ++t) {
      const auto ti = static_cast<Eigen::Index>(t);
      rows.push_back({fmt(cfg.taus[t]), fmt(out.naive_qte[t]), fmt(out.por_qte[t]),
                      fmt(out.pipw_qte[t]), fmt(out.pdr_qte[t]),
                      fmt(out.qte_bands.qte_lower[ti]), fmt(out.qte_bands.qte_upper[ti])});
    }
    write_table(path("qte.csv"), "outcome", hash,
                {"tau", "naive", "por", "pipw", "pdr", "pdr_lower", "pdr_upper"}, rows);
    out.output_files.push_back("qte.csv");
  }
  {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t t = 0; t < cfg.taus.size(); ++t) {
      const auto ti = static_cast<Eigen::Index>(t);
      rows.push_back({fmt(cfg.taus[t]), fmt(out.qte_bands.lower[0][ti]),
                      fmt(out.qte_bands.upper[0][ti]), fmt(out.qte_bands.lower[1][ti]),
                      fmt(out.qte_bands.upper[1][ti]), fmt(out.qte_bands.qte_lower[ti]),
                      fmt(out.qte_bands.qte_upper[ti])});
    }
    write_table(path("qte_bands.csv"), "outcome", hash,
                {"tau", "QL0", "QU0", "QL1", "QU1", "dQL", "dQU"}, rows);
    out.output_files.push_back("qte_bands.csv");
  }
  {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t t = 0; t < cfg.cvar_taus.size(); ++t) {
      rows.push_back({fmt(cfg.cvar_taus[t]), fmt(out.naive_cvar[t]), fmt(out.por_cvar[t]),
                      fmt(out.pipw_cvar[t]), fmt(out.pdr_cvar[t]), fmt(out.pdr_cvar_se[t]),
                      fmt(out.pdr_cvar_interval[t].lo), fmt(out.pdr_cvar_interval[t].hi)});
    }
    write_table(path("cvar.csv"), "outcome", hash,
                {"tau", "naive", "por", "pipw", "pdr", "pdr_se", "pdr_lower", "pdr_upper"},
                rows);
    out.output_files.push_back("cvar.csv");
  }
  {
    Json diag;
    diag["config_hash"] = hash;
    diag["n"] = static_cast<long>(out.n);
    diag["arm_counts"] = {out.arm_counts[0], out.arm_counts[1]};
    diag["dropped_rows"] = out.dropped_rows;
    diag["screened_features"] = out.screened_features;
    diag["kappa_min"] = {out.kappa_min[0], out.kappa_min[1]};
    diag["dual_bridge_weighted_norm"] = {out.q_weighted_norm[0], out.q_weighted_norm[1]};
    diag["critical_value"] = out.critical_value;
    diag["propensity_clipped"] = out.clipped;
    diag["basis_dimension"] = static_cast<long>(bw.dim());
    write_json(path("diagnostics.json"), diag);
    out.output_files.push_back("diagnostics.json");
  }
  {
    Json manifest;
    manifest["tool"] = "proxidist";
    manifest["version"] = "0.1.0";
    manifest["config"] = manifest_config;
    manifest["config_hash"] = hash;
    manifest["outputs"] = out.output_files;
    write_json(path("manifest.json"), manifest);
    out.output_files.push_back("manifest.json");
  }
  return out;
}

}  // namespace proxidist
