#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "proxidist/bands.hpp"
#include "proxidist/estimator.hpp"
#include "proxidist/isotonic.hpp"
#include "proxidist/simulators.hpp"
#include "proxidist/stats.hpp"
#include "proxidist/threads.hpp"

namespace proxidist {

struct ComponentRunConfig {
  int component = 1;  // 1 or 3
  double rho = 0.75;
  long n = 2000;
  int replications = 300;
  int folds = 5;
  int grid_size = 151;
  int multipliers = 1000;
  double alpha = 0.05;
  double c_lambda = 0.01;
  std::vector<double> taus{0.25, 0.50, 0.75};
  std::vector<double> cvar_taus{0.25, 0.50, 0.75};
  long n_truth = 2000000;
  std::uint64_t seed = 20240817;
  SolverConfig::Mode solver_mode = SolverConfig::Mode::Ridge;
  bool run_naive = true;
  bool run_one_bridge = true;
  bool run_estd = false;
  bool naive_only = false;
  bool oracle_nuisance = false;

  DgpVariant variant() const {
    DgpVariant v;
    v.component = component;
    v.c1.rho = rho;
    v.c3.rho = rho;
    return v;
  }
};

struct ReplicationMetrics {
  bool ok = false;
  std::string error;
  double kappa_min = 0.0;
  double dual_norm = 0.0;
  double if_sd = 0.0;
  double f1_est = 0.0, f1_truth = 0.0, f1_len = 0.0;
  bool f1_cover = false;
  bool cdf_cover = false;
  double cdf_len = 0.0;
  std::vector<double> qte_est, qte_truth, qte_df_len;
  std::vector<int> qte_df_cover;
  bool qte_df_all = false;
  std::vector<double> naive_qte_est, por_qte_est, pipw_qte_est;
  std::vector<int> estd_cover;
  bool estd_all = false;
  double estd_len_mean = 0.0;
  std::vector<double> cvar_est, cvar_truth, cvar_len;
  std::vector<int> cvar_cover;
  double iso_ratio = 1.0;
  bool iso_violation = false;
};

struct ComponentSummary {
  ComponentRunConfig config;
  int completed = 0;
  int failures = 0;
  double kappa_min_mean = 0.0;
  double dual_norm_mean = 0.0;
  double if_sd_mean = 0.0;
  double f1_bias = 0.0, f1_rmse = 0.0, f1_cover = 0.0, f1_len = 0.0;
  double cdf_cover = 0.0, cdf_len = 0.0;
  std::vector<double> qte_bias, qte_rmse, qte_df_len;
  std::vector<double> qte_df_cover;  // per tau
  double qte_df_sim_cover = 0.0;
  std::vector<double> naive_qte_bias, por_qte_bias, pipw_qte_bias;
  double estd_sim_cover = 0.0, estd_len = 0.0;
  double cvar_cover = 0.0;
  std::vector<double> cvar_bias;
  double iso_ratio = 0.0;
  long iso_violations = 0;
  std::vector<ReplicationMetrics> replications;  // kept for downstream checks
};

namespace detail {

inline double cvar_truth_at(const TruthTable& truth, int arm, double tau) {
  const auto& draws = truth.sorted_draws[static_cast<std::size_t>(arm)];
  const auto m =
      static_cast<std::size_t>(std::ceil(tau * static_cast<double>(draws.size())));
  double acc = 0.0;
  for (std::size_t i = 0; i < m && i < draws.size(); ++i) acc += draws[i];
  return m > 0 ? acc / static_cast<double>(m) : draws.front();
}

inline Vector project_curve(const Vector& curve) {
  std::vector<double> v(curve.data(), curve.data() + curve.size());
  const std::vector<double> proj = isotonic_project(v, std::vector<double>(v.size(), 1.0));
  return Eigen::Map<const Vector>(proj.data(), curve.size());
}

inline Eigen::Index nearest_grid_index(const Grid& grid, double target) {
  Eigen::Index best = 0;
  double dist = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double d = std::abs(grid[k] - target);
    if (d < dist) {
      dist = d;
      best = static_cast<Eigen::Index>(k);
    }
  }
  return best;
}

}  // namespace detail

// One Monte-Carlo replication of a component experiment. cvar_truth_contrast
// holds the true CVaR contrasts per cvar tau, precomputed once.
inline ReplicationMetrics run_replication(const ComponentRunConfig& cfg, const TruthTable& truth,
                                          const std::vector<double>& cvar_truth_contrast,
                                          const Component1Oracle* oracle, std::uint64_t rep_seed) {
  ReplicationMetrics m;
  try {
    SimulatedData sim;
    {
      if (cfg.component == 1) {
        Dgp1Config c;
        c.rho = cfg.rho;
        c.n = cfg.n;
        c.seed = derive_seed(rep_seed, 11);
        sim = gen_component1(c);
      } else {
        Dgp3Config c;
        c.rho = cfg.rho;
        c.n = cfg.n;
        c.seed = derive_seed(rep_seed, 11);
        sim = gen_component3(c);
      }
    }
    const Dataset& data = sim.data;
    const Eigen::Index n = data.n();
    const Grid grid = quantile_grid(data.y, cfg.grid_size);
    const bool want_cvar = !cfg.cvar_taus.empty();
    const Grid levels = want_cvar ? grid : Grid{};

    const double q1_med_truth = truth.quantile_at(1, 0.5);
    const Eigen::Index target_idx = detail::nearest_grid_index(grid, q1_med_truth);

    // Truth values on this replication's grid.
    std::array<Vector, 2> truth_grid;
    for (int arm = 0; arm < 2; ++arm) {
      truth_grid[static_cast<std::size_t>(arm)].resize(static_cast<Eigen::Index>(grid.size()));
      for (std::size_t k = 0; k < grid.size(); ++k)
        truth_grid[static_cast<std::size_t>(arm)][static_cast<Eigen::Index>(k)] =
            truth.cdf_at(arm, grid[k]);
    }

    Matrix naive_features;
    if (cfg.run_naive) {
      naive_features.resize(n, 4);
      naive_features.col(0) = data.x_numeric.col(0);
      naive_features.col(1) = data.x_numeric.col(1);
      naive_features.col(2) = data.z.col(0);
      naive_features.col(3) = data.w.col(0);
    }
    const FoldPlan folds = make_folds(static_cast<int>(n), cfg.folds, derive_seed(rep_seed, 13));

    if (cfg.run_naive) {
      const NaiveAipwEstimate naive =
          naive_aipw_cdf(naive_features, data.y, data.a, folds, grid, levels);
      std::array<Vector, 2> naive_proj{detail::project_curve(naive.cdf[0]),
                                       detail::project_curve(naive.cdf[1])};
      for (double tau : cfg.taus) {
        m.naive_qte_est.push_back(curve_quantile(grid, naive_proj[1], tau) -
                                  curve_quantile(grid, naive_proj[0], tau));
      }
      if (cfg.naive_only) {
        for (double tau : cfg.taus)
          m.qte_truth.push_back(truth.quantile_at(1, tau) - truth.quantile_at(0, tau));
        m.ok = true;
        return m;
      }
    }

    CdfProcessEstimate est;
    if (cfg.oracle_nuisance && oracle) {
      Matrix bw(n, 8), bz(n, 8);
      for (Eigen::Index i = 0; i < n; ++i) {
        bw.row(i) = Component1Oracle::multilinear(data.w(i, 0), data.x_numeric(i, 0),
                                                  data.x_numeric(i, 1));
        bz.row(i) = Component1Oracle::multilinear(data.z(i, 0), data.x_numeric(i, 0),
                                                  data.x_numeric(i, 1));
      }
      std::array<Matrix, 2> theta{oracle->true_theta(0, grid), oracle->true_theta(1, grid)};
      std::array<Vector, 2> alpha{oracle->true_alpha(0), oracle->true_alpha(1)};
      std::array<Matrix, 2> short_theta;
      if (want_cvar) {
        short_theta = {oracle->true_shortfall_theta(0, levels),
                       oracle->true_shortfall_theta(1, levels)};
      }
      est = onestep_with_fixed_bridges(bw, bz, data.y, data.a, grid, theta, alpha, levels,
                                       want_cvar ? &short_theta : nullptr);
    } else {
      const Matrix bw = component_features(data.w, data.x_numeric);
      const Matrix bz = component_features(data.z, data.x_numeric);
      SolverConfig solver;
      solver.mode = cfg.solver_mode;
      solver.c_lambda = cfg.c_lambda;
      CrossfitOptions opts;
      opts.one_bridge_curves = cfg.run_one_bridge;
      est = crossfit_cdf(bw, bz, data.y, data.a, folds, grid, levels, solver, opts);
    }

    m.kappa_min = std::min(est.kappa_min_within_arm[0], est.kappa_min_within_arm[1]);
    m.dual_norm = std::max(est.q_weighted_norm[0], est.q_weighted_norm[1]);
    m.if_sd = column_sd(est.influence[1].col(target_idx));

    // Pointwise interval for F_1 at the grid point closest to the true median.
    // Coverage uses the clipped interval; the reported length is the
    // unclipped Wald width (the convention behind the diagnostics tables,
    // which can exceed one under weak proxies).
    m.f1_est = est.cdf[1][target_idx];
    m.f1_truth = truth_grid[1][target_idx];
    const Interval pt = pointwise_interval(m.f1_est, est.influence[1].col(target_idx), cfg.alpha);
    m.f1_cover = pt.contains(m.f1_truth);
    m.f1_len = 2.0 * two_sided_z(cfg.alpha) * column_sd(est.influence[1].col(target_idx)) /
               std::sqrt(static_cast<double>(n));

    // Simultaneous band over both arms.
    const std::vector<const Matrix*> influence{&est.influence[0], &est.influence[1]};
    const double chat = multiplier_critical_value(influence, cfg.multipliers, cfg.alpha,
                                                  derive_seed(rep_seed, 17));
    const BandSet band = cdf_band(grid, est.cdf, n, chat, cfg.alpha);
    bool covered = true;
    for (int arm = 0; arm < 2; ++arm) {
      const auto ai = static_cast<std::size_t>(arm);
      for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(grid.size()); ++k) {
        const double tv = truth_grid[ai][k];
        if (tv < band.lower[ai][k] - 1e-12 || tv > band.upper[ai][k] + 1e-12) covered = false;
      }
    }
    m.cdf_cover = covered;
    m.cdf_len = 2.0 * chat / std::sqrt(static_cast<double>(n));

    // Isotonic projection diagnostics against the true CDF on the grid.
    std::array<Vector, 2> proj;
    double num = 0.0, den = 0.0;
    for (int arm = 0; arm < 2; ++arm) {
      const auto ai = static_cast<std::size_t>(arm);
      proj[ai] = detail::project_curve(est.cdf[ai]);
      num += (proj[ai] - truth_grid[ai]).squaredNorm();
      den += (est.cdf[ai] - truth_grid[ai]).squaredNorm();
    }
    m.iso_ratio = den > 0.0 ? num / den : 1.0;
    m.iso_violation = num > den + 1e-10;

    // Density-free QTE bands from the envelope of the clipped band.
    const QuantileBands qb = invert_band(monotone_envelope(band), cfg.taus);
    m.qte_df_all = true;
    for (std::size_t t = 0; t < cfg.taus.size(); ++t) {
      const double tau = cfg.taus[t];
      const double truth_qte = truth.quantile_at(1, tau) - truth.quantile_at(0, tau);
      m.qte_truth.push_back(truth_qte);
      m.qte_est.push_back(curve_quantile(grid, proj[1], tau) -
                          curve_quantile(grid, proj[0], tau));
      const bool cover = qb.qte_lower[static_cast<Eigen::Index>(t)] <= truth_qte &&
                         truth_qte <= qb.qte_upper[static_cast<Eigen::Index>(t)];
      m.qte_df_cover.push_back(cover ? 1 : 0);
      m.qte_df_len.push_back(qb.qte_upper[static_cast<Eigen::Index>(t)] -
                             qb.qte_lower[static_cast<Eigen::Index>(t)]);
      if (!cover) m.qte_df_all = false;
    }

    if (cfg.run_one_bridge && est.por[0].size() > 0) {
      std::array<Vector, 2> por_proj{detail::project_curve(est.por[0]),
                                     detail::project_curve(est.por[1])};
      std::array<Vector, 2> pipw_proj{detail::project_curve(est.pipw[0]),
                                      detail::project_curve(est.pipw[1])};
      for (double tau : cfg.taus) {
        m.por_qte_est.push_back(curve_quantile(grid, por_proj[1], tau) -
                                curve_quantile(grid, por_proj[0], tau));
        m.pipw_qte_est.push_back(curve_quantile(grid, pipw_proj[1], tau) -
                                 curve_quantile(grid, pipw_proj[0], tau));
      }
    }

    if (cfg.run_estd) {
      std::array<double, 2> bw_kernel;
      for (int arm = 0; arm < 2; ++arm) {
        std::vector<double> arm_y;
        for (Eigen::Index i = 0; i < n; ++i)
          if (data.a[i] == arm) arm_y.push_back(data.y[i]);
        bw_kernel[static_cast<std::size_t>(arm)] = silverman_bandwidth(arm_y);
      }
      const std::array<const Matrix*, 2> inf_ptr{&est.influence[0], &est.influence[1]};
      const auto estd =
          estimated_density_delta_band(grid, proj, inf_ptr, cfg.taus, cfg.alpha, bw_kernel);
      m.estd_all = true;
      double len_sum = 0.0;
      for (std::size_t t = 0; t < estd.size(); ++t) {
        const bool cover = estd[t].interval.contains(m.qte_truth[t]);
        m.estd_cover.push_back(cover ? 1 : 0);
        if (!cover) m.estd_all = false;
        len_sum += estd[t].interval.length();
      }
      m.estd_len_mean = estd.empty() ? 0.0 : len_sum / static_cast<double>(estd.size());
    }

    if (want_cvar) {
      const CvarEstimate cv =
          cvar_estimate(levels, est.shortfall, est.shortfall_influence, cfg.cvar_taus, cfg.alpha);
      const double z = two_sided_z(cfg.alpha);
      for (std::size_t t = 0; t < cfg.cvar_taus.size(); ++t) {
        const auto ti = static_cast<Eigen::Index>(t);
        const double contrast = cv.value[1][ti] - cv.value[0][ti];
        const Vector chi = cv.influence[1].col(ti) - cv.influence[0].col(ti);
        const double se = column_sd(chi) / std::sqrt(static_cast<double>(n));
        const double truth_contrast = cvar_truth_contrast[t];
        m.cvar_est.push_back(contrast);
        m.cvar_truth.push_back(truth_contrast);
        const Interval ci{contrast - z * se, contrast + z * se};
        m.cvar_cover.push_back(ci.contains(truth_contrast) ? 1 : 0);
        m.cvar_len.push_back(ci.length());
      }
    }
    m.ok = true;
  } catch (const Error& e) {
    m.ok = false;
    m.error = e.what();
  }
  return m;
}

inline ComponentSummary run_component_experiment(const ComponentRunConfig& cfg) {
  const TruthTable truth =
      truth_oracle(cfg.variant(), Grid{0.0}, {0.5}, cfg.n_truth, derive_seed(cfg.seed, 7));
  std::vector<double> cvar_truth_contrast;
  for (double tau : cfg.cvar_taus) {
    cvar_truth_contrast.push_back(detail::cvar_truth_at(truth, 1, tau) -
                                  detail::cvar_truth_at(truth, 0, tau));
  }
  Component1Oracle oracle(cfg.rho);
  std::vector<ReplicationMetrics> reps(static_cast<std::size_t>(cfg.replications));
  parallel_for(static_cast<std::size_t>(cfg.replications), [&](std::size_t r) {
    reps[r] = run_replication(cfg, truth, cvar_truth_contrast,
                              cfg.oracle_nuisance ? &oracle : nullptr,
                              derive_seed(cfg.seed, 1000 + r));
  });

  ComponentSummary s;
  s.config = cfg;
  const std::size_t t_count = cfg.taus.size();
  const std::size_t c_count = cfg.cvar_taus.size();
  s.qte_bias.assign(t_count, 0.0);
  s.qte_rmse.assign(t_count, 0.0);
  s.qte_df_len.assign(t_count, 0.0);
  s.qte_df_cover.assign(t_count, 0.0);
  s.naive_qte_bias.assign(t_count, 0.0);
  s.por_qte_bias.assign(t_count, 0.0);
  s.pipw_qte_bias.assign(t_count, 0.0);
  s.cvar_bias.assign(c_count, 0.0);
  double cvar_cover_acc = 0.0;
  long cvar_cover_n = 0;
  for (const ReplicationMetrics& m : reps) {
    if (!m.ok) {
      ++s.failures;
      continue;
    }
    ++s.completed;
    s.kappa_min_mean += m.kappa_min;
    s.dual_norm_mean += m.dual_norm;
    s.if_sd_mean += m.if_sd;
    const double err = m.f1_est - m.f1_truth;
    s.f1_bias += err;
    s.f1_rmse += err * err;
    s.f1_cover += m.f1_cover ? 1.0 : 0.0;
    s.f1_len += m.f1_len;
    s.cdf_cover += m.cdf_cover ? 1.0 : 0.0;
    s.cdf_len += m.cdf_len;
    for (std::size_t t = 0; t < t_count && t < m.qte_est.size(); ++t) {
      const double e = m.qte_est[t] - m.qte_truth[t];
      s.qte_bias[t] += e;
      s.qte_rmse[t] += e * e;
      s.qte_df_len[t] += m.qte_df_len.empty() ? 0.0 : m.qte_df_len[t];
      s.qte_df_cover[t] += m.qte_df_cover.empty() ? 0.0 : m.qte_df_cover[t];
    }
    s.qte_df_sim_cover += m.qte_df_all ? 1.0 : 0.0;
    for (std::size_t t = 0; t < t_count && t < m.naive_qte_est.size(); ++t)
      s.naive_qte_bias[t] += m.naive_qte_est[t] - m.qte_truth[t];
    for (std::size_t t = 0; t < t_count && t < m.por_qte_est.size(); ++t) {
      s.por_qte_bias[t] += m.por_qte_est[t] - m.qte_truth[t];
      s.pipw_qte_bias[t] += m.pipw_qte_est[t] - m.qte_truth[t];
    }
    s.estd_sim_cover += m.estd_all ? 1.0 : 0.0;
    s.estd_len += m.estd_len_mean;
    for (std::size_t t = 0; t < m.cvar_cover.size(); ++t) {
      cvar_cover_acc += m.cvar_cover[t];
      ++cvar_cover_n;
      s.cvar_bias[t] += m.cvar_est[t] - m.cvar_truth[t];
    }
    s.iso_ratio += m.iso_ratio;
    s.iso_violations += m.iso_violation ? 1 : 0;
  }
  const double denom = std::max(1, s.completed);
  s.kappa_min_mean /= denom;
  s.dual_norm_mean /= denom;
  s.if_sd_mean /= denom;
  s.f1_bias /= denom;
  s.f1_rmse = std::sqrt(s.f1_rmse / denom);
  s.f1_cover /= denom;
  s.f1_len /= denom;
  s.cdf_cover /= denom;
  s.cdf_len /= denom;
  for (std::size_t t = 0; t < t_count; ++t) {
    s.qte_bias[t] /= denom;
    s.qte_rmse[t] = std::sqrt(s.qte_rmse[t] / denom);
    s.qte_df_len[t] /= denom;
    s.qte_df_cover[t] /= denom;
    s.naive_qte_bias[t] /= denom;
    s.por_qte_bias[t] /= denom;
    s.pipw_qte_bias[t] /= denom;
  }
  s.qte_df_sim_cover /= denom;
  s.estd_sim_cover /= denom;
  s.estd_len /= denom;
  s.cvar_cover = cvar_cover_n > 0 ? cvar_cover_acc / static_cast<double>(cvar_cover_n) : 0.0;
  for (std::size_t t = 0; t < c_count; ++t) s.cvar_bias[t] /= denom;
  s.iso_ratio /= denom;
  s.replications = std::move(reps);
  return s;
}

struct WeakProxyRow {
  double rho = 0.0;
  double kappa_min = 0.0;
  double dual_norm = 0.0;
  double if_sd = 0.0;
  double cdf_bias = 0.0;
  double cdf_rmse = 0.0;
  double pt_cover = 0.0;
  double pt_len = 0.0;
  double sim_cover = 0.0;
  double sim_len = 0.0;
  double qte_rmse = 0.0;
  double qte_len = 0.0;
  int failures = 0;
};

// Panel-A style sweep across proxy-relevance values at fixed n. The sweep
// uses the unregularized closed-form solver: the point of the experiment is
// how the raw inverse degrades, and the variance/length inflation at low rho
// is visible only without ridge stabilization. Failed replications (condition
// cap) are excluded and counted.
inline std::vector<WeakProxyRow> weak_proxy_sweep(const std::vector<double>& rho_list, long n,
                                                  int replications, std::uint64_t seed,
                                                  int grid_size = 161, int multipliers = 499,
                                                  long n_truth = 2000000) {
  std::vector<WeakProxyRow> rows;
  for (std::size_t i = 0; i < rho_list.size(); ++i) {
    ComponentRunConfig cfg;
    cfg.component = 1;
    cfg.rho = rho_list[i];
    cfg.n = n;
    cfg.replications = replications;
    cfg.grid_size = grid_size;
    cfg.multipliers = multipliers;
    cfg.taus = {0.5};
    cfg.cvar_taus = {};
    cfg.solver_mode = SolverConfig::Mode::Square;
    cfg.run_naive = false;
    cfg.run_one_bridge = false;
    cfg.n_truth = n_truth;
    cfg.seed = derive_seed(seed, 40 + i);
    const ComponentSummary s = run_component_experiment(cfg);
    WeakProxyRow row;
    row.rho = rho_list[i];
    row.kappa_min = s.kappa_min_mean;
    row.dual_norm = s.dual_norm_mean;
    row.if_sd = s.if_sd_mean;
    row.cdf_bias = s.f1_bias;
    row.cdf_rmse = s.f1_rmse;
    row.pt_cover = s.f1_cover;
    row.pt_len = s.f1_len;
    row.sim_cover = s.cdf_cover;
    row.sim_len = s.cdf_len;
    row.qte_rmse = s.qte_rmse.empty() ? 0.0 : s.qte_rmse[0];
    row.qte_len = s.qte_df_len.empty() ? 0.0 : s.qte_df_len[0];
    row.failures = s.failures;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace proxidist
