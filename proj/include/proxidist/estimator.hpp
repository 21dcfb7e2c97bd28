#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "proxidist/basis.hpp"
#include "proxidist/bridge.hpp"
#include "proxidist/common.hpp"
#include "proxidist/folds.hpp"
#include "proxidist/logistic.hpp"
#include "proxidist/stats.hpp"

namespace proxidist {

// Threshold grid: K equally spaced empirical quantiles of the pooled outcome
// between the lo and hi probability levels.
inline Grid quantile_grid(const Vector& y, int k, double lo = 0.02, double hi = 0.98) {
  std::vector<double> sorted(y.data(), y.data() + y.size());
  std::sort(sorted.begin(), sorted.end());
  Grid grid(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    const double p = (k == 1) ? lo : lo + (hi - lo) * static_cast<double>(i) / (k - 1);
    grid[static_cast<std::size_t>(i)] = quantile_sorted(sorted, p);
  }
  return grid;
}

struct SolverConfig {
  enum class Mode { Square, Ridge, Pinv };
  Mode mode = Mode::Ridge;
  double c_lambda = 0.01;  // lambda = c_lambda * n^{-1/2} unless overridden
  double lambda_h = -1.0;
  double lambda_q = -1.0;
  double condition_cap = 1e12;
  double rank_tol = -1.0;
  bool standardize_features = true;

  double resolved_lambda_h(Eigen::Index n) const {
    return lambda_h >= 0.0 ? lambda_h : c_lambda / std::sqrt(static_cast<double>(n));
  }
  double resolved_lambda_q(Eigen::Index n) const {
    return lambda_q >= 0.0 ? lambda_q : c_lambda / std::sqrt(static_cast<double>(n));
  }
};

struct CrossfitOptions {
  bool one_bridge_curves = true;
  bool one_bridge_influence = false;
  bool keep_fold_fits = false;
};

// Cross-fitted one-step CDF process with per-observation influence values,
// the one-bridge (plug-in and weighting) curves, and the shortfall process
// when levels are supplied.
struct CdfProcessEstimate {
  Grid grid;
  Grid levels;
  Eigen::Index n = 0;
  std::array<Vector, 2> cdf;
  std::array<Matrix, 2> influence;
  std::array<Vector, 2> por;
  std::array<Vector, 2> pipw;
  std::array<Matrix, 2> por_influence;
  std::array<Matrix, 2> pipw_influence;
  std::array<Vector, 2> shortfall;
  std::array<Matrix, 2> shortfall_influence;
  std::array<Vector, 2> shortfall_por;
  std::array<Vector, 2> shortfall_pipw;
  std::array<double, 2> kappa_min{std::numeric_limits<double>::infinity(),
                                  std::numeric_limits<double>::infinity()};
  std::array<double, 2> kappa_min_within_arm{std::numeric_limits<double>::infinity(),
                                             std::numeric_limits<double>::infinity()};
  std::array<double, 2> alpha_norm_max{0.0, 0.0};
  std::array<double, 2> q_weighted_norm{0.0, 0.0};
  std::vector<BridgeFit> fold_fits;  // fold-major, arm-minor when kept

  const BridgeFit& fold_fit(int fold, int arm) const {
    return fold_fits[static_cast<std::size_t>(2 * fold + arm)];
  }
};

namespace detail {

inline Matrix threshold_indicators(const Vector& y, const Grid& grid) {
  const Eigen::Index n = y.size();
  const auto k = static_cast<Eigen::Index>(grid.size());
  Matrix b = Matrix::Zero(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto first =
        std::lower_bound(grid.begin(), grid.end(), y[i]) - grid.begin();
    for (Eigen::Index j = static_cast<Eigen::Index>(first); j < k; ++j) b(i, j) = 1.0;
  }
  return b;
}

inline Matrix shortfall_values(const Vector& y, const Grid& levels) {
  const Eigen::Index n = y.size();
  const auto l = static_cast<Eigen::Index>(levels.size());
  Matrix p(n, l);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < l; ++j) {
      p(i, j) = std::max(0.0, levels[static_cast<std::size_t>(j)] - y[i]);
    }
  }
  return p;
}

inline Matrix select_rows(const Matrix& m, const std::vector<int>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = m.row(rows[r]);
  return out;
}

inline Vector select(const Vector& v, const std::vector<int>& rows) {
  Vector out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) out[static_cast<Eigen::Index>(r)] = v[rows[r]];
  return out;
}

inline IntVector select(const IntVector& v, const std::vector<int>& rows) {
  IntVector out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) out[static_cast<Eigen::Index>(r)] = v[rows[r]];
  return out;
}

inline void center_columns(Matrix* scores, Vector* means) {
  *means = scores->colwise().mean();
  scores->rowwise() -= means->transpose();
}

}  // namespace detail

inline BridgeFit solve_bridges(const MomentSystem& ms, const SolverConfig& cfg,
                               Eigen::Index n_full) {
  switch (cfg.mode) {
    case SolverConfig::Mode::Square:
      return solve_square(ms, cfg.condition_cap);
    case SolverConfig::Mode::Pinv:
      return solve_pinv(ms, cfg.rank_tol);
    case SolverConfig::Mode::Ridge:
    default:
      return solve_ridge(ms, cfg.resolved_lambda_h(n_full), cfg.resolved_lambda_q(n_full));
  }
}

inline CdfProcessEstimate crossfit_cdf(const Matrix& b_w, const Matrix& b_z, const Vector& y,
                                       const IntVector& a, const FoldPlan& folds,
                                       const Grid& grid, const Grid& levels,
                                       const SolverConfig& solver,
                                       const CrossfitOptions& opts = {}) {
  const Eigen::Index n = y.size();
  const auto k = static_cast<Eigen::Index>(grid.size());
  const auto l = static_cast<Eigen::Index>(levels.size());

  CdfProcessEstimate est;
  est.grid = grid;
  est.levels = levels;
  est.n = n;
  std::array<Matrix, 2> score, por_score, pipw_score, short_score;
  std::array<Matrix, 2> short_por, short_pipw;
  for (int arm = 0; arm < 2; ++arm) {
    const auto ai = static_cast<std::size_t>(arm);
    score[ai].resize(n, k);
    if (opts.one_bridge_curves) {
      por_score[ai].resize(n, k);
      pipw_score[ai].resize(n, k);
      if (l > 0) {
        short_por[ai].resize(n, l);
        short_pipw[ai].resize(n, l);
      }
    }
    if (l > 0) short_score[ai].resize(n, l);
  }
  std::array<Vector, 2> q_values;
  q_values[0] = Vector::Zero(n);
  q_values[1] = Vector::Zero(n);

  for (int fold = 0; fold < folds.n_folds; ++fold) {
    const std::vector<int> train = folds.complement(fold);
    std::vector<int> eval;
    for (Eigen::Index i = 0; i < n; ++i)
      if (folds.fold_of_row[static_cast<std::size_t>(i)] == fold)
        eval.push_back(static_cast<int>(i));

    Matrix bw_train = detail::select_rows(b_w, train);
    Matrix bz_train = detail::select_rows(b_z, train);
    Matrix bw_eval = detail::select_rows(b_w, eval);
    Matrix bz_eval = detail::select_rows(b_z, eval);
    if (solver.standardize_features) {
      const FeatureStandardizer sw = FeatureStandardizer::fit(bw_train);
      const FeatureStandardizer sz = FeatureStandardizer::fit(bz_train);
      bw_train = sw.apply(bw_train);
      bw_eval = sw.apply(bw_eval);
      bz_train = sz.apply(bz_train);
      bz_eval = sz.apply(bz_eval);
    }
    const Vector y_train = detail::select(y, train);
    const IntVector a_train = detail::select(a, train);
    const Vector y_eval = detail::select(y, eval);
    const Matrix b_eval = detail::threshold_indicators(y_eval, grid);
    const Matrix p_eval = (l > 0) ? detail::shortfall_values(y_eval, levels) : Matrix();

    for (int arm = 0; arm < 2; ++arm) {
      const auto ai = static_cast<std::size_t>(arm);
      MomentSystem ms;
      BridgeFit fit;
      try {
        ms = assemble_moments(arm, bw_train, bz_train, y_train, a_train, grid, levels);
        fit = solve_bridges(ms, solver, n);
      } catch (const Error& e) {
        throw Error(e.kind(), e.stage(),
                    "fold " + std::to_string(fold) + ": " + std::string(e.what()));
      }

      Eigen::JacobiSVD<Matrix> svd(ms.sigma);
      const double sigma_min = svd.singularValues()(svd.singularValues().size() - 1);
      est.kappa_min[ai] = std::min(est.kappa_min[ai], sigma_min);
      est.kappa_min_within_arm[ai] =
          std::min(est.kappa_min_within_arm[ai],
                   sigma_min * static_cast<double>(ms.n_rows) / static_cast<double>(ms.arm_rows));
      est.alpha_norm_max[ai] = std::max(est.alpha_norm_max[ai], fit.alpha.norm());

      const Matrix h_eval = bw_eval * fit.theta;          // n_k x K
      const Vector q_eval = bz_eval * fit.alpha;          // n_k
      for (std::size_t r = 0; r < eval.size(); ++r) {
        const int row = eval[r];
        const auto er = static_cast<Eigen::Index>(r);
        const bool in_arm = (a[row] == arm);
        q_values[ai][row] = q_eval[er];
        const auto h_row = h_eval.row(er);
        if (in_arm) {
          score[ai].row(row) =
              h_row + q_eval[er] * (b_eval.row(er) - h_row);
        } else {
          score[ai].row(row) = h_row;
        }
        if (opts.one_bridge_curves) {
          por_score[ai].row(row) = h_row;
          if (in_arm) {
            pipw_score[ai].row(row) = q_eval[er] * b_eval.row(er);
          } else {
            pipw_score[ai].row(row).setZero();
          }
        }
      }
      if (l > 0) {
        const Matrix r_eval = bw_eval * fit.shortfall_theta;  // n_k x L
        for (std::size_t r = 0; r < eval.size(); ++r) {
          const int row = eval[r];
          const auto er = static_cast<Eigen::Index>(r);
          const auto r_row = r_eval.row(er);
          const bool in_arm = (a[row] == arm);
          if (in_arm) {
            short_score[ai].row(row) = r_row + q_eval[er] * (p_eval.row(er) - r_row);
          } else {
            short_score[ai].row(row) = r_row;
          }
          if (opts.one_bridge_curves) {
            short_por[ai].row(row) = r_row;
            if (in_arm) {
              short_pipw[ai].row(row) = q_eval[er] * p_eval.row(er);
            } else {
              short_pipw[ai].row(row).setZero();
            }
          }
        }
      }
      if (opts.keep_fold_fits) est.fold_fits.push_back(fit);
    }
  }

  for (int arm = 0; arm < 2; ++arm) {
    const auto ai = static_cast<std::size_t>(arm);
    est.influence[ai] = std::move(score[ai]);
    detail::center_columns(&est.influence[ai], &est.cdf[ai]);
    if (opts.one_bridge_curves) {
      est.por[ai] = por_score[ai].colwise().mean();
      est.pipw[ai] = pipw_score[ai].colwise().mean();
      if (opts.one_bridge_influence) {
        est.por_influence[ai] = std::move(por_score[ai]);
        est.por_influence[ai].rowwise() -= est.por[ai].transpose();
        est.pipw_influence[ai] = std::move(pipw_score[ai]);
        est.pipw_influence[ai].rowwise() -= est.pipw[ai].transpose();
      }
    }
    if (l > 0) {
      est.shortfall_influence[ai] = std::move(short_score[ai]);
      detail::center_columns(&est.shortfall_influence[ai], &est.shortfall[ai]);
      if (opts.one_bridge_curves) {
        est.shortfall_por[ai] = short_por[ai].colwise().mean();
        est.shortfall_pipw[ai] = short_pipw[ai].colwise().mean();
      }
    }
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (a[i] == arm) acc += q_values[ai][i] * q_values[ai][i];
    est.q_weighted_norm[ai] = std::sqrt(acc / static_cast<double>(n));
  }
  return est;
}

// One-step scores evaluated with externally supplied bridge coefficients on
// the raw feature scale; used for oracle-nuisance runs and algebra checks.
inline CdfProcessEstimate onestep_with_fixed_bridges(
    const Matrix& b_w, const Matrix& b_z, const Vector& y, const IntVector& a, const Grid& grid,
    const std::array<Matrix, 2>& theta, const std::array<Vector, 2>& alpha,
    const Grid& levels = {}, const std::array<Matrix, 2>* shortfall_theta = nullptr) {
  const Eigen::Index n = y.size();
  const auto k = static_cast<Eigen::Index>(grid.size());
  const auto l = static_cast<Eigen::Index>(levels.size());
  CdfProcessEstimate est;
  est.grid = grid;
  est.levels = levels;
  est.n = n;
  const Matrix b_ind = detail::threshold_indicators(y, grid);
  const Matrix p_val = (l > 0) ? detail::shortfall_values(y, levels) : Matrix();
  for (int arm = 0; arm < 2; ++arm) {
    const auto ai = static_cast<std::size_t>(arm);
    const Matrix h = b_w * theta[ai];
    const Vector q = b_z * alpha[ai];
    Matrix score(n, k);
    Matrix pipw_score = Matrix::Zero(n, k);
    Matrix short_sc;
    Matrix r;
    if (l > 0 && shortfall_theta) {
      r = b_w * (*shortfall_theta)[ai];
      short_sc.resize(n, l);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      if (a[i] == arm) {
        score.row(i) = h.row(i) + q[i] * (b_ind.row(i) - h.row(i));
        pipw_score.row(i) = q[i] * b_ind.row(i);
        if (short_sc.size() > 0) short_sc.row(i) = r.row(i) + q[i] * (p_val.row(i) - r.row(i));
      } else {
        score.row(i) = h.row(i);
        if (short_sc.size() > 0) short_sc.row(i) = r.row(i);
      }
    }
    est.por[ai] = h.colwise().mean();
    est.pipw[ai] = pipw_score.colwise().mean();
    est.influence[ai] = std::move(score);
    detail::center_columns(&est.influence[ai], &est.cdf[ai]);
    if (short_sc.size() > 0) {
      est.shortfall_influence[ai] = std::move(short_sc);
      detail::center_columns(&est.shortfall_influence[ai], &est.shortfall[ai]);
    }
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (a[i] == arm) acc += q[i] * q[i];
    est.q_weighted_norm[ai] = std::sqrt(acc / static_cast<double>(n));
  }
  return est;
}

// Shortfall process on its own: the same cross-fitting construction with
// (t-Y)_+ in place of the threshold indicator.
inline CdfProcessEstimate shortfall_process(const Matrix& b_w, const Matrix& b_z, const Vector& y,
                                            const IntVector& a, const FoldPlan& folds,
                                            const Grid& levels, const SolverConfig& solver) {
  Grid tiny{levels.empty() ? 0.0 : levels.front()};
  return crossfit_cdf(b_w, b_z, y, a, folds, tiny, levels, solver);
}

// Lower-tail CVaR by maximizing t - S(t)/tau over the search grid.
struct CvarEstimate {
  std::vector<double> taus;
  std::array<Vector, 2> value;
  std::array<Vector, 2> maximizer;
  std::array<Vector, 2> shortfall_at_max;
  std::array<Vector, 2> se;
  std::array<std::vector<Interval>, 2> interval;
  std::array<Matrix, 2> influence;  // n x taus, chi = -eta/tau at the maximizer
  std::array<std::vector<bool>, 2> boundary_warning;
};

inline CvarEstimate cvar_estimate(const Grid& levels, const std::array<Vector, 2>& shortfall,
                                  const std::array<Matrix, 2>& shortfall_influence,
                                  const std::vector<double>& taus, double alpha = 0.05) {
  const auto l = static_cast<Eigen::Index>(levels.size());
  if (l == 0) fail_config("cvar", "empty search grid");
  CvarEstimate cv;
  cv.taus = taus;
  const auto t_count = static_cast<Eigen::Index>(taus.size());
  const double z = two_sided_z(alpha);
  for (int arm = 0; arm < 2; ++arm) {
    const auto ai = static_cast<std::size_t>(arm);
    const Eigen::Index n = shortfall_influence[ai].rows();
    cv.value[ai].resize(t_count);
    cv.maximizer[ai].resize(t_count);
    cv.shortfall_at_max[ai].resize(t_count);
    cv.se[ai].resize(t_count);
    cv.influence[ai].resize(n, t_count);
    cv.interval[ai].resize(static_cast<std::size_t>(taus.size()));
    cv.boundary_warning[ai].resize(taus.size(), false);
    for (Eigen::Index ti = 0; ti < t_count; ++ti) {
      const double tau = taus[static_cast<std::size_t>(ti)];
      Eigen::Index best = 0;
      double best_value = -std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < l; ++j) {
        const double v = levels[static_cast<std::size_t>(j)] - shortfall[ai][j] / tau;
        if (v > best_value) {
          best_value = v;
          best = j;
        }
      }
      cv.value[ai][ti] = best_value;
      cv.maximizer[ai][ti] = levels[static_cast<std::size_t>(best)];
      cv.shortfall_at_max[ai][ti] = shortfall[ai][best];
      cv.boundary_warning[ai][static_cast<std::size_t>(ti)] = (best == 0 || best == l - 1);
      cv.influence[ai].col(ti) = -shortfall_influence[ai].col(best) / tau;
      const double se = column_sd(cv.influence[ai].col(ti)) / std::sqrt(static_cast<double>(n));
      cv.se[ai][ti] = se;
      cv.interval[ai][static_cast<std::size_t>(ti)] = {best_value - z * se, best_value + z * se};
    }
  }
  return cv;
}

// Cross-fitted AIPW baseline that treats (X, Z, W) as sufficient: logistic
// propensity with clipping, linear-probability outcome models per threshold.
struct NaiveAipwEstimate {
  Grid grid;
  Grid levels;
  Eigen::Index n = 0;
  std::array<Vector, 2> cdf;
  std::array<Matrix, 2> influence;
  std::array<Vector, 2> shortfall;
  std::array<Matrix, 2> shortfall_influence;
  long clipped = 0;
};

inline NaiveAipwEstimate naive_aipw_cdf(const Matrix& features, const Vector& y,
                                        const IntVector& a, const FoldPlan& folds,
                                        const Grid& grid, const Grid& levels = {},
                                        double clip_lo = 0.03, double clip_hi = 0.97) {
  const Eigen::Index n = y.size();
  const auto k = static_cast<Eigen::Index>(grid.size());
  const auto l = static_cast<Eigen::Index>(levels.size());
  Matrix design(n, features.cols() + 1);
  design.col(0).setOnes();
  design.rightCols(features.cols()) = features;

  NaiveAipwEstimate est;
  est.grid = grid;
  est.levels = levels;
  est.n = n;
  std::array<Matrix, 2> score, short_score;
  for (int arm = 0; arm < 2; ++arm) {
    score[static_cast<std::size_t>(arm)].resize(n, k);
    if (l > 0) short_score[static_cast<std::size_t>(arm)].resize(n, l);
  }

  for (int fold = 0; fold < folds.n_folds; ++fold) {
    const std::vector<int> train = folds.complement(fold);
    std::vector<int> eval;
    for (Eigen::Index i = 0; i < n; ++i)
      if (folds.fold_of_row[static_cast<std::size_t>(i)] == fold)
        eval.push_back(static_cast<int>(i));
    const Matrix x_train = detail::select_rows(design, train);
    const Matrix x_eval = detail::select_rows(design, eval);
    const Vector y_train = detail::select(y, train);
    const Vector y_eval = detail::select(y, eval);
    const IntVector a_train = detail::select(a, train);
    const Matrix b_train = detail::threshold_indicators(y_train, grid);
    const Matrix b_eval = detail::threshold_indicators(y_eval, grid);
    const Matrix p_train = (l > 0) ? detail::shortfall_values(y_train, levels) : Matrix();
    const Matrix p_eval = (l > 0) ? detail::shortfall_values(y_eval, levels) : Matrix();

    const LogisticModel propensity = LogisticModel::fit(x_train, a_train.cast<double>());
    Vector pi_eval = propensity.predict(x_eval);
    for (Eigen::Index i = 0; i < pi_eval.size(); ++i) {
      if (pi_eval[i] < clip_lo || pi_eval[i] > clip_hi) ++est.clipped;
      pi_eval[i] = std::clamp(pi_eval[i], clip_lo, clip_hi);
    }

    for (int arm = 0; arm < 2; ++arm) {
      const auto ai = static_cast<std::size_t>(arm);
      std::vector<int> arm_rows;
      for (std::size_t r = 0; r < train.size(); ++r)
        if (a_train[static_cast<Eigen::Index>(r)] == arm) arm_rows.push_back(static_cast<int>(r));
      if (arm_rows.empty())
        fail_numeric("naive", "empty arm in training fold " + std::to_string(fold));
      const Matrix x_arm = detail::select_rows(x_train, arm_rows);
      const LinearModel outcome = LinearModel::fit(x_arm, detail::select_rows(b_train, arm_rows));
      const Matrix m_eval = outcome.predict(x_eval);
      LinearModel outcome_short;
      Matrix r_eval;
      if (l > 0) {
        outcome_short = LinearModel::fit(x_arm, detail::select_rows(p_train, arm_rows));
        r_eval = outcome_short.predict(x_eval);
      }
      for (std::size_t r = 0; r < eval.size(); ++r) {
        const int row = eval[r];
        const auto er = static_cast<Eigen::Index>(r);
        const double pia = (arm == 1) ? pi_eval[er] : 1.0 - pi_eval[er];
        const bool in_arm = (a[row] == arm);
        if (in_arm) {
          score[ai].row(row) = m_eval.row(er) + (b_eval.row(er) - m_eval.row(er)) / pia;
          if (l > 0)
            short_score[ai].row(row) = r_eval.row(er) + (p_eval.row(er) - r_eval.row(er)) / pia;
        } else {
          score[ai].row(row) = m_eval.row(er);
          if (l > 0) short_score[ai].row(row) = r_eval.row(er);
        }
      }
    }
  }
  for (int arm = 0; arm < 2; ++arm) {
    const auto ai = static_cast<std::size_t>(arm);
    est.influence[ai] = std::move(score[ai]);
    detail::center_columns(&est.influence[ai], &est.cdf[ai]);
    if (l > 0) {
      est.shortfall_influence[ai] = std::move(short_score[ai]);
      detail::center_columns(&est.shortfall_influence[ai], &est.shortfall[ai]);
    }
  }
  return est;
}

// Left-continuous grid quantile of a monotone curve; the last grid point when
// the curve never reaches tau.
inline double curve_quantile(const Grid& grid, const Vector& curve, double tau) {
  for (Eigen::Index j = 0; j < curve.size(); ++j) {
    if (curve[j] >= tau) return grid[static_cast<std::size_t>(j)];
  }
  return grid.back();
}

}  // namespace proxidist
