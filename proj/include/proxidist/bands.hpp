#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "proxidist/common.hpp"
#include "proxidist/rng.hpp"
#include "proxidist/stats.hpp"

namespace proxidist {

enum class MultiplierLaw { Rademacher, Gaussian };

inline std::string multiplier_law_name(MultiplierLaw law) {
  return law == MultiplierLaw::Rademacher ? "rademacher" : "gaussian";
}

// Order-statistic quantile: the ceil(q*M)-th smallest of M draws.
inline double empirical_upper_quantile(std::vector<double> draws, double q) {
  if (draws.empty()) fail_config("bands", "no multiplier draws");
  std::sort(draws.begin(), draws.end());
  const auto m = draws.size();
  auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(m)));
  idx = std::clamp<std::size_t>(idx, 1, m);
  return draws[idx - 1];
}

// max over arms of sup over grid of |n^{-1/2} sum_i xi_i phi_{a,k}(O_i)|.
inline double multiplier_sup_statistic(const std::vector<const Matrix*>& influence,
                                       const Vector& xi) {
  double sup = 0.0;
  for (const Matrix* phi : influence) {
    if (phi->rows() != xi.size()) fail_config("bands", "multiplier length mismatch");
    const Vector proj = phi->transpose() * xi;
    sup = std::max(sup, proj.cwiseAbs().maxCoeff());
  }
  return sup / std::sqrt(static_cast<double>(xi.size()));
}

// Conditional (1-alpha) quantile of the multiplier sup process over M draws.
inline double multiplier_critical_value(const std::vector<const Matrix*>& influence, int draws,
                                        double alpha, std::uint64_t seed,
                                        MultiplierLaw law = MultiplierLaw::Rademacher,
                                        std::vector<double>* all_draws = nullptr) {
  if (draws < 1) fail_config("bands", "need at least one multiplier draw");
  if (influence.empty()) fail_config("bands", "no influence matrices");
  const Eigen::Index n = influence.front()->rows();
  for (const Matrix* phi : influence) {
    if (phi->rows() != n) fail_config("bands", "influence matrices must share n");
  }
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));
  std::vector<double> stats(static_cast<std::size_t>(draws));

  // Chunked GEMM keeps the multiplier block small while staying BLAS-friendly.
  const int chunk = 64;
  Matrix xi_block;
  for (int start = 0; start < draws; start += chunk) {
    const int m = std::min(chunk, draws - start);
    xi_block.resize(n, m);
    for (int c = 0; c < m; ++c) {
      Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(start + c));
      for (Eigen::Index i = 0; i < n; ++i)
        xi_block(i, c) = (law == MultiplierLaw::Rademacher) ? rng.rademacher() : rng.normal();
    }
    Vector sup = Vector::Zero(m);
    for (const Matrix* phi : influence) {
      const Matrix proj = xi_block.transpose() * (*phi);  // m x K
      sup = sup.cwiseMax(proj.cwiseAbs().rowwise().maxCoeff());
    }
    for (int c = 0; c < m; ++c) stats[static_cast<std::size_t>(start + c)] = sup[c] * inv_sqrt_n;
  }
  if (all_draws) *all_draws = stats;
  return empirical_upper_quantile(stats, 1.0 - alpha);
}

// Simultaneous CDF band: center +- c/sqrt(n), clipped to [0,1].
struct BandSet {
  Grid grid;
  std::array<Vector, 2> center;
  std::array<Vector, 2> lower;
  std::array<Vector, 2> upper;
  double critical_value = 0.0;
  double alpha = 0.05;
  int multiplier_draws = 0;
  std::string multiplier_law = "rademacher";
};

inline BandSet cdf_band(const Grid& grid, const std::array<Vector, 2>& center, Eigen::Index n,
                        double critical_value, double alpha) {
  if (critical_value < 0.0) fail_config("bands", "critical value must be >= 0");
  BandSet band;
  band.grid = grid;
  band.center = center;
  band.critical_value = critical_value;
  band.alpha = alpha;
  const double half_width = critical_value / std::sqrt(static_cast<double>(n));
  for (int arm = 0; arm < 2; ++arm) {
    band.lower[static_cast<std::size_t>(arm)] =
        (center[static_cast<std::size_t>(arm)].array() - half_width).max(0.0);
    band.upper[static_cast<std::size_t>(arm)] =
        (center[static_cast<std::size_t>(arm)].array() + half_width).min(1.0);
  }
  return band;
}

// Running maxima U^(y) = sup_{t<=y} U(t), L^(y) = sup_{t<=y} L(t); preserves
// pointwise containment of any nondecreasing F.
inline BandSet monotone_envelope(BandSet band) {
  for (int arm = 0; arm < 2; ++arm) {
    Vector& lo = band.lower[static_cast<std::size_t>(arm)];
    Vector& up = band.upper[static_cast<std::size_t>(arm)];
    for (Eigen::Index k = 1; k < lo.size(); ++k) {
      lo[k] = std::max(lo[k], lo[k - 1]);
      up[k] = std::max(up[k], up[k - 1]);
    }
  }
  return band;
}

struct QuantileBands {
  std::vector<double> taus;
  std::array<Vector, 2> lower;  // Q^L_a
  std::array<Vector, 2> upper;  // Q^U_a
  Vector qte_lower;             // Q^L_1 - Q^U_0
  Vector qte_upper;             // Q^U_1 - Q^L_0
};

// First grid crossing of a threshold; the last grid point when the set is
// empty.
inline double grid_first_crossing(const Grid& grid, const Vector& curve, double tau) {
  for (Eigen::Index k = 0; k < curve.size(); ++k) {
    if (curve[k] >= tau) return grid[static_cast<std::size_t>(k)];
  }
  return grid.back();
}

inline QuantileBands invert_band(const BandSet& band, const std::vector<double>& taus) {
  QuantileBands qb;
  qb.taus = taus;
  const auto t = static_cast<Eigen::Index>(taus.size());
  for (int arm = 0; arm < 2; ++arm) {
    qb.lower[static_cast<std::size_t>(arm)].resize(t);
    qb.upper[static_cast<std::size_t>(arm)].resize(t);
    for (Eigen::Index k = 0; k < t; ++k) {
      qb.lower[static_cast<std::size_t>(arm)][k] = grid_first_crossing(
          band.grid, band.upper[static_cast<std::size_t>(arm)], taus[static_cast<std::size_t>(k)]);
      qb.upper[static_cast<std::size_t>(arm)][k] = grid_first_crossing(
          band.grid, band.lower[static_cast<std::size_t>(arm)], taus[static_cast<std::size_t>(k)]);
    }
  }
  qb.qte_lower = qb.lower[1] - qb.upper[0];
  qb.qte_upper = qb.upper[1] - qb.lower[0];
  return qb;
}

// Wald interval for one CDF value from its influence column, clipped to [0,1].
inline Interval pointwise_interval(double estimate, const Vector& influence_column, double alpha) {
  const auto n = influence_column.size();
  const double se = column_sd(influence_column) / std::sqrt(static_cast<double>(n));
  const double z = two_sided_z(alpha);
  return {std::max(0.0, estimate - z * se), std::min(1.0, estimate + z * se)};
}

// Gaussian-kernel density at t from the increments of a projected CDF curve;
// interval masses sit at interval midpoints.
inline double kernel_density_from_cdf(const Grid& grid, const Vector& projected_cdf, double t,
                                      double bandwidth) {
  double acc = 0.0;
  for (Eigen::Index k = 0; k + 1 < projected_cdf.size(); ++k) {
    const double mass = projected_cdf[k + 1] - projected_cdf[k];
    if (mass <= 0.0) continue;
    const double mid =
        0.5 * (grid[static_cast<std::size_t>(k)] + grid[static_cast<std::size_t>(k + 1)]);
    acc += mass * normal_pdf((t - mid) / bandwidth) / bandwidth;
  }
  return acc;
}

struct DensityDeltaInterval {
  double tau = 0.0;
  double qte = 0.0;
  Interval interval;
  std::array<double, 2> density{0.0, 0.0};
  std::array<double, 2> quantile{0.0, 0.0};
  bool density_floor_hit = false;
};

// Estimated-density Bonferroni delta benchmark for QTE intervals. Densities
// below the floor trigger a widened-to-grid-range interval.
inline std::vector<DensityDeltaInterval> estimated_density_delta_band(
    const Grid& grid, const std::array<Vector, 2>& projected_cdf,
    const std::array<const Matrix*, 2>& influence, const std::vector<double>& taus, double alpha,
    const std::array<double, 2>& bandwidth, double density_floor = 1e-3) {
  const auto n = influence[0]->rows();
  const double z = two_sided_z(alpha / static_cast<double>(taus.size()));
  const double grid_range = grid.back() - grid.front();
  std::vector<DensityDeltaInterval> out;
  out.reserve(taus.size());
  for (double tau : taus) {
    DensityDeltaInterval di;
    di.tau = tau;
    double var_sum = 0.0;
    for (int arm = 0; arm < 2; ++arm) {
      const auto ai = static_cast<std::size_t>(arm);
      const double q = grid_first_crossing(grid, projected_cdf[ai], tau);
      di.quantile[ai] = q;
      di.density[ai] = kernel_density_from_cdf(grid, projected_cdf[ai], q, bandwidth[ai]);
      Eigen::Index k = 0;
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(grid.size()); ++j) {
        const double dist = std::abs(grid[static_cast<std::size_t>(j)] - q);
        if (dist < best) {
          best = dist;
          k = j;
        }
      }
      const double col_sd = column_sd(influence[ai]->col(k));
      if (di.density[ai] < density_floor) {
        di.density_floor_hit = true;
      } else {
        var_sum += (col_sd * col_sd) / (di.density[ai] * di.density[ai]);
      }
    }
    di.qte = di.quantile[1] - di.quantile[0];
    if (di.density_floor_hit) {
      di.interval = {di.qte - grid_range, di.qte + grid_range};
    } else {
      const double se = std::sqrt(var_sum / static_cast<double>(n));
      di.interval = {di.qte - z * se, di.qte + z * se};
    }
    out.push_back(di);
  }
  return out;
}

}  // namespace proxidist
