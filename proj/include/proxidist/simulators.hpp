#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "proxidist/basis.hpp"
#include "proxidist/bridge.hpp"
#include "proxidist/common.hpp"
#include "proxidist/dataset.hpp"
#include "proxidist/rng.hpp"
#include "proxidist/stats.hpp"

namespace proxidist {

// Exact finite-rank proximal design: binary covariates, latent confounder,
// binary proxies, Gaussian outcome noise.
struct Dgp1Config {
  double rho = 0.75;
  long n = 1000;
  std::uint64_t seed = 1;
};

// Same proxy calibration with a three-component Gaussian-mixture outcome
// noise that makes the counterfactual density multimodal.
struct Dgp3Config {
  double rho = 0.75;
  std::array<double, 3> mix_prob{0.45, 0.35, 0.20};
  std::array<double, 3> offset{-0.58, 0.05, 1.48};
  std::array<double, 3> scale{0.08, 0.35, 0.07};
  long n = 1000;
  std::uint64_t seed = 1;
};

// Analyst-visible dataset plus the oracle channel (potential outcomes and the
// latent confounder) used only for evaluation.
struct SimulatedData {
  Dataset data;
  Vector y0;
  Vector y1;
  std::vector<int> u;
};

namespace dgp {

inline double p_u(double x1, double x2) { return expit(-0.25 + 0.55 * x1 - 0.35 * x2); }
inline double p_z(double rho, double uc, double x1, double x2) {
  return expit(-0.15 + 2.2 * rho * uc + 0.25 * x1 - 0.15 * x2);
}
inline double p_w(double rho, double uc, double x1, double x2) {
  return expit(0.10 + 2.2 * rho * uc - 0.20 * x1 + 0.20 * x2);
}
inline double p_a(double uc, double z, double x1, double x2) {
  return expit(-0.20 + 0.80 * uc + 0.45 * z + 0.25 * x1 - 0.20 * x2);
}
inline double outcome_mean(int arm, double x1, double x2, double u, double w) {
  return 0.35 * arm + 0.35 * x1 - 0.25 * x2 + 0.75 * u + 0.25 * w + 0.20 * arm * u +
         0.15 * arm * x1;
}
inline double sigma_component1(double x1, double x2) { return 0.70 + 0.10 * x1 + 0.05 * x2; }
inline double sigma_component3(double x1, double x2) { return 0.62 + 0.09 * x1 + 0.05 * x2; }

}  // namespace dgp

namespace detail {

inline Dataset make_dataset(const std::vector<double>& y, const std::vector<int>& a,
                            const std::vector<double>& z, const std::vector<double>& w,
                            const std::vector<double>& x1, const std::vector<double>& x2) {
  Dataset ds;
  const auto n = static_cast<Eigen::Index>(y.size());
  ds.y = Eigen::Map<const Vector>(y.data(), n);
  ds.a.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) ds.a[i] = a[static_cast<std::size_t>(i)];
  ds.z = Eigen::Map<const Vector>(z.data(), n);
  ds.w = Eigen::Map<const Vector>(w.data(), n);
  ds.x_numeric.resize(n, 2);
  ds.x_numeric.col(0) = Eigen::Map<const Vector>(x1.data(), n);
  ds.x_numeric.col(1) = Eigen::Map<const Vector>(x2.data(), n);
  ds.z_names = {"z1"};
  ds.w_names = {"w1"};
  ds.x_numeric_names = {"x1", "x2"};
  return ds;
}

}  // namespace detail

inline SimulatedData gen_component1(const Dgp1Config& cfg) {
  Rng rng(cfg.seed);
  const auto n = static_cast<std::size_t>(cfg.n);
  std::vector<double> y(n), z(n), w(n), x1(n), x2(n);
  std::vector<int> a(n), u(n);
  Vector y0(static_cast<Eigen::Index>(n)), y1(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    x1[i] = rng.bernoulli(0.5);
    x2[i] = rng.bernoulli(0.5);
    u[i] = rng.bernoulli(dgp::p_u(x1[i], x2[i]));
    const double uc = 2.0 * u[i] - 1.0;
    z[i] = rng.bernoulli(dgp::p_z(cfg.rho, uc, x1[i], x2[i]));
    w[i] = rng.bernoulli(dgp::p_w(cfg.rho, uc, x1[i], x2[i]));
    a[i] = rng.bernoulli(dgp::p_a(uc, z[i], x1[i], x2[i]));
    const double sigma = dgp::sigma_component1(x1[i], x2[i]);
    const double e0 = rng.normal();
    const double e1 = rng.normal();
    y0[static_cast<Eigen::Index>(i)] = dgp::outcome_mean(0, x1[i], x2[i], u[i], w[i]) + sigma * e0;
    y1[static_cast<Eigen::Index>(i)] = dgp::outcome_mean(1, x1[i], x2[i], u[i], w[i]) + sigma * e1;
    y[i] = a[i] ? y1[static_cast<Eigen::Index>(i)] : y0[static_cast<Eigen::Index>(i)];
  }
  SimulatedData sim;
  sim.data = detail::make_dataset(y, a, z, w, x1, x2);
  sim.y0 = std::move(y0);
  sim.y1 = std::move(y1);
  sim.u = std::move(u);
  return sim;
}

inline SimulatedData gen_component3(const Dgp3Config& cfg) {
  Rng rng(cfg.seed);
  const auto n = static_cast<std::size_t>(cfg.n);
  const double cum[3] = {cfg.mix_prob[0], cfg.mix_prob[0] + cfg.mix_prob[1], 1.0};
  std::vector<double> y(n), z(n), w(n), x1(n), x2(n);
  std::vector<int> a(n), u(n);
  Vector y0(static_cast<Eigen::Index>(n)), y1(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    x1[i] = rng.bernoulli(0.5);
    x2[i] = rng.bernoulli(0.5);
    u[i] = rng.bernoulli(dgp::p_u(x1[i], x2[i]));
    const double uc = 2.0 * u[i] - 1.0;
    z[i] = rng.bernoulli(dgp::p_z(cfg.rho, uc, x1[i], x2[i]));
    w[i] = rng.bernoulli(dgp::p_w(cfg.rho, uc, x1[i], x2[i]));
    a[i] = rng.bernoulli(dgp::p_a(uc, z[i], x1[i], x2[i]));
    const double sigma = dgp::sigma_component3(x1[i], x2[i]);
    for (int arm = 0; arm < 2; ++arm) {
      const int label = rng.categorical(cum, 3);
      const double eps = cfg.offset[static_cast<std::size_t>(label)] +
                         sigma * cfg.scale[static_cast<std::size_t>(label)] * rng.normal();
      const double val = dgp::outcome_mean(arm, x1[i], x2[i], u[i], w[i]) + eps;
      if (arm == 0) y0[static_cast<Eigen::Index>(i)] = val;
      else y1[static_cast<Eigen::Index>(i)] = val;
    }
    y[i] = a[i] ? y1[static_cast<Eigen::Index>(i)] : y0[static_cast<Eigen::Index>(i)];
  }
  SimulatedData sim;
  sim.data = detail::make_dataset(y, a, z, w, x1, x2);
  sim.y0 = std::move(y0);
  sim.y1 = std::move(y1);
  sim.u = std::move(u);
  return sim;
}

// Monte-Carlo truth: empirical CDF/quantiles/lower-tail CVaR of the potential
// outcomes, with the sorted draws retained for truth queries at arbitrary
// thresholds.
struct TruthTable {
  Grid grid;
  std::vector<double> taus;
  std::array<Vector, 2> cdf;
  std::array<Vector, 2> quantile;
  std::array<Vector, 2> cvar;
  std::array<std::vector<double>, 2> sorted_draws;
  long n_truth = 0;
  std::uint64_t seed = 0;

  double cdf_at(int arm, double y) const {
    const auto& draws = sorted_draws[static_cast<std::size_t>(arm)];
    const auto it = std::upper_bound(draws.begin(), draws.end(), y);
    return static_cast<double>(it - draws.begin()) / static_cast<double>(draws.size());
  }
  double quantile_at(int arm, double tau) const {
    const auto& draws = sorted_draws[static_cast<std::size_t>(arm)];
    return quantile_sorted(draws, tau);
  }
};

struct DgpVariant {
  int component = 1;  // 1 or 3
  Dgp1Config c1;
  Dgp3Config c3;
};

namespace detail {

// Draws only the potential outcomes (X, U, W and noise); treatment-side
// variables are irrelevant for the counterfactual law.
inline void draw_potentials(Rng* rng, const DgpVariant& variant, double* out0, double* out1) {
  const double rho = (variant.component == 1) ? variant.c1.rho : variant.c3.rho;
  const double x1 = rng->bernoulli(0.5);
  const double x2 = rng->bernoulli(0.5);
  const int u = rng->bernoulli(dgp::p_u(x1, x2));
  const double uc = 2.0 * u - 1.0;
  const double w = rng->bernoulli(dgp::p_w(rho, uc, x1, x2));
  if (variant.component == 1) {
    const double sigma = dgp::sigma_component1(x1, x2);
    *out0 = dgp::outcome_mean(0, x1, x2, u, w) + sigma * rng->normal();
    *out1 = dgp::outcome_mean(1, x1, x2, u, w) + sigma * rng->normal();
  } else {
    const auto& cfg = variant.c3;
    const double cum[3] = {cfg.mix_prob[0], cfg.mix_prob[0] + cfg.mix_prob[1], 1.0};
    const double sigma = dgp::sigma_component3(x1, x2);
    for (int arm = 0; arm < 2; ++arm) {
      const int label = rng->categorical(cum, 3);
      const double eps = cfg.offset[static_cast<std::size_t>(label)] +
                         sigma * cfg.scale[static_cast<std::size_t>(label)] * rng->normal();
      const double val = dgp::outcome_mean(arm, x1, x2, u, w) + eps;
      if (arm == 0) *out0 = val;
      else *out1 = val;
    }
  }
}

}  // namespace detail

inline TruthTable truth_oracle(const DgpVariant& variant, const Grid& grid,
                               const std::vector<double>& taus, long n_truth,
                               std::uint64_t seed) {
  if (n_truth < 10000) fail_config("truth", "n_truth must be at least 1e4");
  TruthTable truth;
  truth.grid = grid;
  truth.taus = taus;
  truth.n_truth = n_truth;
  truth.seed = seed;
  auto& d0 = truth.sorted_draws[0];
  auto& d1 = truth.sorted_draws[1];
  d0.resize(static_cast<std::size_t>(n_truth));
  d1.resize(static_cast<std::size_t>(n_truth));
  Rng rng = Rng::stream(seed, 0x72d7ull);
  for (long i = 0; i < n_truth; ++i) {
    detail::draw_potentials(&rng, variant, &d0[static_cast<std::size_t>(i)],
                            &d1[static_cast<std::size_t>(i)]);
  }
  std::sort(d0.begin(), d0.end());
  std::sort(d1.begin(), d1.end());
  for (int arm = 0; arm < 2; ++arm) {
    const auto ai = static_cast<std::size_t>(arm);
    truth.cdf[ai].resize(static_cast<Eigen::Index>(grid.size()));
    for (std::size_t k = 0; k < grid.size(); ++k)
      truth.cdf[ai][static_cast<Eigen::Index>(k)] = truth.cdf_at(arm, grid[k]);
    truth.quantile[ai].resize(static_cast<Eigen::Index>(taus.size()));
    truth.cvar[ai].resize(static_cast<Eigen::Index>(taus.size()));
    const auto& draws = truth.sorted_draws[ai];
    for (std::size_t t = 0; t < taus.size(); ++t) {
      truth.quantile[ai][static_cast<Eigen::Index>(t)] = quantile_sorted(draws, taus[t]);
      const auto m = static_cast<std::size_t>(
          std::ceil(taus[t] * static_cast<double>(draws.size())));
      double acc = 0.0;
      for (std::size_t i = 0; i < m; ++i) acc += draws[i];
      truth.cvar[ai][static_cast<Eigen::Index>(t)] =
          m > 0 ? acc / static_cast<double>(m) : draws.front();
    }
  }
  return truth;
}

// Exact population quantities for the finite-rank design: the support of
// (X1, X2, U, Z, W) has 32 cells, and the outcome is conditionally Gaussian,
// so moments, bridges, and counterfactual functionals are available in closed
// form. The multilinear basis over the binary block saturates the cell space,
// so the population bridge solves are the true bridge functions.
class Component1Oracle {
 public:
  explicit Component1Oracle(double rho) : rho_(rho) {
    int idx = 0;
    for (int x1 = 0; x1 < 2; ++x1)
      for (int x2 = 0; x2 < 2; ++x2)
        for (int u = 0; u < 2; ++u)
          for (int z = 0; z < 2; ++z)
            for (int w = 0; w < 2; ++w) {
              Cell& c = cells_[static_cast<std::size_t>(idx++)];
              c.x1 = x1;
              c.x2 = x2;
              c.u = u;
              c.z = z;
              c.w = w;
              const double uc = 2.0 * u - 1.0;
              const double pu = dgp::p_u(x1, x2);
              const double pz = dgp::p_z(rho, uc, x1, x2);
              const double pw = dgp::p_w(rho, uc, x1, x2);
              c.prob = 0.25 * (u ? pu : 1.0 - pu) * (z ? pz : 1.0 - pz) * (w ? pw : 1.0 - pw);
              c.p_a1 = dgp::p_a(uc, z, x1, x2);
              c.mean[0] = dgp::outcome_mean(0, x1, x2, u, w);
              c.mean[1] = dgp::outcome_mean(1, x1, x2, u, w);
              c.sigma = dgp::sigma_component1(x1, x2);
            }
  }

  // Multilinear features over (v, x1, x2): all products of distinct factors.
  static Vector multilinear(double v, double x1, double x2) {
    Vector b(8);
    b << 1.0, v, x1, x2, v * x1, v * x2, x1 * x2, v * x1 * x2;
    return b;
  }

  double treated_probability() const {
    double acc = 0.0;
    for (const Cell& c : cells_) acc += c.prob * c.p_a1;
    return acc;
  }

  double cdf(int arm, double y) const {
    double acc = 0.0;
    for (const Cell& c : cells_)
      acc += c.prob * normal_cdf((y - c.mean[static_cast<std::size_t>(arm)]) / c.sigma);
    return acc;
  }

  double quantile(int arm, double tau) const {
    double lo = -20.0, hi = 20.0;
    for (int iter = 0; iter < 200; ++iter) {
      const double mid = 0.5 * (lo + hi);
      (cdf(arm, mid) < tau ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }

  // E(t - Y(a))_+ via the Gaussian partial expectation in each cell.
  double shortfall(int arm, double t) const {
    double acc = 0.0;
    for (const Cell& c : cells_) {
      const double zscore = (t - c.mean[static_cast<std::size_t>(arm)]) / c.sigma;
      acc += c.prob * ((t - c.mean[static_cast<std::size_t>(arm)]) * normal_cdf(zscore) +
                       c.sigma * normal_pdf(zscore));
    }
    return acc;
  }

  double cvar(int arm, double tau) const {
    const double q = quantile(arm, tau);
    return q - shortfall(arm, q) / tau;
  }

  Matrix population_sigma(int arm) const {
    Matrix sigma = Matrix::Zero(8, 8);
    for (const Cell& c : cells_) {
      const double pa = arm ? c.p_a1 : 1.0 - c.p_a1;
      sigma.noalias() +=
          c.prob * pa * multilinear(c.z, c.x1, c.x2) * multilinear(c.w, c.x1, c.x2).transpose();
    }
    return sigma;
  }

  Vector population_gamma(int arm, double y) const {
    Vector g = Vector::Zero(8);
    for (const Cell& c : cells_) {
      const double pa = arm ? c.p_a1 : 1.0 - c.p_a1;
      g += c.prob * pa * normal_cdf((y - c.mean[static_cast<std::size_t>(arm)]) / c.sigma) *
           multilinear(c.z, c.x1, c.x2);
    }
    return g;
  }

  Vector population_rho(int arm, double t) const {
    Vector g = Vector::Zero(8);
    for (const Cell& c : cells_) {
      const double pa = arm ? c.p_a1 : 1.0 - c.p_a1;
      const double zscore = (t - c.mean[static_cast<std::size_t>(arm)]) / c.sigma;
      const double partial = (t - c.mean[static_cast<std::size_t>(arm)]) * normal_cdf(zscore) +
                             c.sigma * normal_pdf(zscore);
      g += c.prob * pa * partial * multilinear(c.z, c.x1, c.x2);
    }
    return g;
  }

  Vector population_mu_w() const {
    Vector mu = Vector::Zero(8);
    for (const Cell& c : cells_) mu += c.prob * multilinear(c.w, c.x1, c.x2);
    return mu;
  }

  // True bridge coefficients in the raw multilinear basis.
  Matrix true_theta(int arm, const Grid& grid) const {
    const Matrix sigma = population_sigma(arm);
    Matrix gamma(8, static_cast<Eigen::Index>(grid.size()));
    for (std::size_t k = 0; k < grid.size(); ++k)
      gamma.col(static_cast<Eigen::Index>(k)) = population_gamma(arm, grid[k]);
    return sigma.partialPivLu().solve(gamma);
  }

  Matrix true_shortfall_theta(int arm, const Grid& levels) const {
    const Matrix sigma = population_sigma(arm);
    Matrix rho(8, static_cast<Eigen::Index>(levels.size()));
    for (std::size_t k = 0; k < levels.size(); ++k)
      rho.col(static_cast<Eigen::Index>(k)) = population_rho(arm, levels[k]);
    return sigma.partialPivLu().solve(rho);
  }

  Vector true_alpha(int arm) const {
    return population_sigma(arm).transpose().partialPivLu().solve(population_mu_w());
  }

 private:
  struct Cell {
    int x1, x2, u, z, w;
    double prob;
    double p_a1;
    std::array<double, 2> mean;
    double sigma;
  };
  double rho_;
  std::array<Cell, 32> cells_;
};

// Multilinear degree-3 features in (proxy, x1, x2) used by the component
// estimators; powers of binary variables collapse, so the basis saturates the
// eight-cell function space.
inline Matrix component_features(const Matrix& proxy, const Matrix& x) {
  const Eigen::Index n = proxy.rows();
  Matrix vars(n, 3);
  vars.col(0) = proxy.col(0);
  vars.col(1) = x.col(0);
  vars.col(2) = x.col(1);
  BasisSpec spec;
  spec.kind = BasisKind::Polynomial;
  spec.degree = 3;
  spec.collapse_binary_powers = true;
  return build_basis(spec, vars, {"p", "x1", "x2"}).values;
}

}  // namespace proxidist
