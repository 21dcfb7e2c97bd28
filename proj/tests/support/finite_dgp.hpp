#pragma once

// Discrete proximal design with binary (U, Z, W, A, Y). The observed support
// has 16 atoms, so every population expectation used by the tests is an exact
// finite sum. Bases are (1, Z) and (1, W); both are saturated in their
// arguments, so the 2x2 population moment solves recover the true bridge
// functions.

#include <array>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "proxidist/bridge.hpp"
#include "proxidist/common.hpp"
#include "proxidist/rng.hpp"

namespace testsupport {

using proxidist::Matrix;
using proxidist::Vector;

struct FiniteDgp {
  double p_u1 = 0.40;
  std::array<double, 2> p_z_given_u{0.30, 0.80};
  std::array<double, 2> p_w_given_u{0.25, 0.70};
  // [u][z]
  std::array<std::array<double, 2>, 2> p_a1_given_uz{{{0.35, 0.55}, {0.45, 0.75}}};
  // [a][u][w] probability that Y(a) = 1
  std::array<std::array<std::array<double, 2>, 2>, 2> p_y1{
      {{{{0.30, 0.50}, {0.60, 0.80}}}, {{{0.45, 0.60}, {0.70, 0.90}}}}};

  struct Atom {
    int u, z, w, a, y;
    double prob;
  };

  // All 64 latent atoms (u, z, w, a, y); observed atoms collapse u.
  std::vector<Atom> atoms() const {
    std::vector<Atom> out;
    for (int u = 0; u < 2; ++u)
      for (int z = 0; z < 2; ++z)
        for (int w = 0; w < 2; ++w)
          for (int a = 0; a < 2; ++a)
            for (int y = 0; y < 2; ++y) {
              const double pu = u ? p_u1 : 1.0 - p_u1;
              const double pz = z ? p_z_given_u[u] : 1.0 - p_z_given_u[u];
              const double pw = w ? p_w_given_u[u] : 1.0 - p_w_given_u[u];
              const double pa = a ? p_a1_given_uz[u][z] : 1.0 - p_a1_given_uz[u][z];
              const double py = y ? p_y1[a][u][w] : 1.0 - p_y1[a][u][w];
              out.push_back({u, z, w, a, y, pu * pz * pw * pa * py});
            }
    return out;
  }

  // P(Y(a) = 0) -- the counterfactual CDF at threshold 0 for Y in {0,1}.
  double cdf_at_zero(int arm) const {
    double acc = 0.0;
    for (int u = 0; u < 2; ++u)
      for (int w = 0; w < 2; ++w) {
        const double pu = u ? p_u1 : 1.0 - p_u1;
        const double pw = w ? p_w_given_u[u] : 1.0 - p_w_given_u[u];
        acc += pu * pw * (1.0 - p_y1[arm][u][w]);
      }
    return acc;
  }

  // E S_a(t) = E (t - Y(a))_+ for Y in {0,1}.
  double shortfall(int arm, double t) const {
    double acc = 0.0;
    for (int u = 0; u < 2; ++u)
      for (int w = 0; w < 2; ++w) {
        const double pu = u ? p_u1 : 1.0 - p_u1;
        const double pw = w ? p_w_given_u[u] : 1.0 - p_w_given_u[u];
        const double p1 = p_y1[arm][u][w];
        acc += pu * pw * ((1.0 - p1) * std::max(0.0, t) + p1 * std::max(0.0, t - 1.0));
      }
    return acc;
  }

  Matrix population_sigma(int arm) const {
    Matrix sigma = Matrix::Zero(2, 2);
    for (const Atom& at : atoms()) {
      if (at.a != arm) continue;
      Vector bz(2), bw(2);
      bz << 1.0, at.z;
      bw << 1.0, at.w;
      sigma += at.prob * bz * bw.transpose();
    }
    return sigma;
  }

  // gamma at threshold 0: E{1{A=a} b_Z 1{Y<=0}}.
  Vector population_gamma(int arm) const {
    Vector g = Vector::Zero(2);
    for (const Atom& at : atoms()) {
      if (at.a != arm || at.y != 0) continue;
      Vector bz(2);
      bz << 1.0, at.z;
      g += at.prob * bz;
    }
    return g;
  }

  Vector population_rho(int arm, double t) const {
    Vector g = Vector::Zero(2);
    for (const Atom& at : atoms()) {
      if (at.a != arm) continue;
      const double positive_part = std::max(0.0, t - static_cast<double>(at.y));
      Vector bz(2);
      bz << 1.0, at.z;
      g += at.prob * positive_part * bz;
    }
    return g;
  }

  Vector population_mu_w() const {
    Vector mu = Vector::Zero(2);
    for (const Atom& at : atoms()) {
      Vector bw(2);
      bw << 1.0, at.w;
      mu += at.prob * bw;
    }
    return mu;
  }

  proxidist::MomentSystem population_moments(int arm, double shortfall_level = 0.5) const {
    proxidist::MomentSystem ms;
    ms.arm = arm;
    ms.sigma = population_sigma(arm);
    ms.gamma = population_gamma(arm);
    ms.rho = population_rho(arm, shortfall_level);
    ms.mu_w = population_mu_w();
    ms.thresholds = {0.0};
    ms.levels = {shortfall_level};
    ms.n_rows = 1;
    return ms;
  }

  // True bridge coefficients from the saturated 2x2 population system.
  Vector true_theta(int arm) const {
    return population_sigma(arm).partialPivLu().solve(population_gamma(arm));
  }
  Vector true_shortfall_theta(int arm, double t) const {
    return population_sigma(arm).partialPivLu().solve(population_rho(arm, t));
  }
  Vector true_alpha(int arm) const {
    return population_sigma(arm).transpose().partialPivLu().solve(population_mu_w());
  }

  // E[hbar(W) + 1{A=a} qbar(Z) (1{Y<=0} - hbar(W))] with linear coefficient
  // vectors hbar = (c0, c1), qbar = (d0, d1).
  double dr_functional(int arm, const Vector& hbar, const Vector& qbar) const {
    double acc = 0.0;
    for (const Atom& at : atoms()) {
      const double h = hbar[0] + hbar[1] * at.w;
      const double q = qbar[0] + qbar[1] * at.z;
      const double b = (at.y == 0) ? 1.0 : 0.0;
      double score = h;
      if (at.a == arm) score += q * (b - h);
      acc += at.prob * score;
    }
    return acc;
  }

  // Shortfall analogue of the doubly robust functional at level t.
  double dr_shortfall_functional(int arm, double t, const Vector& rbar,
                                 const Vector& qbar) const {
    double acc = 0.0;
    for (const Atom& at : atoms()) {
      const double r = rbar[0] + rbar[1] * at.w;
      const double q = qbar[0] + qbar[1] * at.z;
      const double pp = std::max(0.0, t - static_cast<double>(at.y));
      double score = r;
      if (at.a == arm) score += q * (pp - r);
      acc += at.prob * score;
    }
    return acc;
  }

  // -E[1{A=a} (qbar - q)(Z) (hbar - h)(W)]: the product-form drift.
  double drift_product(int arm, const Vector& hbar, const Vector& qbar, const Vector& h_true,
                       const Vector& q_true) const {
    double acc = 0.0;
    for (const Atom& at : atoms()) {
      if (at.a != arm) continue;
      const double dq = (qbar[0] - q_true[0]) + (qbar[1] - q_true[1]) * at.z;
      const double dh = (hbar[0] - h_true[0]) + (hbar[1] - h_true[1]) * at.w;
      acc += at.prob * dq * dh;
    }
    return -acc;
  }

  // Seeded sample from the joint law; returns column blocks for estimators.
  struct Sample {
    Vector y;
    proxidist::IntVector a;
    Matrix z, w;
  };
  Sample sample(long n, std::uint64_t seed) const {
    proxidist::Rng rng(seed);
    Sample s;
    s.y.resize(n);
    s.a.resize(n);
    s.z.resize(n, 1);
    s.w.resize(n, 1);
    for (long i = 0; i < n; ++i) {
      const int u = rng.bernoulli(p_u1);
      const int z = rng.bernoulli(p_z_given_u[u]);
      const int w = rng.bernoulli(p_w_given_u[u]);
      const int a = rng.bernoulli(p_a1_given_uz[u][z]);
      const int y = rng.bernoulli(p_y1[a][u][w]);
      s.y[i] = y;
      s.a[i] = a;
      s.z(i, 0) = z;
      s.w(i, 0) = w;
    }
    return s;
  }
};

}  // namespace testsupport
