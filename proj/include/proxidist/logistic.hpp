#pragma once

#include <cmath>

#include "proxidist/common.hpp"
#include "proxidist/stats.hpp"

namespace proxidist {

// Logistic regression by iteratively reweighted least squares with a small
// ridge jitter so separated samples stay finite; probabilities are clipped by
// the caller.
struct LogisticModel {
  Vector coef;
  bool converged = false;

  static LogisticModel fit(const Matrix& x, const Vector& target, int max_iter = 50,
                           double tol = 1e-10, double ridge = 1e-8) {
    const Eigen::Index d = x.cols();
    LogisticModel model;
    model.coef = Vector::Zero(d);
    for (int iter = 0; iter < max_iter; ++iter) {
      const Vector eta = (x * model.coef).cwiseMax(-30.0).cwiseMin(30.0);
      Vector p(eta.size());
      for (Eigen::Index i = 0; i < eta.size(); ++i) p[i] = expit(eta[i]);
      const Vector w = p.array() * (1.0 - p.array()) + 1e-10;
      Matrix xtwx = x.transpose() * w.asDiagonal() * x;
      xtwx.diagonal().array() += ridge;
      const Vector grad = x.transpose() * (target - p) - ridge * model.coef;
      const Vector step = xtwx.ldlt().solve(grad);
      model.coef += step;
      if (step.norm() < tol * (1.0 + model.coef.norm())) {
        model.converged = true;
        break;
      }
    }
    return model;
  }

  Vector predict(const Matrix& x) const {
    const Vector eta = (x * coef).cwiseMax(-30.0).cwiseMin(30.0);
    Vector p(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) p[i] = expit(eta[i]);
    return p;
  }
};

// Ordinary least squares with multiple right-hand sides and a tiny ridge
// jitter; used for linear-probability outcome models on a threshold grid.
struct LinearModel {
  Matrix coef;  // d x K

  static LinearModel fit(const Matrix& x, const Matrix& targets, double ridge = 1e-8) {
    Matrix xtx = x.transpose() * x;
    xtx.diagonal().array() += ridge;
    LinearModel model;
    model.coef = xtx.ldlt().solve(x.transpose() * targets);
    return model;
  }

  Matrix predict(const Matrix& x) const { return x * coef; }
};

}  // namespace proxidist
