#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "proxidist/common.hpp"

namespace proxidist {

// Empirical finite-rank moment system for one treatment arm:
//   sigma  = P_n{1{A=a} b_Z b_W^T}
//   gamma  = P_n{1{A=a} b_Z 1{Y<=y}}     per threshold column
//   rho    = P_n{1{A=a} b_Z (t-Y)_+}     per shortfall-level column
//   mu_w   = P_n b_W
// Averages run over all rows supplied; the arm indicator zeroes out the rest.
struct MomentSystem {
  int arm = 1;
  Matrix sigma;
  Matrix gamma;
  Matrix rho;
  Vector mu_w;
  Grid thresholds;
  Grid levels;
  Eigen::Index n_rows = 0;
  Eigen::Index arm_rows = 0;

  Eigen::Index d_w() const { return sigma.cols(); }
  Eigen::Index d_z() const { return sigma.rows(); }
};

inline MomentSystem assemble_moments(int arm, const Matrix& b_w, const Matrix& b_z,
                                     const Vector& y, const IntVector& a,
                                     const Grid& thresholds, const Grid& levels = {}) {
  const Eigen::Index n = y.size();
  if (b_w.rows() != n || b_z.rows() != n || a.size() != n)
    fail_config("moments", "row-count mismatch");
  if (!std::is_sorted(thresholds.begin(), thresholds.end()) ||
      !std::is_sorted(levels.begin(), levels.end()))
    fail_config("moments", "grids must be sorted ascending");

  MomentSystem ms;
  ms.arm = arm;
  ms.thresholds = thresholds;
  ms.levels = levels;
  ms.n_rows = n;

  std::vector<Eigen::Index> arm_rows;
  for (Eigen::Index i = 0; i < n; ++i)
    if (a[i] == arm) arm_rows.push_back(i);
  ms.arm_rows = static_cast<Eigen::Index>(arm_rows.size());
  if (arm_rows.empty()) fail_numeric("moments", "empty arm " + std::to_string(arm));

  const Eigen::Index d_w = b_w.cols(), d_z = b_z.cols();
  const auto m = static_cast<Eigen::Index>(arm_rows.size());
  Matrix bz_arm(m, d_z), bw_arm(m, d_w);
  Vector y_arm(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    bz_arm.row(r) = b_z.row(arm_rows[static_cast<std::size_t>(r)]);
    bw_arm.row(r) = b_w.row(arm_rows[static_cast<std::size_t>(r)]);
    y_arm[r] = y[arm_rows[static_cast<std::size_t>(r)]];
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  ms.sigma.noalias() = bz_arm.transpose() * bw_arm;
  ms.sigma *= inv_n;
  ms.mu_w = b_w.colwise().mean();

  // Sort arm rows by outcome once; gamma and rho columns become prefix sums.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index l, Eigen::Index r) { return y_arm[l] < y_arm[r]; });
  Matrix prefix_bz(m + 1, d_z);
  Matrix prefix_ybz(m + 1, d_z);
  prefix_bz.row(0).setZero();
  prefix_ybz.row(0).setZero();
  std::vector<double> y_sorted(static_cast<std::size_t>(m));
  for (Eigen::Index r = 0; r < m; ++r) {
    const Eigen::Index src = order[static_cast<std::size_t>(r)];
    y_sorted[static_cast<std::size_t>(r)] = y_arm[src];
    prefix_bz.row(r + 1) = prefix_bz.row(r) + bz_arm.row(src);
    prefix_ybz.row(r + 1) = prefix_ybz.row(r) + y_arm[src] * bz_arm.row(src);
  }

  ms.gamma.resize(d_z, static_cast<Eigen::Index>(thresholds.size()));
  for (std::size_t k = 0; k < thresholds.size(); ++k) {
    const auto it = std::upper_bound(y_sorted.begin(), y_sorted.end(), thresholds[k]);
    const auto cnt = static_cast<Eigen::Index>(it - y_sorted.begin());
    ms.gamma.col(static_cast<Eigen::Index>(k)) = prefix_bz.row(cnt).transpose() * inv_n;
  }
  ms.rho.resize(d_z, static_cast<Eigen::Index>(levels.size()));
  for (std::size_t k = 0; k < levels.size(); ++k) {
    const double t = levels[k];
    const auto it = std::upper_bound(y_sorted.begin(), y_sorted.end(), t);
    const auto cnt = static_cast<Eigen::Index>(it - y_sorted.begin());
    ms.rho.col(static_cast<Eigen::Index>(k)) =
        (t * prefix_bz.row(cnt) - prefix_ybz.row(cnt)).transpose() * inv_n;
  }
  return ms;
}

enum class SolverKind { Square, Pinv, Ridge };

// Primal/dual bridge coefficients. theta maps thresholds to the outcome-bridge
// coefficient vectors (h = b_W^T theta); alpha is the dual-bridge coefficient
// vector (q = b_Z^T alpha); shortfall_theta is the analogue of theta for the
// shortfall levels.
struct BridgeFit {
  SolverKind solver = SolverKind::Square;
  Matrix theta;            // d_W x K thresholds
  Matrix shortfall_theta;  // d_W x L levels
  Vector alpha;            // d_Z
  int effective_rank = -1;
  double lambda_h = 0.0;
  double lambda_q = 0.0;
};

inline BridgeFit solve_square(const MomentSystem& ms, double condition_cap = 1e12) {
  if (ms.d_w() != ms.d_z())
    fail_numeric("bridge", "square solver requires d_W == d_Z");
  Eigen::JacobiSVD<Matrix> svd(ms.sigma);
  const double s_max = svd.singularValues()(0);
  const double s_min = svd.singularValues()(svd.singularValues().size() - 1);
  if (!(s_min > 0.0) || s_max / s_min > condition_cap) {
    fail_numeric("bridge", "ill-conditioned moment matrix (kappa_min=" + std::to_string(s_min) +
                               "); use the ridge or pseudoinverse solver");
  }
  Eigen::PartialPivLU<Matrix> lu(ms.sigma);
  BridgeFit fit;
  fit.solver = SolverKind::Square;
  fit.theta = lu.solve(ms.gamma);
  if (ms.rho.cols() > 0) fit.shortfall_theta = lu.solve(ms.rho);
  fit.alpha = lu.transpose().solve(ms.mu_w);
  fit.effective_rank = static_cast<int>(ms.d_w());
  return fit;
}

namespace detail {

// Minimum-norm least squares via SVD with singular values below
// tol * s_max treated as zero.
struct PinvSolver {
  Eigen::JacobiSVD<Matrix> svd;
  Vector inv_s;
  int rank = 0;

  PinvSolver(const Matrix& m, double rank_tol) {
    svd.compute(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& s = svd.singularValues();
    const double s_max = s.size() > 0 ? s(0) : 0.0;
    double tol = rank_tol;
    if (tol < 0.0) {
      tol = std::numeric_limits<double>::epsilon() *
            static_cast<double>(std::max(m.rows(), m.cols()));
    }
    const double cutoff = tol * s_max;
    inv_s = Vector::Zero(s.size());
    for (Eigen::Index j = 0; j < s.size(); ++j) {
      if (s[j] > cutoff && s[j] > 0.0) {
        inv_s[j] = 1.0 / s[j];
        ++rank;
      }
    }
  }

  Matrix solve(const Matrix& rhs) const {
    return svd.matrixV() * inv_s.asDiagonal() * (svd.matrixU().transpose() * rhs);
  }

  // Solve m^T x = rhs in the minimum-norm sense: pinv(m^T) = U S^+ V^T.
  Matrix solve_transposed(const Matrix& rhs) const {
    return svd.matrixU() * inv_s.asDiagonal() * (svd.matrixV().transpose() * rhs);
  }
};

inline void check_spd(const Matrix& omega, const char* which) {
  if (omega.rows() != omega.cols()) fail_config("bridge", std::string(which) + " must be square");
  if (!omega.isApprox(omega.transpose(), 1e-10))
    fail_config("bridge", std::string(which) + " must be symmetric");
  Eigen::LLT<Matrix> llt(omega);
  if (llt.info() != Eigen::Success)
    fail_config("bridge", std::string(which) + " must be positive definite");
}

}  // namespace detail

inline BridgeFit solve_pinv(const MomentSystem& ms, double rank_tol = -1.0) {
  detail::PinvSolver solver(ms.sigma, rank_tol);
  BridgeFit fit;
  fit.solver = SolverKind::Pinv;
  fit.theta = solver.solve(ms.gamma);
  if (ms.rho.cols() > 0) fit.shortfall_theta = solver.solve(ms.rho);
  fit.alpha = solver.solve_transposed(ms.mu_w);
  fit.effective_rank = solver.rank;
  return fit;
}

// Tikhonov-regularized bridge solve with optional SPD weighting matrices:
//   theta = (Sigma^T Omega_Z Sigma + lambda_h I)^{-1} Sigma^T Omega_Z gamma
//   alpha = (Sigma Omega_W Sigma^T + lambda_q I)^{-1} Sigma Omega_W mu_W
// A zero lambda with a singular normal matrix falls back to the minimum-norm
// least-squares (Moore-Penrose) solution.
inline BridgeFit solve_ridge(const MomentSystem& ms, double lambda_h, double lambda_q,
                             const Matrix* omega_z = nullptr, const Matrix* omega_w = nullptr) {
  if (lambda_h < 0.0 || lambda_q < 0.0) fail_config("bridge", "ridge constants must be >= 0");
  if (omega_z) detail::check_spd(*omega_z, "Omega_Z");
  if (omega_w) detail::check_spd(*omega_w, "Omega_W");

  BridgeFit fit;
  fit.solver = SolverKind::Ridge;
  fit.lambda_h = lambda_h;
  fit.lambda_q = lambda_q;

  auto weighted = [](const Matrix* omega, const Matrix& m) -> Matrix {
    return omega ? Matrix(*omega * m) : m;
  };

  // Primal side.
  {
    const Matrix wz_sigma = weighted(omega_z, ms.sigma);
    Matrix normal = ms.sigma.transpose() * wz_sigma;
    normal.diagonal().array() += lambda_h;
    const Matrix rhs_y = ms.sigma.transpose() * weighted(omega_z, ms.gamma);
    const Matrix rhs_t =
        ms.rho.cols() > 0 ? Matrix(ms.sigma.transpose() * weighted(omega_z, ms.rho)) : Matrix();
    bool solved = false;
    if (lambda_h > 0.0) {
      Eigen::LDLT<Matrix> ldlt(normal);
      if (ldlt.info() == Eigen::Success) {
        fit.theta = ldlt.solve(rhs_y);
        if (ms.rho.cols() > 0) fit.shortfall_theta = ldlt.solve(rhs_t);
        solved = true;
      }
    }
    if (!solved) {
      if (omega_z) {
        const Matrix chol = Eigen::LLT<Matrix>(*omega_z).matrixL().transpose();
        detail::PinvSolver solver(chol * ms.sigma, -1.0);
        fit.theta = solver.solve(chol * ms.gamma);
        if (ms.rho.cols() > 0) fit.shortfall_theta = solver.solve(chol * ms.rho);
        fit.effective_rank = solver.rank;
      } else {
        detail::PinvSolver solver(ms.sigma, -1.0);
        fit.theta = solver.solve(ms.gamma);
        if (ms.rho.cols() > 0) fit.shortfall_theta = solver.solve(ms.rho);
        fit.effective_rank = solver.rank;
      }
    }
  }

  // Dual side.
  {
    const Matrix sigma_t = ms.sigma.transpose();
    const Matrix ww_sigma_t = weighted(omega_w, sigma_t);
    Matrix normal = ms.sigma * ww_sigma_t;
    normal.diagonal().array() += lambda_q;
    const Vector rhs = ms.sigma * (omega_w ? Vector(*omega_w * ms.mu_w) : ms.mu_w);
    bool solved = false;
    if (lambda_q > 0.0) {
      Eigen::LDLT<Matrix> ldlt(normal);
      if (ldlt.info() == Eigen::Success) {
        fit.alpha = ldlt.solve(rhs);
        solved = true;
      }
    }
    if (!solved) {
      if (omega_w) {
        const Matrix chol = Eigen::LLT<Matrix>(*omega_w).matrixL().transpose();
        detail::PinvSolver solver(chol * sigma_t, -1.0);
        fit.alpha = solver.solve(chol * ms.mu_w);
      } else {
        detail::PinvSolver solver(ms.sigma, -1.0);
        fit.alpha = solver.solve_transposed(ms.mu_w);
      }
    }
  }
  return fit;
}

// Singular spectrum of the moment matrix plus dual-bridge magnitudes.
// kappa_min_within_arm rescales by the arm share, i.e. the spectrum of the
// within-arm average E_n{b_Z b_W^T | A=a}; bridge solves are invariant to
// that scale, so it is purely a reporting convention.
struct SpectralDiagnostics {
  Vector singular_values;  // descending
  double kappa_min = 0.0;
  double kappa_min_within_arm = 0.0;
  double alpha_norm = 0.0;        // coefficient 2-norm of the dual bridge
  double q_weighted_norm = 0.0;   // (P_n{1{A=a} q^2})^{1/2}
};

inline SpectralDiagnostics spectral_diagnostics(const MomentSystem& ms, const BridgeFit& fit,
                                                const Matrix& b_z, const IntVector& a) {
  SpectralDiagnostics diag;
  Eigen::JacobiSVD<Matrix> svd(ms.sigma);
  diag.singular_values = svd.singularValues();
  diag.kappa_min = diag.singular_values(diag.singular_values.size() - 1);
  diag.kappa_min_within_arm =
      ms.arm_rows > 0 ? diag.kappa_min * static_cast<double>(ms.n_rows) /
                            static_cast<double>(ms.arm_rows)
                      : diag.kappa_min;
  diag.alpha_norm = fit.alpha.norm();
  if (b_z.rows() > 0) {
    const Vector q = b_z * fit.alpha;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < q.size(); ++i)
      if (a[i] == ms.arm) acc += q[i] * q[i];
    diag.q_weighted_norm = std::sqrt(acc / static_cast<double>(q.size()));
  }
  return diag;
}

// Partial sums m -> sum_{j<=m} l_j^2 / s_j^2 for a supplied singular-value /
// loading pair; nondecreasing in m by construction.
inline Grid picard_partial_sums(const Grid& s, const Grid& l) {
  if (s.size() != l.size()) fail_config("spectral", "sequence length mismatch");
  Grid sums(s.size());
  double acc = 0.0;
  for (std::size_t j = 0; j < s.size(); ++j) {
    acc += (l[j] * l[j]) / (s[j] * s[j]);
    sums[j] = acc;
  }
  return sums;
}

}  // namespace proxidist
