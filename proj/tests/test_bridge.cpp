#include <gtest/gtest.h>

#include <cmath>

#include "proxidist/bridge.hpp"
#include "proxidist/rng.hpp"

using namespace proxidist;

namespace {

// Random square system with continuous features; redraws until comfortably
// conditioned.
struct RandomInstance {
  Matrix b_w, b_z;
  Vector y;
  IntVector a;
  MomentSystem ms;
};

RandomInstance random_square_instance(int n, int d, std::uint64_t seed, const Grid& thresholds,
                                      const Grid& levels = {}) {
  Rng rng(seed);
  for (int attempt = 0; attempt < 50; ++attempt) {
    RandomInstance inst;
    inst.b_w.resize(n, d);
    inst.b_z.resize(n, d);
    inst.y.resize(n);
    inst.a.resize(n);
    for (int i = 0; i < n; ++i) {
      const double latent = rng.normal();
      inst.b_w(i, 0) = 1.0;
      inst.b_z(i, 0) = 1.0;
      for (int j = 1; j < d; ++j) {
        inst.b_w(i, j) = 0.8 * latent + rng.normal();
        inst.b_z(i, j) = 0.8 * latent + rng.normal();
      }
      inst.a[i] = rng.bernoulli(0.5);
      inst.y[i] = latent + rng.normal();
    }
    inst.ms = assemble_moments(1, inst.b_w, inst.b_z, inst.y, inst.a, thresholds, levels);
    Eigen::JacobiSVD<Matrix> svd(inst.ms.sigma);
    const auto& sv = svd.singularValues();
    if (sv(sv.size() - 1) > 1e-4 * sv(0)) return inst;
  }
  throw std::runtime_error("could not draw a well-conditioned instance");
}

}  // namespace

TEST(AssembleMoments, TwoRowInterceptOnly) {
  Matrix b_w(2, 1), b_z(2, 1);
  b_w.setOnes();
  b_z.setOnes();
  Vector y(2);
  y << 0.0, 5.0;
  IntVector a(2);
  a << 1, 0;
  const MomentSystem ms = assemble_moments(1, b_w, b_z, y, a, {0.0});
  EXPECT_DOUBLE_EQ(ms.sigma(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(ms.mu_w[0], 1.0);
  EXPECT_DOUBLE_EQ(ms.gamma(0, 0), 0.5);
  EXPECT_EQ(ms.arm_rows, 1);
}

TEST(AssembleMoments, IndicatorSaturatesAboveMaxOutcome) {
  Rng rng(21);
  const int n = 60;
  Matrix b_w(n, 2), b_z(n, 2);
  Vector y(n);
  IntVector a(n);
  for (int i = 0; i < n; ++i) {
    b_w(i, 0) = 1.0;
    b_z(i, 0) = 1.0;
    b_w(i, 1) = rng.normal();
    b_z(i, 1) = rng.normal();
    y[i] = rng.normal();
    a[i] = rng.bernoulli(0.5);
  }
  const double top = y.maxCoeff() + 1.0;
  const MomentSystem ms = assemble_moments(1, b_w, b_z, y, a, {top}, {y.minCoeff() - 0.5});
  Vector direct = Vector::Zero(2);
  for (int i = 0; i < n; ++i)
    if (a[i] == 1) direct += b_z.row(i).transpose();
  direct /= n;
  EXPECT_NEAR((ms.gamma.col(0) - direct).norm(), 0.0, 1e-14);
  // Levels at or below the minimum outcome give a vanishing positive part.
  EXPECT_NEAR(ms.rho.col(0).norm(), 0.0, 1e-14);
}

TEST(AssembleMoments, NondecreasingGammaForNonnegativeBasis) {
  Rng rng(22);
  const int n = 80;
  Matrix b_w(n, 2), b_z(n, 2);
  Vector y(n);
  IntVector a(n);
  for (int i = 0; i < n; ++i) {
    const int w = rng.bernoulli(0.4), z = rng.bernoulli(0.6);
    b_w(i, 0) = 1.0 - w;
    b_w(i, 1) = w;
    b_z(i, 0) = 1.0 - z;
    b_z(i, 1) = z;
    y[i] = rng.normal();
    a[i] = rng.bernoulli(0.5);
  }
  const Grid grid{-1.0, -0.3, 0.0, 0.4, 1.2};
  const MomentSystem ms = assemble_moments(0, b_w, b_z, y, a, grid);
  for (Eigen::Index j = 0; j < 2; ++j) {
    for (std::size_t k = 1; k < grid.size(); ++k) {
      EXPECT_GE(ms.gamma(j, static_cast<Eigen::Index>(k)),
                ms.gamma(j, static_cast<Eigen::Index>(k - 1)) - 1e-15);
    }
  }
}

TEST(AssembleMoments, EmptyArmIsError) {
  Matrix b(2, 1);
  b.setOnes();
  Vector y(2);
  y << 0.0, 1.0;
  IntVector a(2);
  a << 1, 1;
  EXPECT_THROW(assemble_moments(0, b, b, y, a, {0.0}), Error);
}

TEST(SolveSquare, IdentityAndDiagonalExamples) {
  MomentSystem ms;
  ms.sigma = Matrix::Identity(2, 2);
  ms.gamma.resize(2, 1);
  ms.gamma << 0.3, 0.5;
  ms.mu_w.resize(2);
  ms.mu_w << 1.0, 0.0;
  ms.thresholds = {0.0};
  const BridgeFit fit = solve_square(ms);
  EXPECT_NEAR(fit.theta(0, 0), 0.3, 1e-14);
  EXPECT_NEAR(fit.theta(1, 0), 0.5, 1e-14);
  EXPECT_NEAR(fit.alpha[0], 1.0, 1e-14);

  ms.sigma = Vector::LinSpaced(2, 2.0, 4.0).asDiagonal();
  ms.mu_w << 1.0, 1.0;
  const BridgeFit diag = solve_square(ms);
  EXPECT_NEAR(diag.alpha[0], 0.5, 1e-14);
  EXPECT_NEAR(diag.alpha[1], 0.25, 1e-14);
}

TEST(SolveSquare, ResidualOracleOnRandomInstances) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto inst = random_square_instance(400, 5, seed, {-0.5, 0.0, 0.5});
    const BridgeFit fit = solve_square(inst.ms);
    const double scale = inst.ms.sigma.norm();
    EXPECT_LE((inst.ms.sigma * fit.theta - inst.ms.gamma).norm(), 1e-10 * std::max(1.0, scale));
    EXPECT_LE((inst.ms.sigma.transpose() * fit.alpha - inst.ms.mu_w).norm(),
              1e-10 * std::max(1.0, scale));
  }
}

TEST(SolveSquare, IllConditionedAdvisesRidge) {
  MomentSystem ms;
  ms.sigma.resize(2, 2);
  ms.sigma << 1.0, 1.0, 1.0, 1.0 + 1e-15;
  ms.gamma.resize(2, 1);
  ms.gamma << 1.0, 1.0;
  ms.mu_w.resize(2);
  ms.mu_w << 1.0, 1.0;
  ms.thresholds = {0.0};
  try {
    solve_square(ms);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Numerical);
    EXPECT_NE(std::string(e.what()).find("ridge"), std::string::npos);
  }
}

TEST(SolveRidge, DiagonalShrinkage) {
  MomentSystem ms;
  ms.sigma = Matrix::Zero(2, 2);
  ms.sigma(0, 0) = 2.0;
  ms.sigma(1, 1) = 1.0;
  ms.gamma.resize(2, 1);
  ms.gamma << 2.0, 1.0;
  ms.mu_w.resize(2);
  ms.mu_w << 1.0, 1.0;
  ms.thresholds = {0.0};
  const BridgeFit fit = solve_ridge(ms, 1.0, 0.0);
  EXPECT_NEAR(fit.theta(0, 0), 0.8, 1e-12);
  EXPECT_NEAR(fit.theta(1, 0), 0.5, 1e-12);
}

TEST(SolveRidge, ContinuousAtZeroLambda) {
  const auto inst = random_square_instance(300, 4, 77, {0.0});
  const BridgeFit exact = solve_square(inst.ms);
  const BridgeFit tiny = solve_ridge(inst.ms, 1e-12, 1e-12);
  EXPECT_LE((exact.theta - tiny.theta).norm(), 1e-8);
  // The dual normal matrix squares the conditioning, so its gap floor is
  // larger by the same factor.
  EXPECT_LE((exact.alpha - tiny.alpha).norm(), 1e-6);
}

TEST(SolveRidge, ZeroLambdaSingularFallsBackToMinimumNorm) {
  MomentSystem ms;
  ms.sigma.resize(2, 2);
  ms.sigma << 1.0, 0.0, 0.0, 0.0;
  ms.gamma.resize(2, 1);
  ms.gamma << 1.0, 0.0;
  ms.mu_w.resize(2);
  ms.mu_w << 1.0, 0.0;
  ms.thresholds = {0.0};
  const BridgeFit fit = solve_ridge(ms, 0.0, 0.0);
  EXPECT_NEAR(fit.theta(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(fit.theta(1, 0), 0.0, 1e-12);
}

TEST(SolveRidge, RejectsNonSpdWeights) {
  MomentSystem ms;
  ms.sigma = Matrix::Identity(2, 2);
  ms.gamma = Matrix::Ones(2, 1);
  ms.mu_w = Vector::Ones(2);
  ms.thresholds = {0.0};
  Matrix omega(2, 2);
  omega << 1.0, 2.0, 2.0, 1.0;  // symmetric, indefinite
  EXPECT_THROW(solve_ridge(ms, 0.5, 0.5, &omega, nullptr), Error);
  Matrix asym(2, 2);
  asym << 1.0, 0.5, -0.5, 1.0;
  EXPECT_THROW(solve_ridge(ms, 0.5, 0.5, nullptr, &asym), Error);
}

TEST(SolveRidge, NormalEquationResidualTiny) {
  Rng rng(5);
  const auto inst = random_square_instance(300, 4, 13, {-0.2, 0.3});
  Matrix omega = Matrix::Identity(4, 4);
  for (int j = 0; j < 4; ++j) omega(j, j) = 1.0 + 0.5 * rng.uniform();
  for (double lambda : {0.0, 1e-4, 0.1, 3.0}) {
    const BridgeFit fit = solve_ridge(inst.ms, lambda, lambda, &omega, &omega);
    const Matrix normal =
        inst.ms.sigma.transpose() * omega * inst.ms.sigma + lambda * Matrix::Identity(4, 4);
    const Matrix rhs = inst.ms.sigma.transpose() * omega * inst.ms.gamma;
    EXPECT_LE((normal * fit.theta - rhs).norm(), 1e-10 * std::max(1.0, rhs.norm()))
        << "lambda=" << lambda;
  }
}

TEST(SolvePinv, MinimumNormRectangular) {
  MomentSystem ms;
  ms.sigma.resize(1, 2);
  ms.sigma << 1.0, 0.0;
  ms.gamma.resize(1, 1);
  ms.gamma << 1.0;
  ms.mu_w.resize(2);
  ms.mu_w << 1.0, 0.0;
  ms.thresholds = {0.0};
  const BridgeFit fit = solve_pinv(ms);
  EXPECT_NEAR(fit.theta(0, 0), 1.0, 1e-14);
  EXPECT_NEAR(fit.theta(1, 0), 0.0, 1e-14);
  EXPECT_EQ(fit.effective_rank, 1);
}

TEST(SolvePinv, ZeroOperator) {
  MomentSystem ms;
  ms.sigma = Matrix::Zero(2, 3);
  ms.gamma = Matrix::Zero(2, 1);
  ms.mu_w = Vector::Ones(3);
  ms.thresholds = {0.0};
  const BridgeFit fit = solve_pinv(ms);
  EXPECT_EQ(fit.effective_rank, 0);
  EXPECT_NEAR(fit.theta.norm(), 0.0, 1e-15);
  EXPECT_NEAR(fit.alpha.norm(), 0.0, 1e-15);
}

TEST(SolvePinv, TikhonovPathConvergesToMinimumNorm) {
  // Solvable rectangular system: gamma lies in the range of sigma.
  Matrix sigma(2, 3);
  sigma << 1.0, 0.4, -0.3, 0.2, -0.7, 0.5;
  Vector theta0(3);
  theta0 << 0.5, -1.0, 0.25;
  MomentSystem ms;
  ms.sigma = sigma;
  ms.gamma = sigma * theta0;
  ms.mu_w = Vector::Zero(3);
  ms.thresholds = {0.0};
  const BridgeFit reference = solve_pinv(ms);
  // The gap shrinks like lambda until it reaches the roundoff floor of the
  // squared-conditioning normal equations.
  double previous = 1e9;
  for (double lambda : {1e-2, 1e-4, 1e-6, 1e-8}) {
    const BridgeFit fit = solve_ridge(ms, lambda, lambda);
    const double gap = (fit.theta - reference.theta).norm();
    EXPECT_LE(gap, previous + 1e-12);
    previous = gap;
  }
  EXPECT_LE(previous, 1e-7);
  const BridgeFit deepest = solve_ridge(ms, 1e-10, 1e-10);
  EXPECT_LE((deepest.theta - reference.theta).norm(), 1e-5);
}

TEST(SolvePinv, SolutionOrthogonalToNullSpace) {
  Matrix sigma(2, 4);
  sigma << 1.0, 0.3, -0.2, 0.4, 0.5, -0.6, 0.1, 0.2;
  MomentSystem ms;
  ms.sigma = sigma;
  ms.gamma.resize(2, 1);
  ms.gamma << 0.7, -0.1;
  ms.mu_w = Vector::Zero(4);
  ms.thresholds = {0.0};
  const BridgeFit fit = solve_pinv(ms);
  // Null-space directions are invisible to the moments and orthogonal to the
  // minimum-norm solution.
  Eigen::JacobiSVD<Matrix> svd(sigma, Eigen::ComputeFullV);
  for (Eigen::Index j = 2; j < 4; ++j) {
    const Vector null_dir = svd.matrixV().col(j);
    EXPECT_LE((sigma * (fit.theta.col(0) + null_dir) - ms.gamma.col(0)).norm() -
                  (sigma * fit.theta.col(0) - ms.gamma.col(0)).norm(),
              1e-10);
    EXPECT_NEAR(fit.theta.col(0).dot(null_dir), 0.0, 1e-10);
  }
}

TEST(PluginOneStep, SquareFitsAgreeAlgebraically) {
  for (std::uint64_t seed = 100; seed < 110; ++seed) {
    const auto inst = random_square_instance(250, 4, seed, {-0.4, 0.1, 0.8});
    const BridgeFit fit = solve_square(inst.ms);
    for (std::size_t k = 0; k < inst.ms.thresholds.size(); ++k) {
      const auto ki = static_cast<Eigen::Index>(k);
      const double plug_in = inst.ms.mu_w.dot(fit.theta.col(ki));
      const double dual_form = fit.alpha.dot(inst.ms.gamma.col(ki));
      double one_step = 0.0;
      const double y_k = inst.ms.thresholds[k];
      for (Eigen::Index i = 0; i < inst.y.size(); ++i) {
        const double h = inst.b_w.row(i).dot(fit.theta.col(ki));
        double score = h;
        if (inst.a[i] == 1) {
          const double q = inst.b_z.row(i).dot(fit.alpha);
          score += q * ((inst.y[i] <= y_k ? 1.0 : 0.0) - h);
        }
        one_step += score;
      }
      one_step /= static_cast<double>(inst.y.size());
      const double scale = std::max(1.0, std::abs(plug_in));
      EXPECT_LE(std::abs(plug_in - one_step) / scale, 1e-10);
      EXPECT_LE(std::abs(plug_in - dual_form) / scale, 1e-10);
    }
  }
}

TEST(Spectral, PicardPartialSums) {
  Grid s{1.0, 0.5}, l{1.0, std::pow(2.0, -0.8)};
  const Grid sums = picard_partial_sums(s, l);
  EXPECT_NEAR(sums[1], 1.0 + std::pow(2.0, 0.4), 1e-10);
  for (std::size_t j = 1; j < sums.size(); ++j) EXPECT_GE(sums[j], sums[j - 1]);
}

TEST(Spectral, DiagonalSystemDiagnostics) {
  MomentSystem ms;
  ms.arm = 1;
  ms.sigma = Matrix::Zero(2, 2);
  ms.sigma(0, 0) = 3.0;
  ms.sigma(1, 1) = 1.0;
  ms.gamma = Matrix::Ones(2, 1);
  ms.mu_w = Vector::Ones(2);
  ms.thresholds = {0.0};
  ms.n_rows = 4;
  const BridgeFit fit = solve_square(ms);
  Matrix b_z(4, 2);
  b_z << 1, 0, 1, 1, 0, 1, 1, 0;
  IntVector a(4);
  a << 1, 1, 0, 1;
  const SpectralDiagnostics diag = spectral_diagnostics(ms, fit, b_z, a);
  EXPECT_DOUBLE_EQ(diag.kappa_min, 1.0);
  EXPECT_DOUBLE_EQ(diag.singular_values(0), 3.0);
  EXPECT_NEAR(diag.alpha_norm, fit.alpha.norm(), 1e-15);
  EXPECT_GT(diag.q_weighted_norm, 0.0);
}
