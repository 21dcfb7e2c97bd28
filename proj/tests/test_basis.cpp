#include <gtest/gtest.h>

#include <cmath>

#include "proxidist/basis.hpp"
#include "proxidist/rng.hpp"

using namespace proxidist;

namespace {

// C(degree + vars, vars): monomial count including the intercept.
long choose(long n, long k) {
  long out = 1;
  for (long i = 1; i <= k; ++i) out = out * (n - k + i) / i;
  return out;
}

}  // namespace

TEST(PolynomialBasis, DegreeOneScalarPair) {
  Matrix vars(2, 2);
  vars << 0.5, 2.0, -1.0, 3.0;
  BasisSpec spec;
  spec.degree = 1;
  const FeatureMatrix fm = build_basis(spec, vars, {"w", "x"});
  ASSERT_EQ(fm.dim(), 3);
  EXPECT_EQ(fm.names[0], "1");
  EXPECT_DOUBLE_EQ(fm.values(0, 0), 1.0);
  // Columns are ordered by (degree, exponent order); both variables appear.
  EXPECT_DOUBLE_EQ(fm.values.col(1).sum() + fm.values.col(2).sum(),
                   vars.col(0).sum() + vars.col(1).sum());
}

TEST(PolynomialBasis, DegreeThreeTrivariateCount) {
  Rng rng(3);
  Matrix vars(5, 3);
  for (Eigen::Index i = 0; i < vars.size(); ++i) vars(i / 3, i % 3) = rng.normal();
  BasisSpec spec;
  spec.degree = 3;
  const FeatureMatrix fm = build_basis(spec, vars, {"z", "x1", "x2"});
  EXPECT_EQ(fm.dim(), 20);
}

TEST(PolynomialBasis, DimensionMatchesCombinatorialFormula) {
  Rng rng(5);
  for (int vars_count = 1; vars_count <= 4; ++vars_count) {
    Matrix vars(6, vars_count);
    for (Eigen::Index i = 0; i < vars.rows(); ++i)
      for (Eigen::Index j = 0; j < vars.cols(); ++j) vars(i, j) = rng.normal();
    std::vector<std::string> names;
    for (int j = 0; j < vars_count; ++j) names.push_back("v" + std::to_string(j));
    for (int degree = 1; degree <= 4; ++degree) {
      BasisSpec spec;
      spec.degree = degree;
      const FeatureMatrix fm = build_basis(spec, vars, names);
      EXPECT_EQ(fm.dim(), choose(degree + vars_count, vars_count))
          << "degree=" << degree << " vars=" << vars_count;
      spec.intercept = false;
      EXPECT_EQ(build_basis(spec, vars, names).dim(), choose(degree + vars_count, vars_count) - 1);
    }
  }
}

TEST(PolynomialBasis, BinaryCollapseGivesMultilinearSet) {
  Rng rng(9);
  Matrix vars(12, 3);
  for (Eigen::Index i = 0; i < vars.rows(); ++i)
    for (Eigen::Index j = 0; j < vars.cols(); ++j) vars(i, j) = rng.bernoulli(0.5);
  BasisSpec spec;
  spec.degree = 3;
  spec.collapse_binary_powers = true;
  const FeatureMatrix fm = build_basis(spec, vars, {"w", "x1", "x2"});
  EXPECT_EQ(fm.dim(), 8);
  // Mixed case: one continuous variable keeps its powers.
  vars.col(0) = vars.col(0).array() + 0.25;
  const FeatureMatrix mixed = build_basis(spec, vars, {"w", "x1", "x2"});
  // Exponents of w range over {0,..,3}; binary x1, x2 contribute at most one:
  // 4 + 4 + 3 + 1 multi-indices by w-power.
  EXPECT_EQ(mixed.dim(), 12);
}

TEST(PolynomialBasis, PureFunctionOfSpecAndRow) {
  Matrix a(1, 2), b(1, 2);
  a << 0.3, -1.7;
  b << 0.3, -1.7;
  BasisSpec spec;
  spec.degree = 4;
  const FeatureMatrix fa = build_basis(spec, a, {"u", "v"});
  const FeatureMatrix fb = build_basis(spec, b, {"u", "v"});
  for (Eigen::Index j = 0; j < fa.dim(); ++j) {
    EXPECT_EQ(fa.values(0, j), fb.values(0, j));
  }
}

TEST(PolynomialBasis, RejectsBadDegreeAndCap) {
  Matrix vars(2, 2);
  vars.setZero();
  BasisSpec spec;
  spec.degree = 0;
  EXPECT_THROW(build_basis(spec, vars, {"a", "b"}), Error);
  spec.degree = 3;
  spec.max_dim = 5;
  EXPECT_THROW(build_basis(spec, vars, {"a", "b"}), Error);
}

TEST(RealdataBasis, TermGroupCount) {
  Rng rng(13);
  Matrix x(8, 5), p(8, 2);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = rng.normal();
    for (Eigen::Index j = 0; j < p.cols(); ++j) p(i, j) = rng.normal();
  }
  const FeatureMatrix fm = build_realdata_basis(x, {"x1", "x2", "x3", "x4", "x5"}, p,
                                                {"p1", "p2"});
  // 1 + 5 + 2 + 2 + 1 + 10
  EXPECT_EQ(fm.dim(), 21);
  EXPECT_EQ(fm.names.back(), "x5*p2");
}

TEST(SplineBasis, NaturalTailsAreLinear) {
  Rng rng(17);
  Matrix vars(60, 1);
  for (Eigen::Index i = 0; i < vars.rows(); ++i) vars(i, 0) = rng.normal();
  BasisSpec spec;
  spec.kind = BasisKind::Spline;
  spec.n_knots = 4;
  spec = finalize_spline_knots(spec, vars);
  ASSERT_EQ(spec.knots.size(), 1u);
  ASSERT_EQ(spec.knots[0].size(), 4u);
  // intercept + linear + (K-2) curvature columns
  EXPECT_EQ(basis_dimension(spec, 1), 1 + 1 + 2);

  const double top = spec.knots[0].back();
  Matrix probe(3, 1);
  probe << top + 1.0, top + 2.0, top + 3.0;
  const FeatureMatrix fm = build_basis(spec, probe, {"v"});
  ASSERT_EQ(fm.dim(), 4);
  for (Eigen::Index j = 0; j < fm.dim(); ++j) {
    const double second_diff = fm.values(2, j) - 2.0 * fm.values(1, j) + fm.values(0, j);
    EXPECT_NEAR(second_diff, 0.0, 1e-9) << "column " << j;
  }
}

TEST(FeatureStandardizer, LeavesConstantsAlone) {
  Matrix train(4, 2);
  train << 1.0, 2.0, 1.0, 4.0, 1.0, 6.0, 1.0, 8.0;
  const FeatureStandardizer s = FeatureStandardizer::fit(train);
  const Matrix out = s.apply(train);
  for (Eigen::Index i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(out(i, 0), 1.0);
  EXPECT_NEAR(out.col(1).mean(), 0.0, 1e-14);
  EXPECT_NEAR(column_sd(out.col(1)), 1.0, 1e-12);
}
