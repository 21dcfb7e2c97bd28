#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "proxidist/common.hpp"
#include "proxidist/dataset.hpp"
#include "proxidist/stats.hpp"

namespace proxidist {

struct NumericColumnPlan {
  double impute = 0.0;
  double mean = 0.0;
  double sd = 1.0;
};

struct CategoricalColumnPlan {
  int mode = 0;
  std::vector<int> levels;  // levels observed in scope, ascending codes
};

// Deterministic transform fitted on a row scope. Applying a fitted plan to its
// own scope yields standardized columns (mean 0, sd 1 up to rounding).
struct PreprocessPlan {
  std::vector<NumericColumnPlan> z;
  std::vector<NumericColumnPlan> w;
  std::vector<NumericColumnPlan> x_numeric;
  std::vector<CategoricalColumnPlan> x_categorical;
  std::string fitted_on = "full-sample";
};

// Fully numeric design produced by applying a plan: standardized proxies plus
// the expanded covariate block (standardized numerics, then one-hot columns).
struct Design {
  Matrix z;
  Matrix w;
  Matrix x;
  std::vector<std::string> z_names;
  std::vector<std::string> w_names;
  std::vector<std::string> x_names;
};

namespace detail {

inline double median_ignoring_nan(const Matrix& block, Eigen::Index col,
                                  const std::vector<int>& scope) {
  std::vector<double> vals;
  vals.reserve(scope.size());
  for (int i : scope) {
    const double v = block(i, col);
    if (std::isfinite(v)) vals.push_back(v);
  }
  if (vals.empty()) fail_input("preprocess", "all-missing numeric column");
  std::sort(vals.begin(), vals.end());
  const std::size_t n = vals.size();
  return (n % 2 == 1) ? vals[n / 2] : 0.5 * (vals[n / 2 - 1] + vals[n / 2]);
}

inline NumericColumnPlan fit_numeric(const Matrix& block, Eigen::Index col,
                                     const std::vector<int>& scope) {
  NumericColumnPlan plan;
  plan.impute = median_ignoring_nan(block, col, scope);
  double sum = 0.0;
  for (int i : scope) {
    const double v = block(i, col);
    sum += std::isfinite(v) ? v : plan.impute;
  }
  plan.mean = sum / static_cast<double>(scope.size());
  double ss = 0.0;
  for (int i : scope) {
    double v = block(i, col);
    if (!std::isfinite(v)) v = plan.impute;
    ss += (v - plan.mean) * (v - plan.mean);
  }
  plan.sd = scope.size() > 1 ? std::sqrt(ss / static_cast<double>(scope.size() - 1)) : 0.0;
  if (plan.sd <= 0.0) plan.sd = 1.0;
  return plan;
}

inline std::vector<int> full_scope(Eigen::Index n) {
  std::vector<int> rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), 0);
  return rows;
}

}  // namespace detail

inline PreprocessPlan fit_preprocess(const Dataset& data, std::vector<int> scope = {},
                                     const std::string& label = "full-sample") {
  if (scope.empty()) scope = detail::full_scope(data.n());
  PreprocessPlan plan;
  plan.fitted_on = label;
  for (Eigen::Index j = 0; j < data.z.cols(); ++j)
    plan.z.push_back(detail::fit_numeric(data.z, j, scope));
  for (Eigen::Index j = 0; j < data.w.cols(); ++j)
    plan.w.push_back(detail::fit_numeric(data.w, j, scope));
  for (Eigen::Index j = 0; j < data.x_numeric.cols(); ++j)
    plan.x_numeric.push_back(detail::fit_numeric(data.x_numeric, j, scope));
  for (const auto& cat : data.x_categorical) {
    CategoricalColumnPlan cp;
    std::map<int, int> counts;
    for (int i : scope) {
      const int code = cat.codes[static_cast<std::size_t>(i)];
      if (code >= 0) ++counts[code];
    }
    if (counts.empty()) fail_input("preprocess", "all-missing categorical column: " + cat.name);
    int best_code = counts.begin()->first, best_count = counts.begin()->second;
    for (const auto& [code, count] : counts) {
      if (count > best_count) {
        best_code = code;
        best_count = count;
      }
    }
    cp.mode = best_code;
    for (const auto& [code, count] : counts) cp.levels.push_back(code);
    plan.x_categorical.push_back(std::move(cp));
  }
  return plan;
}

inline Design apply_preprocess(const PreprocessPlan& plan, const Dataset& data) {
  const Eigen::Index n = data.n();
  Design d;
  auto apply_block = [&](const Matrix& block, const std::vector<NumericColumnPlan>& plans,
                         const std::vector<std::string>& names, Matrix* out,
                         std::vector<std::string>* out_names) {
    out->resize(n, static_cast<Eigen::Index>(plans.size()));
    for (std::size_t j = 0; j < plans.size(); ++j) {
      const auto& p = plans[j];
      out_names->push_back(names[j]);
      for (Eigen::Index i = 0; i < n; ++i) {
        double v = block(i, static_cast<Eigen::Index>(j));
        if (!std::isfinite(v)) v = p.impute;
        (*out)(i, static_cast<Eigen::Index>(j)) = (v - p.mean) / p.sd;
      }
    }
  };
  apply_block(data.z, plan.z, data.z_names, &d.z, &d.z_names);
  apply_block(data.w, plan.w, data.w_names, &d.w, &d.w_names);

  Eigen::Index onehot_width = 0;
  for (const auto& cp : plan.x_categorical)
    onehot_width += static_cast<Eigen::Index>(cp.levels.size());
  d.x.resize(n, data.x_numeric.cols() + onehot_width);
  std::vector<std::string> numeric_names;
  Matrix numeric_block;
  apply_block(data.x_numeric, plan.x_numeric, data.x_numeric_names, &numeric_block,
              &numeric_names);
  d.x.leftCols(numeric_block.cols()) = numeric_block;
  d.x_names = numeric_names;
  Eigen::Index col = numeric_block.cols();
  for (std::size_t c = 0; c < plan.x_categorical.size(); ++c) {
    const auto& cp = plan.x_categorical[c];
    const auto& cat = data.x_categorical[c];
    for (int level : cp.levels) {
      d.x_names.push_back(cat.name + "=" +
                          cat.levels[static_cast<std::size_t>(level)]);
      for (Eigen::Index i = 0; i < n; ++i) {
        int code = cat.codes[static_cast<std::size_t>(i)];
        if (code < 0) code = cp.mode;
        d.x(i, col) = (code == level) ? 1.0 : 0.0;
      }
      ++col;
    }
  }
  return d;
}

struct ScreenResult {
  std::vector<int> selected;       // top-k feature indices, score-descending
  std::vector<int> zero_variance;  // excluded with warning
  std::vector<double> scores;      // per input feature
};

// Ranks preprocessed X features by |corr(feature, A)| + |corr(feature, Y)|,
// full-sample, with ties broken by ascending column index.
inline ScreenResult screen_covariates(const Matrix& x_features, const IntVector& a,
                                      const Vector& y, int k) {
  const Eigen::Index p = x_features.cols();
  if (k > p) fail_input("screening", "k exceeds number of features");
  ScreenResult result;
  result.scores.resize(static_cast<std::size_t>(p), 0.0);
  Vector a_real = a.cast<double>();
  std::vector<int> candidates;
  for (Eigen::Index j = 0; j < p; ++j) {
    const Vector col = x_features.col(j);
    if (column_sd(col) <= 0.0) {
      result.zero_variance.push_back(static_cast<int>(j));
      continue;
    }
    result.scores[static_cast<std::size_t>(j)] =
        std::abs(pearson_correlation(col, a_real)) + std::abs(pearson_correlation(col, y));
    candidates.push_back(static_cast<int>(j));
  }
  std::stable_sort(candidates.begin(), candidates.end(), [&](int lhs, int rhs) {
    const double sl = result.scores[static_cast<std::size_t>(lhs)];
    const double sr = result.scores[static_cast<std::size_t>(rhs)];
    if (sl != sr) return sl > sr;
    return lhs < rhs;
  });
  if (static_cast<std::size_t>(k) > candidates.size())
    fail_input("screening", "k exceeds number of usable features");
  result.selected.assign(candidates.begin(), candidates.begin() + k);
  return result;
}

}  // namespace proxidist
