#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "proxidist/common.hpp"
#include "proxidist/stats.hpp"

namespace proxidist {

enum class BasisKind { Polynomial, Spline, RealdataInteraction };

// Declarative feature-map description. Evaluation is a pure function of
// (spec, row): spline knots are resolved into the spec before building, so
// identical inputs give bit-identical features.
struct BasisSpec {
  BasisKind kind = BasisKind::Polynomial;
  int degree = 2;
  bool intercept = true;
  int n_knots = 5;
  std::vector<std::vector<double>> knots;  // spline: per-variable interior knots
  // Binary columns are idempotent under powers; when set, monomials that
  // differ only through repeated binary factors are emitted once.
  bool collapse_binary_powers = false;
  Eigen::Index max_dim = 100000;
};

struct FeatureMatrix {
  Matrix values;
  std::vector<std::string> names;
  Eigen::Index dim() const { return values.cols(); }
};

namespace detail {

inline bool is_binary_column(const Matrix& vars, Eigen::Index j) {
  for (Eigen::Index i = 0; i < vars.rows(); ++i) {
    const double v = vars(i, j);
    if (v != 0.0 && v != 1.0) return false;
  }
  return true;
}

inline void enumerate_monomials(int n_vars, int degree, const std::vector<bool>& binary,
                                bool collapse, std::vector<std::vector<int>>* out) {
  std::vector<int> exponents(static_cast<std::size_t>(n_vars), 0);
  std::vector<std::vector<int>> all;
  // Depth-first over exponent vectors with total degree at most `degree`.
  auto recurse = [&](auto&& self, int var, int remaining) -> void {
    if (var == n_vars) {
      all.push_back(exponents);
      return;
    }
    const int cap = (collapse && binary[static_cast<std::size_t>(var)]) ? std::min(1, remaining)
                                                                        : remaining;
    for (int e = 0; e <= cap; ++e) {
      exponents[static_cast<std::size_t>(var)] = e;
      self(self, var + 1, remaining - e);
      exponents[static_cast<std::size_t>(var)] = 0;
    }
  };
  recurse(recurse, 0, degree);
  std::stable_sort(all.begin(), all.end(), [](const auto& lhs, const auto& rhs) {
    const int dl = std::accumulate(lhs.begin(), lhs.end(), 0);
    const int dr = std::accumulate(rhs.begin(), rhs.end(), 0);
    if (dl != dr) return dl < dr;
    return lhs < rhs;
  });
  *out = std::move(all);
}

inline std::string monomial_name(const std::vector<int>& exps,
                                 const std::vector<std::string>& var_names) {
  std::string name;
  for (std::size_t j = 0; j < exps.size(); ++j) {
    for (int e = 0; e < exps[j]; ++e) {
      if (!name.empty()) name += "*";
      name += var_names[j];
    }
  }
  return name.empty() ? "1" : name;
}

}  // namespace detail

// Expected feature dimension for a spec over n_vars variables.
inline Eigen::Index basis_dimension(const BasisSpec& spec, int n_vars,
                                    const std::vector<bool>& binary = {}) {
  if (spec.kind == BasisKind::Polynomial) {
    std::vector<bool> bin = binary;
    if (bin.empty()) bin.assign(static_cast<std::size_t>(n_vars), false);
    std::vector<std::vector<int>> exps;
    detail::enumerate_monomials(n_vars, spec.degree, bin, spec.collapse_binary_powers, &exps);
    Eigen::Index d = static_cast<Eigen::Index>(exps.size());
    if (!spec.intercept) d -= 1;
    return d;
  }
  if (spec.kind == BasisKind::Spline) {
    Eigen::Index d = spec.intercept ? 1 : 0;
    for (int v = 0; v < n_vars; ++v) {
      const std::size_t k = spec.knots.empty() ? static_cast<std::size_t>(spec.n_knots)
                                               : spec.knots[static_cast<std::size_t>(v)].size();
      d += 1 + (k >= 3 ? static_cast<Eigen::Index>(k) - 2 : 0);
    }
    return d;
  }
  fail_config("basis", "basis_dimension: unsupported kind for generic blocks");
}

// Resolves spline interior knots at empirical quantiles of each variable.
inline BasisSpec finalize_spline_knots(BasisSpec spec, const Matrix& vars) {
  if (spec.kind != BasisKind::Spline || !spec.knots.empty()) return spec;
  spec.knots.resize(static_cast<std::size_t>(vars.cols()));
  for (Eigen::Index j = 0; j < vars.cols(); ++j) {
    std::vector<double> col(vars.col(j).data(), vars.col(j).data() + vars.rows());
    std::sort(col.begin(), col.end());
    auto& kn = spec.knots[static_cast<std::size_t>(j)];
    for (int k = 1; k <= spec.n_knots; ++k) {
      kn.push_back(quantile_sorted(col, static_cast<double>(k) / (spec.n_knots + 1.0)));
    }
    kn.erase(std::unique(kn.begin(), kn.end()), kn.end());
  }
  return spec;
}

inline FeatureMatrix build_basis(const BasisSpec& spec, const Matrix& vars,
                                 const std::vector<std::string>& var_names) {
  const Eigen::Index n = vars.rows();
  const int n_vars = static_cast<int>(vars.cols());
  FeatureMatrix fm;
  if (spec.kind == BasisKind::Polynomial) {
    if (spec.degree < 1) fail_config("basis", "polynomial degree must be >= 1");
    std::vector<bool> binary(static_cast<std::size_t>(n_vars), false);
    if (spec.collapse_binary_powers) {
      for (Eigen::Index j = 0; j < n_vars; ++j)
        binary[static_cast<std::size_t>(j)] = detail::is_binary_column(vars, j);
    }
    std::vector<std::vector<int>> exps;
    detail::enumerate_monomials(n_vars, spec.degree, binary, spec.collapse_binary_powers, &exps);
    std::vector<std::vector<int>> kept;
    for (auto& e : exps) {
      const bool constant = std::all_of(e.begin(), e.end(), [](int v) { return v == 0; });
      if (constant && !spec.intercept) continue;
      kept.push_back(std::move(e));
    }
    if (static_cast<Eigen::Index>(kept.size()) > spec.max_dim)
      fail_config("basis", "basis dimension exceeds configured cap");
    fm.values.resize(n, static_cast<Eigen::Index>(kept.size()));
    for (std::size_t c = 0; c < kept.size(); ++c) {
      fm.names.push_back(detail::monomial_name(kept[c], var_names));
      Vector col = Vector::Ones(n);
      for (int j = 0; j < n_vars; ++j) {
        for (int e = 0; e < kept[c][static_cast<std::size_t>(j)]; ++e) {
          col = col.cwiseProduct(vars.col(j));
        }
      }
      fm.values.col(static_cast<Eigen::Index>(c)) = col;
    }
    return fm;
  }

  if (spec.kind == BasisKind::Spline) {
    if (spec.knots.size() != static_cast<std::size_t>(n_vars))
      fail_config("basis", "spline spec has unresolved knots; call finalize_spline_knots");
    std::vector<Vector> cols;
    std::vector<std::string> names;
    if (spec.intercept) {
      cols.push_back(Vector::Ones(n));
      names.push_back("1");
    }
    for (int v = 0; v < n_vars; ++v) {
      const auto& kn = spec.knots[static_cast<std::size_t>(v)];
      cols.push_back(vars.col(v));
      names.push_back(var_names[static_cast<std::size_t>(v)]);
      const std::size_t K = kn.size();
      if (K < 3) continue;
      // Natural cubic spline: linear beyond the boundary knots.
      auto dfun = [&](double x, std::size_t k) {
        const double num = std::pow(std::max(0.0, x - kn[k]), 3) -
                           std::pow(std::max(0.0, x - kn[K - 1]), 3);
        return num / (kn[K - 1] - kn[k]);
      };
      for (std::size_t k = 0; k + 2 < K; ++k) {
        Vector col(n);
        for (Eigen::Index i = 0; i < n; ++i) {
          const double x = vars(i, v);
          col[i] = dfun(x, k) - dfun(x, K - 2);
        }
        cols.push_back(col);
        names.push_back(var_names[static_cast<std::size_t>(v)] + "_ns" + std::to_string(k + 1));
      }
    }
    if (static_cast<Eigen::Index>(cols.size()) > spec.max_dim)
      fail_config("basis", "basis dimension exceeds configured cap");
    fm.values.resize(n, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c)
      fm.values.col(static_cast<Eigen::Index>(c)) = cols[c];
    fm.names = names;
    return fm;
  }

  fail_config("basis", "realdata-interaction bases are built from screened blocks");
}

// Intercept + screened X + proxy mains + proxy squares + proxy cross-products
// + (screened X) x (proxy) interactions.
inline FeatureMatrix build_realdata_basis(const Matrix& screened_x,
                                          const std::vector<std::string>& x_names,
                                          const Matrix& proxies,
                                          const std::vector<std::string>& proxy_names,
                                          Eigen::Index max_dim = 100000) {
  const Eigen::Index n = proxies.rows();
  if (screened_x.rows() != n) fail_config("basis", "row mismatch in realdata basis blocks");
  const Eigen::Index m = screened_x.cols();
  const Eigen::Index p = proxies.cols();
  const Eigen::Index d = 1 + m + p + p + p * (p - 1) / 2 + m * p;
  if (d > max_dim) fail_config("basis", "basis dimension exceeds configured cap");
  FeatureMatrix fm;
  fm.values.resize(n, d);
  Eigen::Index c = 0;
  fm.values.col(c++) = Vector::Ones(n);
  fm.names.push_back("1");
  for (Eigen::Index j = 0; j < m; ++j) {
    fm.values.col(c++) = screened_x.col(j);
    fm.names.push_back(x_names[static_cast<std::size_t>(j)]);
  }
  for (Eigen::Index j = 0; j < p; ++j) {
    fm.values.col(c++) = proxies.col(j);
    fm.names.push_back(proxy_names[static_cast<std::size_t>(j)]);
  }
  for (Eigen::Index j = 0; j < p; ++j) {
    fm.values.col(c++) = proxies.col(j).cwiseProduct(proxies.col(j));
    fm.names.push_back(proxy_names[static_cast<std::size_t>(j)] + "^2");
  }
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index k = j + 1; k < p; ++k) {
      fm.values.col(c++) = proxies.col(j).cwiseProduct(proxies.col(k));
      fm.names.push_back(proxy_names[static_cast<std::size_t>(j)] + "*" +
                         proxy_names[static_cast<std::size_t>(k)]);
    }
  }
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index k = 0; k < p; ++k) {
      fm.values.col(c++) = screened_x.col(j).cwiseProduct(proxies.col(k));
      fm.names.push_back(x_names[static_cast<std::size_t>(j)] + "*" +
                         proxy_names[static_cast<std::size_t>(k)]);
    }
  }
  return fm;
}

// Column-wise location/scale transform fitted on training rows. Constant
// columns (the intercept) are left untouched.
struct FeatureStandardizer {
  Vector mean;
  Vector scale;

  static FeatureStandardizer fit(const Matrix& train) {
    FeatureStandardizer s;
    const Eigen::Index d = train.cols();
    s.mean = Vector::Zero(d);
    s.scale = Vector::Ones(d);
    for (Eigen::Index j = 0; j < d; ++j) {
      const double sd = column_sd(train.col(j));
      if (sd > 1e-12) {
        s.mean[j] = train.col(j).mean();
        s.scale[j] = sd;
      }
    }
    return s;
  }

  Matrix apply(const Matrix& rows) const {
    Matrix out = rows;
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
      out.col(j) = (out.col(j).array() - mean[j]) / scale[j];
    }
    return out;
  }
};

}  // namespace proxidist
