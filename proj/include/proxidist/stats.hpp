#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "proxidist/common.hpp"

namespace proxidist {

inline constexpr double kPi = 3.14159265358979323846;

inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi); }

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Wichura's AS 241 (PPND16) rational approximation of the standard normal
// quantile, accurate to well below 1e-10 over (0,1).
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    fail_numeric("stats", "normal_quantile requires p in [0,1]");
  }
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    const double num =
        (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
              6.7265770927008700853e+4) *
                 r +
             4.5921953931549871457e+4) *
                r +
            1.3731693765509461125e+4) *
               r +
           1.9715909503065514427e+3) *
              r +
          1.3314166789178437745e+2) *
             r +
         3.3871328727963666080e+0);
    const double den =
        (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
              3.9307895800092710610e+4) *
                 r +
             2.1213794301586595867e+4) *
                r +
            5.3941960214247511077e+3) *
               r +
           6.8718700749205790830e+2) *
              r +
          4.2313330701600911252e+1) *
             r +
         1.0);
    return q * num / den;
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    const double num =
        (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
              2.41780725177450611770e-1) *
                 r +
             1.27045825245236838258e+0) *
                r +
            3.64784832476320460504e+0) *
               r +
           5.76949722146069140550e+0) *
              r +
          4.63033784615654529590e+0) *
             r +
         1.42343711074968357734e+0);
    const double den =
        (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
              1.51986665636164571966e-2) *
                 r +
             1.48103976427480074590e-1) *
                r +
            6.89767334985100004550e-1) *
               r +
           1.67638483018380384940e+0) *
              r +
          2.05319162663775882187e+0) *
             r +
         1.0);
    val = num / den;
  } else {
    r -= 5.0;
    const double num =
        (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
              1.24266094738807843860e-3) *
                 r +
             2.65321895265761230930e-2) *
                r +
            2.96560571828504891230e-1) *
               r +
           1.78482653991729133580e+0) *
              r +
          5.46378491116411436990e+0) *
             r +
         6.65790464350110377720e+0);
    const double den =
        (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
              1.84631831751005468180e-5) *
                 r +
             7.86869131145613259100e-4) *
                r +
            1.48753612908506148525e-2) *
               r +
           1.36929880922735805310e-1) *
              r +
          5.99832206555887937690e-1) *
             r +
         1.0);
    val = num / den;
  }
  return (q < 0.0) ? -val : val;
}

// z_{1-alpha/2} for a two-sided interval at level 1-alpha.
inline double two_sided_z(double alpha) { return normal_quantile(1.0 - alpha / 2.0); }

// Type-7 (linear interpolation) quantile on presorted data.
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) fail_numeric("stats", "quantile of empty vector");
  if (sorted.size() == 1) return sorted[0];
  p = std::clamp(p, 0.0, 1.0);
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline double quantile_of(std::vector<double> values, double p) {
  std::sort(values.begin(), values.end());
  return quantile_sorted(values, p);
}

inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Sample variance (denominator n-1); zero for n < 2.
inline double variance_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size() - 1);
}

inline double sd_of(const std::vector<double>& v) { return std::sqrt(variance_of(v)); }

inline double column_sd(const Vector& col) {
  const auto n = col.size();
  if (n < 2) return 0.0;
  const double m = col.mean();
  return std::sqrt((col.array() - m).square().sum() / static_cast<double>(n - 1));
}

inline double pearson_correlation(const Vector& x, const Vector& y) {
  const auto n = x.size();
  if (n != y.size() || n < 2) return 0.0;
  const double mx = x.mean();
  const double my = y.mean();
  const Eigen::ArrayXd dx = x.array() - mx;
  const Eigen::ArrayXd dy = y.array() - my;
  const double sx = std::sqrt(dx.square().sum());
  const double sy = std::sqrt(dy.square().sum());
  if (sx <= 0.0 || sy <= 0.0) return 0.0;
  return (dx * dy).sum() / (sx * sy);
}

// Spearman rank correlation; average ranks for ties.
inline double spearman_correlation(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n != y.size() || n < 2) return 0.0;
  auto ranks = [](const std::vector<double>& v) {
    const std::size_t m = v.size();
    std::vector<std::size_t> idx(m);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(m);
    std::size_t i = 0;
    while (i < m) {
      std::size_t j = i;
      while (j + 1 < m && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const std::vector<double> rx = ranks(x), ry = ranks(y);
  Vector vx = Eigen::Map<const Vector>(rx.data(), static_cast<Eigen::Index>(n));
  Vector vy = Eigen::Map<const Vector>(ry.data(), static_cast<Eigen::Index>(n));
  return pearson_correlation(vx, vy);
}

// Silverman's reference bandwidth 0.9 * min(sd, IQR/1.34) * n^{-1/5}.
inline double silverman_bandwidth(std::vector<double> values) {
  const std::size_t n = values.size();
  if (n < 2) return 1.0;
  const double s = sd_of(values);
  std::sort(values.begin(), values.end());
  const double iqr = quantile_sorted(values, 0.75) - quantile_sorted(values, 0.25);
  double spread = s;
  if (iqr > 0.0) spread = std::min(spread, iqr / 1.34);
  if (spread <= 0.0) spread = (s > 0.0) ? s : 1.0;
  return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

inline double expit(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Slope of the least-squares line of y on x.
inline double ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n != y.size() || n < 2) return 0.0;
  const double mx = mean_of(x), my = mean_of(y);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx <= 0.0) return 0.0;
  return sxy / sxx;
}

}  // namespace proxidist
