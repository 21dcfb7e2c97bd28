#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "proxidist/common.hpp"
#include "proxidist/csv.hpp"
#include "proxidist/stats.hpp"

namespace proxidist {

struct Schema {
  std::string y;
  std::string a;
  std::vector<std::string> z;
  std::vector<std::string> w;
  std::vector<std::string> x;
};

// One categorical covariate column stored as level codes (-1 = missing).
struct CategoricalColumn {
  std::string name;
  std::vector<int> codes;
  std::vector<std::string> levels;
};

// Rows of (Y, A, Z, W, X). Numeric blocks may hold NaN until a preprocessing
// plan is applied; categorical X columns are kept as coded levels.
struct Dataset {
  Vector y;
  IntVector a;
  Matrix z;
  Matrix w;
  Matrix x_numeric;
  std::vector<std::string> z_names;
  std::vector<std::string> w_names;
  std::vector<std::string> x_numeric_names;
  std::vector<CategoricalColumn> x_categorical;
  long dropped_rows = 0;

  Eigen::Index n() const { return y.size(); }
  int arm_count(int arm) const {
    int c = 0;
    for (Eigen::Index i = 0; i < a.size(); ++i) c += (a[i] == arm);
    return c;
  }
};

namespace detail {

inline bool parse_double(const std::string& cell, double* out) {
  if (cell.empty()) return false;
  const char* begin = cell.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  while (end && *end == ' ') ++end;
  if (end == begin || (end && *end != '\0')) return false;
  *out = v;
  return true;
}

inline double cell_value(const std::string& cell) {
  double v;
  if (!parse_double(cell, &v)) return std::numeric_limits<double>::quiet_NaN();
  return v;
}

inline bool column_is_numeric(const CsvTable& table, int col) {
  for (const auto& row : table.rows) {
    const std::string& cell = row[static_cast<std::size_t>(col)];
    if (cell.empty()) continue;
    double v;
    if (!parse_double(cell, &v)) return false;
  }
  return true;
}

inline int require_column(const CsvTable& table, const std::string& name) {
  const int col = table.column(name);
  if (col < 0) fail_input("ingestion", "missing column: " + name);
  return col;
}

}  // namespace detail

// Generic tabular ingestion. Rows with missing y or a are dropped and
// counted; a non-binary treatment cell is an error.
inline Dataset load_dataset(const CsvTable& table, const Schema& schema) {
  const int ycol = detail::require_column(table, schema.y);
  const int acol = detail::require_column(table, schema.a);
  std::vector<int> zcols, wcols, xcols;
  for (const auto& nm : schema.z) zcols.push_back(detail::require_column(table, nm));
  for (const auto& nm : schema.w) wcols.push_back(detail::require_column(table, nm));
  for (const auto& nm : schema.x) xcols.push_back(detail::require_column(table, nm));

  std::vector<std::size_t> kept;
  long dropped = 0;
  std::vector<double> yvals;
  std::vector<int> avals;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    double yv, av;
    const bool has_y = detail::parse_double(row[static_cast<std::size_t>(ycol)], &yv);
    const std::string& acell = row[static_cast<std::size_t>(acol)];
    const bool has_a = detail::parse_double(acell, &av);
    if (!has_y || acell.empty()) {
      ++dropped;
      continue;
    }
    if (!has_a || (av != 0.0 && av != 1.0)) {
      fail_input("ingestion", "non-binary treatment value '" + acell + "' in column " + schema.a);
    }
    kept.push_back(r);
    yvals.push_back(yv);
    avals.push_back(static_cast<int>(av));
  }

  Dataset ds;
  const auto n = static_cast<Eigen::Index>(kept.size());
  ds.dropped_rows = dropped;
  ds.y = Eigen::Map<const Vector>(yvals.data(), n);
  ds.a.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) ds.a[i] = avals[static_cast<std::size_t>(i)];

  auto fill_numeric_block = [&](const std::vector<int>& cols, Matrix* block,
                                std::vector<std::string>* names) {
    block->resize(n, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) {
      names->push_back(table.header[static_cast<std::size_t>(cols[j])]);
      for (Eigen::Index i = 0; i < n; ++i) {
        (*block)(i, static_cast<Eigen::Index>(j)) =
            detail::cell_value(table.rows[kept[static_cast<std::size_t>(i)]][static_cast<std::size_t>(cols[j])]);
      }
    }
  };
  fill_numeric_block(zcols, &ds.z, &ds.z_names);
  fill_numeric_block(wcols, &ds.w, &ds.w_names);

  std::vector<int> x_numeric_cols, x_cat_cols;
  for (int c : xcols) {
    (detail::column_is_numeric(table, c) ? x_numeric_cols : x_cat_cols).push_back(c);
  }
  fill_numeric_block(x_numeric_cols, &ds.x_numeric, &ds.x_numeric_names);
  for (int c : x_cat_cols) {
    CategoricalColumn cat;
    cat.name = table.header[static_cast<std::size_t>(c)];
    std::set<std::string> level_set;
    for (std::size_t i : kept) {
      const std::string& cell = table.rows[i][static_cast<std::size_t>(c)];
      if (!cell.empty()) level_set.insert(cell);
    }
    cat.levels.assign(level_set.begin(), level_set.end());
    cat.codes.resize(static_cast<std::size_t>(n), -1);
    for (Eigen::Index i = 0; i < n; ++i) {
      const std::string& cell = table.rows[kept[static_cast<std::size_t>(i)]][static_cast<std::size_t>(c)];
      if (cell.empty()) continue;
      const auto it = std::lower_bound(cat.levels.begin(), cat.levels.end(), cell);
      cat.codes[static_cast<std::size_t>(i)] = static_cast<int>(it - cat.levels.begin());
    }
    ds.x_categorical.push_back(std::move(cat));
  }
  return ds;
}

inline Dataset load_dataset(const std::string& path, const Schema& schema) {
  const CsvTable table = read_csv(path);
  return load_dataset(table, schema);
}

// Right-heart-catheterization ingestion: outcome is log(1 + hospital days)
// with days = dschdte - sadmdte (dthdte fallback), positive stays retained
// and administrative extremes Winsorized at the 99.5th percentile.
struct RhcRecipeOptions {
  std::string treatment = "swang1";
  std::vector<std::string> z = {"pafi1", "paco21"};
  std::vector<std::string> w = {"ph1", "hema1"};
  double winsor_quantile = 0.995;
  // Columns never used as covariates: identifiers, dates, and post-treatment
  // outcome summaries.
  std::vector<std::string> exclude = {"ptid",  "sadmdte", "dschdte", "dthdte", "lstctdte",
                                      "death", "dth30",   "t3d30",   "dthdte"};
};

inline Dataset load_rhc(const std::string& path, const RhcRecipeOptions& opt = {}) {
  const CsvTable table = read_csv(path);
  const int sadm = detail::require_column(table, "sadmdte");
  const int dsch = detail::require_column(table, "dschdte");
  const int dth = table.column("dthdte");
  const int acol = detail::require_column(table, opt.treatment);

  // Hospital days per row; non-positive or undefined stays are dropped.
  std::vector<double> days(table.rows.size(), std::numeric_limits<double>::quiet_NaN());
  std::vector<double> finite_days;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    double admit, out;
    if (!detail::parse_double(row[static_cast<std::size_t>(sadm)], &admit)) continue;
    if (detail::parse_double(row[static_cast<std::size_t>(dsch)], &out) ||
        (dth >= 0 && detail::parse_double(row[static_cast<std::size_t>(dth)], &out))) {
      const double d = out - admit;
      if (d > 0.0) {
        days[r] = d;
        finite_days.push_back(d);
      }
    }
  }
  if (finite_days.empty()) fail_input("ingestion", "no usable hospital-stay rows in " + path);
  std::sort(finite_days.begin(), finite_days.end());
  const double cap = quantile_sorted(finite_days, opt.winsor_quantile);

  // Rebuild a table with the derived outcome and a 0/1 treatment column.
  CsvTable derived;
  derived.header = table.header;
  derived.header.push_back("log1p_hospital_days");
  derived.header.push_back("rhc_treatment");
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    if (!(days[r] > 0.0)) continue;
    auto row = table.rows[r];
    row.push_back(format_double(std::log1p(std::min(days[r], cap))));
    const std::string& acell = row[static_cast<std::size_t>(acol)];
    std::string abin;
    if (acell == "RHC" || acell == "1") abin = "1";
    else if (acell == "No RHC" || acell == "0") abin = "0";
    if (!abin.empty()) row.push_back(abin);
    else row.push_back("");
    derived.rows.push_back(std::move(row));
  }

  Schema schema;
  schema.y = "log1p_hospital_days";
  schema.a = "rhc_treatment";
  schema.z = opt.z;
  schema.w = opt.w;
  std::set<std::string> used(opt.exclude.begin(), opt.exclude.end());
  used.insert(opt.treatment);
  used.insert(schema.y);
  used.insert(schema.a);
  for (const auto& nm : opt.z) used.insert(nm);
  for (const auto& nm : opt.w) used.insert(nm);
  for (const auto& nm : table.header) {
    if (nm.empty() || used.count(nm)) continue;
    schema.x.push_back(nm);
  }
  return load_dataset(derived, schema);
}

}  // namespace proxidist
