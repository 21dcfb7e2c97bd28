// Command-line front end: counterfactual distribution / quantile / CVaR
// estimation, simulation experiments, and spectral diagnostics.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "proxidist/experiments.hpp"
#include "proxidist/gaussian_bench.hpp"
#include "proxidist/pipeline.hpp"
#include "proxidist/report.hpp"

namespace fs = std::filesystem;
using proxidist::Json;

namespace {

struct CommonFlags {
  std::string config_path;
  std::string data_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> reps;
  std::optional<std::string> n_list;
  std::optional<double> alpha;
  std::optional<int> multipliers;
  std::optional<int> folds;
};

void add_common_flags(CLI::App* cmd, CommonFlags* flags) {
  cmd->add_option("--config", flags->config_path, "JSON config file (or an emitted manifest)");
  cmd->add_option("--data", flags->data_path, "input CSV table");
  cmd->add_option("--out", flags->out_dir, "output directory");
  cmd->add_option("--seed", flags->seed, "base seed");
  cmd->add_option("--reps", flags->reps, "Monte Carlo replications");
  cmd->add_option("--n", flags->n_list, "comma-separated sample sizes");
  cmd->add_option("--alpha", flags->alpha, "band level alpha");
  cmd->add_option("--multipliers", flags->multipliers, "multiplier bootstrap draws");
  cmd->add_option("--folds", flags->folds, "cross-fitting folds");
}

// Reads --config (unwrapping a manifest's "config" payload) and applies flag
// overrides; flags win over file values.
Json resolve_config(const CommonFlags& flags) {
  Json cfg = Json::object();
  if (!flags.config_path.empty()) {
    cfg = proxidist::read_json(flags.config_path);
    if (cfg.contains("config")) cfg = cfg["config"];
  }
  if (!flags.data_path.empty()) cfg["data"] = flags.data_path;
  if (!flags.out_dir.empty()) cfg["out"] = flags.out_dir;
  if (flags.seed) cfg["seed"] = *flags.seed;
  if (flags.reps) cfg["reps"] = *flags.reps;
  if (flags.alpha) cfg["alpha"] = *flags.alpha;
  if (flags.multipliers) cfg["multipliers"] = *flags.multipliers;
  if (flags.folds) cfg["folds"] = *flags.folds;
  if (flags.n_list) {
    std::vector<long> ns;
    std::string item;
    std::stringstream ss(*flags.n_list);
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) ns.push_back(std::stol(item));
    }
    cfg["n_list"] = ns;
  }
  return cfg;
}

std::vector<double> as_doubles(const Json& j, std::vector<double> fallback) {
  if (j.is_array()) return j.get<std::vector<double>>();
  return fallback;
}

std::string out_path(const Json& cfg, const std::string& name) {
  const std::string dir = cfg.value("out", std::string("out"));
  fs::create_directories(dir);
  return (fs::path(dir) / name).string();
}

void write_manifest(const Json& cfg, const std::string& subcommand,
                    const std::vector<std::string>& outputs) {
  Json manifest;
  Json config = cfg;
  config["subcommand"] = subcommand;
  manifest["tool"] = "proxidist";
  manifest["version"] = "0.1.0";
  manifest["config"] = config;
  manifest["config_hash"] = proxidist::config_hash(proxidist::canonical_config(config));
  manifest["outputs"] = outputs;
  proxidist::write_json(out_path(cfg, "manifest.json"), manifest);
}

int cmd_estimate(const Json& cfg) {
  proxidist::EstimateConfig ec;
  ec.data_path = cfg.value("data", std::string());
  if (ec.data_path.empty()) proxidist::fail_config("config", "estimate requires a data path");
  ec.recipe = cfg.value("recipe", std::string("generic"));
  if (ec.recipe == "generic") {
    if (!cfg.contains("schema")) proxidist::fail_config("config", "generic recipe needs a schema");
    const Json& s = cfg["schema"];
    ec.schema.y = s.value("y", std::string());
    ec.schema.a = s.value("a", std::string());
    ec.schema.z = s.value("z", std::vector<std::string>{});
    ec.schema.w = s.value("w", std::vector<std::string>{});
    ec.schema.x = s.value("x", std::vector<std::string>{});
  }
  ec.screen_k = cfg.value("screen_k", 5);
  ec.folds = cfg.value("folds", 5);
  ec.grid_size = cfg.value("grid_size", 61);
  ec.taus = as_doubles(cfg.value("taus", Json()), ec.taus);
  ec.cvar_taus = as_doubles(cfg.value("cvar_taus", Json()), ec.cvar_taus);
  ec.c_lambda = cfg.value("c_lambda", 0.1);
  ec.alpha = cfg.value("alpha", 0.05);
  ec.multipliers = cfg.value("multipliers", 1000);
  ec.seed = cfg.value("seed", 20240817ull);
  ec.out_dir = cfg.value("out", std::string("out"));

  Json config = cfg;
  config["subcommand"] = "estimate";
  const auto outputs = proxidist::run_estimate(ec, config);
  std::cout << "estimate: wrote " << outputs.output_files.size() << " files to " << ec.out_dir
            << " (n=" << outputs.n << ", critical value=" << outputs.critical_value << ")\n";
  return 0;
}

proxidist::ComponentRunConfig component_config(const Json& cfg, int component, long n) {
  proxidist::ComponentRunConfig rc;
  rc.component = component;
  rc.n = n;
  rc.rho = cfg.value("rho", 0.75);
  rc.replications = cfg.value("reps", 1000);
  rc.folds = cfg.value("folds", 5);
  rc.grid_size = cfg.value("grid_size", component == 1 ? 151 : 181);
  rc.multipliers = cfg.value("multipliers", component == 1 ? 1000 : 499);
  rc.alpha = cfg.value("alpha", 0.05);
  rc.c_lambda = cfg.value("c_lambda", 0.01);
  if (component == 3) {
    rc.taus = {0.02, 0.05, 0.10, 0.25, 0.50, 0.75, 0.90, 0.95, 0.98};
    rc.run_estd = true;
  }
  rc.taus = as_doubles(cfg.value("taus", Json()), rc.taus);
  rc.cvar_taus = as_doubles(cfg.value("cvar_taus", Json()), rc.cvar_taus);
  rc.n_truth = cfg.value("n_truth", 5000000L);
  rc.seed = cfg.value("seed", 20240817ull);
  return rc;
}

int cmd_simulate(const Json& cfg) {
  const std::string component = cfg.value("component", std::string("1"));
  Json hashed = cfg;
  hashed["subcommand"] = "simulate";
  const std::string hash = proxidist::config_hash(proxidist::canonical_config(hashed));
  auto fmt = proxidist::format_double;

  if (component == "2b") {
    std::vector<std::vector<std::string>> rows;
    std::vector<long> n_list =
        cfg.value("n_list", std::vector<long>{500, 1000, 2000, 4000, 8000, 16000, 32000});
    const struct {
      const char* name;
      double rho_l;
    } regimes[] = {{"regular", 1.8}, {"boundary", 1.5}, {"nonregular", 0.8}};
    for (const auto& regime : regimes) {
      proxidist::GaussBenchConfig gc;
      gc.rho_l = regime.rho_l;
      gc.n_list = n_list;
      gc.replications = cfg.value("reps", 3000);
      gc.seed = cfg.value("seed", 20240817ull);
      gc.sequence_length = cfg.value("sequence_length", 400);
      const auto result = proxidist::gaussian_bench(gc);
      const double boundary = gc.alpha_exp + 0.5;
      std::string status = "finite";
      if (std::abs(gc.rho_l - boundary) < 1e-12) status = "log-divergent";
      else if (gc.rho_l < boundary) status = "poly-divergent";
      const double poly =
          std::min(1.0, proxidist::nonregular_exponent(gc.alpha_exp, gc.beta_exp, gc.rho_l));
      for (const auto& row : result.rows) {
        rows.push_back({regime.name, fmt(gc.rho_l), std::to_string(row.n),
                        std::to_string(row.m_star), fmt(row.bias), fmt(row.variance),
                        fmt(row.mse), fmt(poly), fmt(result.empirical_exponent), status});
      }
    }
    proxidist::write_table(out_path(cfg, "panel_b.csv"), "mse", hash,
                           {"regime", "rho_l", "n", "m_star", "bias", "variance", "mse",
                            "poly_exponent", "empirical_exponent", "picard_status"},
                           rows);
    write_manifest(cfg, "simulate", {"panel_b.csv"});
    std::cout << "simulate 2b: wrote panel_b.csv (" << rows.size() << " rows)\n";
    return 0;
  }

  if (component == "2a") {
    const std::vector<double> rho_list =
        as_doubles(cfg.value("rho_list", Json()), {0.90, 0.75, 0.60, 0.45, 0.30, 0.20});
    const long n = cfg.value("n_list", std::vector<long>{4000}).front();
    const auto rows = proxidist::weak_proxy_sweep(
        rho_list, n, cfg.value("reps", 1000), cfg.value("seed", 20240817ull),
        cfg.value("grid_size", 161), cfg.value("multipliers", 499),
        cfg.value("n_truth", 5000000L));
    std::vector<std::vector<std::string>> table;
    for (const auto& r : rows) {
      table.push_back({fmt(r.rho), fmt(r.kappa_min), fmt(r.dual_norm), fmt(r.if_sd),
                       fmt(r.cdf_bias), fmt(r.cdf_rmse), fmt(r.pt_cover), fmt(r.pt_len),
                       fmt(r.sim_cover), fmt(r.sim_len), fmt(r.qte_rmse), fmt(r.qte_len),
                       std::to_string(r.failures)});
    }
    proxidist::write_table(out_path(cfg, "panel_a.csv"), "mixed", hash,
                           {"rho", "kappa_min", "dual_norm", "if_sd", "cdf_bias", "cdf_rmse",
                            "pt_cov", "pt_len", "sim_cov", "sim_len", "qte_rmse", "qte_len",
                            "failures"},
                           table);
    write_manifest(cfg, "simulate", {"panel_a.csv"});
    std::cout << "simulate 2a: wrote panel_a.csv (" << table.size() << " rows)\n";
    return 0;
  }

  if (component == "1" || component == "3") {
    const int comp = component == "1" ? 1 : 3;
    const std::vector<long> default_n = comp == 1 ? std::vector<long>{500, 1000, 2000, 4000, 8000}
                                                  : std::vector<long>{800, 1600, 3200, 6400};
    const std::vector<long> n_list = cfg.value("n_list", default_n);
    std::vector<std::vector<std::string>> summary_rows, qte_rows;
    for (long n : n_list) {
      const auto rc = component_config(cfg, comp, n);
      const auto s = proxidist::run_component_experiment(rc);
      summary_rows.push_back(
          {std::to_string(n), std::to_string(s.failures), fmt(s.kappa_min_mean),
           fmt(s.dual_norm_mean), fmt(s.if_sd_mean), fmt(s.f1_bias), fmt(s.f1_rmse),
           fmt(s.f1_cover), fmt(s.f1_len), fmt(s.cdf_cover), fmt(s.cdf_len),
           fmt(s.qte_df_sim_cover), fmt(s.estd_sim_cover), fmt(s.estd_len), fmt(s.cvar_cover),
           fmt(s.iso_ratio), std::to_string(s.iso_violations)});
      for (std::size_t t = 0; t < rc.taus.size(); ++t) {
        qte_rows.push_back({std::to_string(n), fmt(rc.taus[t]), fmt(s.qte_bias[t]),
                            fmt(s.qte_rmse[t]), fmt(s.naive_qte_bias[t]), fmt(s.por_qte_bias[t]),
                            fmt(s.pipw_qte_bias[t]), fmt(s.qte_df_cover[t]),
                            fmt(s.qte_df_len[t])});
      }
    }
    proxidist::write_table(out_path(cfg, "metrics.csv"), "mixed", hash,
                           {"n", "failures", "kappa_min", "dual_norm", "if_sd", "cdf_bias",
                            "cdf_rmse", "pt_cov", "pt_len", "sim_cov", "sim_len", "df_sim_cov",
                            "estd_sim_cov", "estd_len", "cvar_cov", "iso_ratio",
                            "iso_violations"},
                           summary_rows);
    proxidist::write_table(out_path(cfg, "qte_detail.csv"), "outcome", hash,
                           {"n", "tau", "pdr_bias", "pdr_rmse", "naive_bias", "por_bias",
                            "pipw_bias", "df_cov", "df_len"},
                           qte_rows);
    write_manifest(cfg, "simulate", {"metrics.csv", "qte_detail.csv"});
    std::cout << "simulate " << component << ": wrote metrics.csv and qte_detail.csv\n";
    return 0;
  }
  proxidist::fail_config("config", "component must be one of 1, 2a, 2b, 3");
}

int cmd_diagnose(const Json& cfg) {
  using namespace proxidist;
  Matrix bw, bz;
  Vector y;
  IntVector a;
  if (cfg.contains("data")) {
    EstimateConfig ec;
    ec.data_path = cfg["data"];
    ec.recipe = cfg.value("recipe", std::string("generic"));
    Dataset data =
        ec.recipe == "rhc" ? load_rhc(ec.data_path) : [&]() {
          const Json& s = cfg.at("schema");
          Schema schema;
          schema.y = s.value("y", std::string());
          schema.a = s.value("a", std::string());
          schema.z = s.value("z", std::vector<std::string>{});
          schema.w = s.value("w", std::vector<std::string>{});
          schema.x = s.value("x", std::vector<std::string>{});
          return load_dataset(ec.data_path, schema);
        }();
    const PreprocessPlan plan = fit_preprocess(data);
    const Design design = apply_preprocess(plan, data);
    const int k = std::min<int>(cfg.value("screen_k", 5), static_cast<int>(design.x.cols()));
    const ScreenResult screen = screen_covariates(design.x, data.a, data.y, k);
    Matrix screened(design.x.rows(), k);
    std::vector<std::string> names;
    for (int j = 0; j < k; ++j) {
      screened.col(j) = design.x.col(screen.selected[static_cast<std::size_t>(j)]);
      names.push_back(design.x_names[static_cast<std::size_t>(screen.selected[j])]);
    }
    bw = build_realdata_basis(screened, names, design.w, design.w_names).values;
    bz = build_realdata_basis(screened, names, design.z, design.z_names).values;
    y = data.y;
    a = data.a;
  } else {
    Dgp1Config dc;
    dc.rho = cfg.value("rho", 0.75);
    dc.n = cfg.value("n", 4000L);
    dc.seed = cfg.value("seed", 20240817ull);
    const SimulatedData sim = gen_component1(dc);
    bw = component_features(sim.data.w, sim.data.x_numeric);
    bz = component_features(sim.data.z, sim.data.x_numeric);
    y = sim.data.y;
    a = sim.data.a;
  }
  const Eigen::Index n = y.size();
  const FeatureStandardizer sw = FeatureStandardizer::fit(bw);
  const FeatureStandardizer sz = FeatureStandardizer::fit(bz);
  bw = sw.apply(bw);
  bz = sz.apply(bz);

  const double alpha_exponent = cfg.value("alpha_exponent", 1.0);
  std::vector<long> d_list;
  if (cfg.contains("d_list")) d_list = cfg["d_list"].get<std::vector<long>>();
  else {
    for (long d = 2; d <= bw.cols(); ++d) d_list.push_back(d);
  }
  Json hashed = cfg;
  hashed["subcommand"] = "diagnose";
  const std::string hash = config_hash(canonical_config(hashed));
  const double log_n = std::log(static_cast<double>(n));

  Json diag;
  diag["config_hash"] = hash;
  diag["n"] = static_cast<long>(n);
  std::vector<std::vector<std::string>> rows;
  auto fmt = format_double;
  for (long d : d_list) {
    if (d < 1 || d > bw.cols()) continue;
    std::vector<std::string> row;
    row.push_back(std::to_string(d));
    const double remainder =
        std::pow(static_cast<double>(d), 1.0 + 2.0 * alpha_exponent) * std::sqrt(log_n) /
        static_cast<double>(n);
    const bool admissible =
        std::pow(static_cast<double>(d), 1.0 + 2.0 * alpha_exponent) * std::sqrt(log_n) <
        std::sqrt(static_cast<double>(n));
    for (int arm = 0; arm < 2; ++arm) {
      const Grid grid = quantile_grid(y, 11);
      const MomentSystem ms =
          assemble_moments(arm, bw.leftCols(d), bz.leftCols(d), y, a, grid, {});
      const BridgeFit fit =
          solve_ridge(ms, 0.1 / std::sqrt(static_cast<double>(n)),
                      0.1 / std::sqrt(static_cast<double>(n)));
      const SpectralDiagnostics sd = spectral_diagnostics(ms, fit, bz.leftCols(d), a);
      row.push_back(fmt(sd.kappa_min));
      row.push_back(fmt(sd.kappa_min_within_arm));
      row.push_back(fmt(sd.alpha_norm));
      row.push_back(fmt(sd.q_weighted_norm));
      if (d == d_list.back()) {
        const std::string arm_key = "arm" + std::to_string(arm);
        std::vector<double> sv(sd.singular_values.data(),
                               sd.singular_values.data() + sd.singular_values.size());
        diag["singular_values"][arm_key] = sv;
        // Empirical Picard curve: loadings of mu_W on the right singular
        // vectors over the singular values.
        Eigen::JacobiSVD<Matrix> svd(ms.sigma, Eigen::ComputeThinU | Eigen::ComputeThinV);
        Grid s_seq, l_seq;
        const Vector loadings = svd.matrixV().transpose() * ms.mu_w;
        for (Eigen::Index j = 0; j < svd.singularValues().size(); ++j) {
          if (svd.singularValues()[j] <= 0.0) break;
          s_seq.push_back(svd.singularValues()[j]);
          l_seq.push_back(loadings[j]);
        }
        diag["picard_partial_sums"][arm_key] = picard_partial_sums(s_seq, l_seq);
      }
    }
    row.push_back(fmt(remainder));
    row.push_back(admissible ? "1" : "0");
    rows.push_back(row);
  }
  write_table(out_path(cfg, "dsweep.csv"), "spectrum", hash,
              {"d", "sigma_min_arm0", "kappa_arm0", "alpha_norm_arm0", "q_norm_arm0",
               "sigma_min_arm1", "kappa_arm1", "alpha_norm_arm1", "q_norm_arm1",
               "remainder_proxy", "admissible"},
              rows);
  diag["alpha_exponent"] = alpha_exponent;
  write_json(out_path(cfg, "diagnostics.json"), diag);
  write_manifest(cfg, "diagnose", {"dsweep.csv", "diagnostics.json"});
  std::cout << "diagnose: wrote dsweep.csv and diagnostics.json\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"proximal counterfactual distribution, quantile, and CVaR inference"};
  app.require_subcommand(1);

  CommonFlags est_flags, sim_flags, diag_flags, bench_flags;
  CLI::App* est = app.add_subcommand("estimate", "run the estimation pipeline on a dataset");
  add_common_flags(est, &est_flags);
  CLI::App* sim = app.add_subcommand("simulate", "run simulation experiments");
  add_common_flags(sim, &sim_flags);
  std::string sim_component;
  sim->add_option("--component", sim_component, "experiment id: 1, 2a, 2b, or 3");
  CLI::App* diag = app.add_subcommand("diagnose", "spectral weak-proxy diagnostics");
  add_common_flags(diag, &diag_flags);
  CLI::App* bench = app.add_subcommand("gaussian-bench", "sequence-model benchmark (alias)");
  add_common_flags(bench, &bench_flags);

  try {
    app.parse(argc, argv);
    if (est->parsed()) return cmd_estimate(resolve_config(est_flags));
    if (sim->parsed()) {
      Json cfg = resolve_config(sim_flags);
      if (!sim_component.empty()) cfg["component"] = sim_component;
      if (!cfg.contains("component")) cfg["component"] = "1";
      return cmd_simulate(cfg);
    }
    if (bench->parsed()) {
      Json cfg = resolve_config(bench_flags);
      cfg["component"] = "2b";
      return cmd_simulate(cfg);
    }
    if (diag->parsed()) return cmd_diagnose(resolve_config(diag_flags));
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 4;
  } catch (const proxidist::Error& e) {
    std::cerr << "error [stage " << e.stage() << "]: " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
