#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fosr/csv.hpp"
#include "fosr/dataset.hpp"
#include "fosr/draw_archive.hpp"
#include "fosr/dss.hpp"
#include "fosr/errors.hpp"
#include "fosr/gibbs.hpp"
#include "fosr/manifest.hpp"
#include "fosr/mcmc_config.hpp"
#include "fosr/rng.hpp"
#include "fosr/simulation.hpp"
#include "fosr/study.hpp"
#include "fosr/summaries.hpp"

namespace fosr {
namespace detail {

namespace fs = std::filesystem;

class WallTimer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(clock::now() - start_).count();
  }

 private:
  using clock = std::chrono::steady_clock;
  clock::time_point start_ = clock::now();
};

// An archive directory holds either one chain or chain_* subdirectories.
inline DrawArchive load_archive_or_chains(const fs::path& dir) {
  if (fs::exists(dir / "manifest.json")) return load_archive(dir);
  std::vector<fs::path> chains;
  if (fs::is_directory(dir))
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_directory() && e.path().filename().string().rfind("chain_", 0) == 0)
        chains.push_back(e.path());
  if (chains.empty())
    throw ValidationError("no draw archive found at " + dir.string());
  std::sort(chains.begin(), chains.end());
  std::vector<DrawArchive> loaded;
  loaded.reserve(chains.size());
  for (const auto& c : chains) loaded.push_back(load_archive(c));
  return merge_archives(loaded);
}

// Standardize a raw prediction design with the training transform.
inline Eigen::MatrixXd standardized_design(const fs::path& design_path,
                                           const DrawArchive& a) {
  FunctionalDataset tmp;
  auto rows = read_csv(design_path);
  if (rows.size() < 2) throw ValidationError("prediction design has no rows");
  const int p = static_cast<int>(rows[0].size());
  if (p != a.p) throw ValidationError("prediction design has wrong column count");
  Eigen::MatrixXd X(rows.size() - 1, p);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (static_cast<int>(rows[i].size()) != p)
      throw ValidationError("ragged prediction design row");
    for (int j = 0; j < p; ++j)
      X(i - 1, j) = parse_double(rows[i][j], design_path.string());
  }
  for (int j = 0; j < p; ++j)
    X.col(j) = (X.col(j).array() - a.scaling.mean[j]) / a.scaling.sd[j];
  return X;
}

struct SimulateOpts {
  SimParams sim;
  double missing_frac = 0.0;
  std::string out;
};

inline int cmd_simulate(const SimulateOpts& o) {
  WallTimer timer;
  auto [ds, truth] = generate_dataset(o.sim);
  if (o.missing_frac > 0.0) {
    Rng mrng(derive_seed(o.sim.seed, 1));
    apply_missingness(ds, o.missing_frac, mrng);
  }
  fs::create_directories(o.out);
  write_dataset(ds, fs::path(o.out) / "curves.csv", fs::path(o.out) / "design.csv");
  save_truth(truth, fs::path(o.out) / "truth.json");

  RunManifest man;
  man.command = "simulate";
  man.config = {{"n", o.sim.n},       {"m", o.sim.m},
                {"p", o.sim.p},       {"p1", o.sim.p1},
                {"rsnr", o.sim.rsnr}, {"missing_frac", o.missing_frac}};
  man.seed = o.sim.seed;
  man.wall_seconds = timer.seconds();
  write_run_manifest(man, o.out);
  std::cout << "wrote curves.csv, design.csv, truth.json to " << o.out << "\n";
  return 0;
}

struct FitOpts {
  std::string curves, design, config_path, out;
  std::optional<int> K, iters, burnin, thin;
  std::optional<std::uint64_t> seed;
  bool fix_basis = false;
  int chains = 1;
};

inline McmcConfig resolve_config(const FitOpts& o) {
  McmcConfig cfg;
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    if (!in) throw ValidationError("cannot open config " + o.config_path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string("bad config JSON: ") + e.what());
    }
    cfg = config_from_json(j);
  }
  if (o.K) cfg.K = *o.K;
  if (o.iters) cfg.n_iter = *o.iters;
  if (o.burnin) cfg.burn_in = *o.burnin;
  if (o.thin) cfg.thin = *o.thin;
  if (o.seed) cfg.seed = *o.seed;
  if (o.fix_basis) cfg.fix_basis = true;
  validate_config(cfg);
  return cfg;
}

inline int cmd_fit(const FitOpts& o) {
  WallTimer timer;
  if (o.chains < 1) throw ValidationError("chains must be at least 1");
  McmcConfig cfg = resolve_config(o);
  FunctionalDataset ds = load_dataset(o.curves, o.design);
  fs::create_directories(o.out);

  for (int c = 1; c <= o.chains; ++c) {
    McmcConfig ccfg = cfg;
    fs::path dir = o.out;
    if (o.chains > 1) {
      ccfg.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(c));
      dir /= "chain_" + std::to_string(c);
    }
    Rng rng(ccfg.seed);
    std::string prefix = o.chains > 1 ? "chain " + std::to_string(c) + ": " : "";
    DrawArchive archive = run_gibbs(ds, ccfg, rng, [&](const std::string& line) {
      std::cout << prefix << line << "\n";
    });
    save_archive(archive, dir);
  }

  RunManifest man;
  man.command = "fit";
  man.config = config_to_json(cfg);
  man.config["chains"] = o.chains;
  man.seed = cfg.seed;
  add_input_hash(man, o.curves);
  add_input_hash(man, o.design);
  if (!o.config_path.empty()) add_input_hash(man, o.config_path);
  man.wall_seconds = timer.seconds();
  write_run_manifest(man, o.out);
  std::cout << "wrote " << o.chains << (o.chains == 1 ? " archive" : " archives")
            << " to " << o.out << "\n";
  return 0;
}

struct SummarizeOpts {
  std::string archive, out;
  double level = 0.95;
};

inline int cmd_summarize(const SummarizeOpts& o) {
  WallTimer timer;
  if (o.level <= 0.0 || o.level >= 1.0)
    throw ValidationError("level must lie in (0,1)");
  DrawArchive a = load_archive_or_chains(o.archive);
  CoefficientSummary cs = summarize_coefficients(a, o.level);
  fs::create_directories(o.out);
  write_summary_csvs(cs, a.predictor_names, o.out);

  GbpvResult g = gbpv_pvalues(a);
  auto sel = gbpv_select(cs);
  nlohmann::json rep;
  rep["level"] = o.level;
  nlohmann::json per = nlohmann::json::array();
  for (int j = 0; j < a.p; ++j)
    per.push_back({{"name", a.predictor_names[j]},
                   {"pvalue", g.pvalue[j]},
                   {"band_excludes_zero", static_cast<bool>(sel[j])}});
  rep["predictors"] = per;
  std::ofstream rout(fs::path(o.out) / "gbpv.json");
  rout << rep.dump(1) << "\n";

  RunManifest man;
  man.command = "summarize";
  man.config = {{"level", o.level}};
  man.seed = a.config.seed;
  add_input_dir(man, o.archive);
  man.wall_seconds = timer.seconds();
  write_run_manifest(man, o.out);
  std::cout << "wrote " << a.p << " coefficient summaries to " << o.out << "\n";
  return 0;
}

struct SelectOpts {
  std::string archive, xtilde, out;
  int grid = 100;
  double decades = 4.0;
  double ci_level = 0.90;
};

inline int cmd_select(const SelectOpts& o) {
  WallTimer timer;
  DrawArchive a = load_archive_or_chains(o.archive);
  Eigen::MatrixXd Xt;
  if (!o.xtilde.empty()) Xt = standardized_design(o.xtilde, a);
  SelectionResult res = run_selection(a, o.grid, o.decades, o.ci_level, Xt);
  fs::create_directories(o.out);
  write_selection_csv(res, a.p, fs::path(o.out) / "selection.csv");

  const PathPoint& pick = res.path[res.chosen];
  double kkt_max = 0.0;
  bool converged_all = true;
  for (const auto& pt : res.path) {
    kkt_max = std::max(kkt_max, pt.kkt_residual);
    converged_all = converged_all && pt.converged;
  }
  nlohmann::json rep;
  rep["lambda"] = pick.lambda;
  rep["lambda_max"] = res.lambda_max;
  rep["model_size"] = pick.model_size;
  rep["fallback"] = res.fallback;
  rep["ci_level"] = o.ci_level;
  rep["grid_size"] = o.grid;
  rep["kkt_max"] = kkt_max;
  rep["converged_all"] = converged_all;
  nlohmann::json names = nlohmann::json::array();
  for (int j = 0; j < a.p; ++j)
    if (pick.active[j]) names.push_back(a.predictor_names[j]);
  rep["selected"] = names;
  auto rho_json = [](const Rho2Summary& r) {
    return nlohmann::json{{"mean", r.mean},
                          {"lo90", r.lo90},
                          {"hi90", r.hi90},
                          {"lo95", r.lo95},
                          {"hi95", r.hi95}};
  };
  rep["rho2_full"] = rho_json(res.rho2_full);
  rep["rho2_selected"] = rho_json(pick.rho2);
  std::ofstream rout(fs::path(o.out) / "report.json");
  if (!rout) throw ValidationError("cannot write report.json");
  rout << rep.dump(1) << "\n";

  // Sparse curve estimates F_bar Delta on the raw predictor scale.
  {
    Eigen::MatrixXd coefs =
        res.F_bar * res.Delta_chosen * a.scaling.sd.cwiseInverse().asDiagonal();
    std::ofstream cout_(fs::path(o.out) / "dss_coefficients.csv");
    cout_ << "tau";
    for (const auto& nm : a.predictor_names) cout_ << "," << nm;
    cout_ << "\n";
    for (int l = 0; l < a.m; ++l) {
      cout_ << format_double(a.tau[l]);
      for (int j = 0; j < a.p; ++j) cout_ << "," << format_double(coefs(l, j));
      cout_ << "\n";
    }
  }

  RunManifest man;
  man.command = "select";
  man.config = {{"grid", o.grid},
                {"decades", o.decades},
                {"ci_level", o.ci_level},
                {"xtilde", o.xtilde}};
  man.seed = a.config.seed;
  add_input_dir(man, o.archive);
  if (!o.xtilde.empty()) add_input_hash(man, o.xtilde);
  man.wall_seconds = timer.seconds();
  write_run_manifest(man, o.out);
  std::cout << "selected " << pick.model_size << " predictors at lambda "
            << format_double(pick.lambda) << (res.fallback ? " (fallback)" : "")
            << "\n";
  return 0;
}

struct StudyOpts {
  StudyParams params;
  std::string out;
};

inline int cmd_study(const StudyOpts& o) {
  WallTimer timer;
  StudyResult res = run_study(o.params, [](const std::string& line) {
    std::cout << line << "\n";
  });
  fs::create_directories(o.out);
  write_results_csv(res, fs::path(o.out) / "results.csv");
  write_roc_csv(res, o.params.sim.p, fs::path(o.out) / "roc.csv");

  nlohmann::json rep;
  rep["roc_area_dss"] = res.roc_area_dss;
  rep["roc_area_gbpv"] = res.roc_area_gbpv;
  rep["dss_selected_sizes"] = res.dss_selected_sizes;
  rep["dss_fallback"] = res.dss_fallback;
  rep["imputation_rmse"] = res.imputation_rmse;
  rep["sigma_stars"] = res.sigma_stars;
  std::ofstream rout(fs::path(o.out) / "study_summary.json");
  rout << rep.dump(1) << "\n";

  RunManifest man;
  man.command = "study";
  man.config = {{"n", o.params.sim.n},
                {"m", o.params.sim.m},
                {"p", o.params.sim.p},
                {"p1", o.params.sim.p1},
                {"rsnr", o.params.sim.rsnr},
                {"replicates", o.params.replicates},
                {"missing_frac", o.params.missing_frac},
                {"mcmc", config_to_json(o.params.mcmc)}};
  man.seed = o.params.seed;
  man.wall_seconds = timer.seconds();
  write_run_manifest(man, o.out);
  std::cout << "study complete: results.csv, roc.csv written to " << o.out << "\n";
  return 0;
}

}  // namespace detail

inline int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Bayesian function-on-scalars regression"};
  app.require_subcommand(1);

  detail::SimulateOpts sim;
  auto* c_sim = app.add_subcommand("simulate", "generate a synthetic dataset");
  c_sim->add_option("--n", sim.sim.n, "subjects");
  c_sim->add_option("--m", sim.sim.m, "grid points");
  c_sim->add_option("--p", sim.sim.p, "predictors");
  c_sim->add_option("--p1", sim.sim.p1, "active predictors");
  c_sim->add_option("--rsnr", sim.sim.rsnr, "root signal-to-noise ratio");
  c_sim->add_option("--seed", sim.sim.seed, "random seed");
  c_sim->add_option("--missing-frac", sim.missing_frac, "fraction of cells to mask");
  c_sim->add_option("--out", sim.out, "output directory")->required();

  detail::FitOpts fit;
  auto* c_fit = app.add_subcommand("fit", "run the Gibbs sampler");
  c_fit->add_option("--curves", fit.curves, "curves CSV")->required();
  c_fit->add_option("--design", fit.design, "design CSV")->required();
  c_fit->add_option("--K", fit.K, "number of basis functions");
  c_fit->add_option("--iters", fit.iters, "total iterations");
  c_fit->add_option("--burnin", fit.burnin, "burn-in iterations");
  c_fit->add_option("--thin", fit.thin, "thinning stride");
  c_fit->add_option("--seed", fit.seed, "random seed");
  c_fit->add_flag("--fix-basis", fit.fix_basis, "freeze loadings at the spline init");
  c_fit->add_option("--chains", fit.chains, "independent chains");
  c_fit->add_option("--config", fit.config_path, "JSON config (flags override)");
  c_fit->add_option("--out", fit.out, "output directory")->required();

  detail::SummarizeOpts sum;
  auto* c_sum = app.add_subcommand("summarize", "coefficient bands and p-values");
  c_sum->add_option("--archive", sum.archive, "draw archive directory")->required();
  c_sum->add_option("--level", sum.level, "credible level");
  c_sum->add_option("--out", sum.out, "output directory")->required();

  detail::SelectOpts sel;
  auto* c_sel = app.add_subcommand("select", "sparse predictor selection");
  c_sel->add_option("--archive", sel.archive, "draw archive directory")->required();
  c_sel->add_option("--grid", sel.grid, "penalty grid size");
  c_sel->add_option("--decades", sel.decades, "penalty grid span in decades");
  c_sel->add_option("--ci-level", sel.ci_level, "credible level for the rule");
  c_sel->add_option("--xtilde", sel.xtilde, "prediction design CSV (raw scale)");
  c_sel->add_option("--out", sel.out, "output directory")->required();

  detail::StudyOpts study;
  study.params.mcmc.n_iter = 3000;
  study.params.mcmc.burn_in = 1000;
  study.params.mcmc.thin = 2;
  auto* c_study = app.add_subcommand("study", "replicate simulation study");
  c_study->add_option("--n", study.params.sim.n, "subjects");
  c_study->add_option("--m", study.params.sim.m, "grid points");
  c_study->add_option("--p", study.params.sim.p, "predictors");
  c_study->add_option("--p1", study.params.sim.p1, "active predictors");
  c_study->add_option("--rsnr", study.params.sim.rsnr, "root signal-to-noise ratio");
  c_study->add_option("--replicates", study.params.replicates, "replicates");
  c_study->add_option("--K", study.params.mcmc.K, "number of basis functions");
  c_study->add_option("--iters", study.params.mcmc.n_iter, "total iterations");
  c_study->add_option("--burnin", study.params.mcmc.burn_in, "burn-in iterations");
  c_study->add_option("--thin", study.params.mcmc.thin, "thinning stride");
  c_study->add_option("--seed", study.params.seed, "master seed");
  c_study->add_option("--missing-frac", study.params.missing_frac,
                      "fraction of cells to mask");
  c_study->add_option("--out", study.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (c_sim->parsed()) return detail::cmd_simulate(sim);
    if (c_fit->parsed()) return detail::cmd_fit(fit);
    if (c_sum->parsed()) return detail::cmd_summarize(sum);
    if (c_sel->parsed()) return detail::cmd_select(sel);
    if (c_study->parsed()) return detail::cmd_study(study);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

}  // namespace fosr
