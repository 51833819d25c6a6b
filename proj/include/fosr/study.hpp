#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "fosr/csv.hpp"
#include "fosr/dss.hpp"
#include "fosr/gibbs.hpp"
#include "fosr/simulation.hpp"
#include "fosr/summaries.hpp"

namespace fosr {

struct StudyParams {
  SimParams sim;                 // per-replicate data shape (seed field unused)
  McmcConfig mcmc;               // shared sampler settings
  int replicates = 20;
  std::uint64_t seed = 1;        // master seed; replicates derive their own
  double missing_frac = 0.0;
};

struct MetricsRow {
  std::string method;
  int p = 0;
  int replicate = 0;
  double rmse = 0.0;
  double mciw = 0.0;
  double coverage = 0.0;
};

struct StudyResult {
  std::vector<MetricsRow> rows;
  std::vector<RocPoint> roc_dss, roc_gbpv;  // averaged at matched model size
  double roc_area_dss = 0.0;
  double roc_area_gbpv = 0.0;
  std::vector<int> dss_selected_sizes;      // per replicate
  std::vector<bool> dss_fallback;           // per replicate
  std::vector<double> imputation_rmse;      // per replicate, masked runs only
  std::vector<double> sigma_stars;          // per replicate noise SD
};

namespace detail {

inline Eigen::VectorXd gbpv_scores(const DrawArchive& a) {
  GbpvResult g = gbpv_pvalues(a);
  const int S = a.num_draws();
  Eigen::VectorXd score(a.p);
  // P-values move in steps of 1/S; the bounded max-stat term only breaks ties.
  for (int j = 0; j < a.p; ++j)
    score[j] = (1.0 - g.pvalue[j]) +
               g.max_stat[j] / (1.0 + g.max_stat[j]) / (2.0 * S);
  return score;
}

inline double imputation_rmse_for(const DrawArchive& a,
                                  const std::vector<MaskedCell>& held) {
  if (held.empty()) return 0.0;
  std::map<std::pair<int, int>, double> mean_imp;
  for (std::size_t c = 0; c < a.missing_cells.size(); ++c) {
    double acc = 0.0;
    for (int s = 0; s < a.num_draws(); ++s) acc += a.y_missing[s][c];
    mean_imp[a.missing_cells[c]] = acc / a.num_draws();
  }
  double sse = 0.0;
  for (const auto& h : held) {
    auto it = mean_imp.find({h.row, h.col});
    if (it == mean_imp.end())
      throw NumericalError("archive lost a masked cell");
    double d = it->second - h.value;
    sse += d * d;
  }
  return std::sqrt(sse / held.size());
}

}  // namespace detail

// Full-vs-ablation comparison over independent replicates: fit both models
// per dataset, score coefficient recovery and interval calibration, and
// rank predictors by the sparse-selection path and by band p-values.
inline StudyResult run_study(
    const StudyParams& sp,
    const std::function<void(const std::string&)>& progress = nullptr) {
  validate_config(sp.mcmc);
  if (sp.replicates < 1) throw ValidationError("need at least 1 replicate");
  StudyResult res;
  const int p = sp.sim.p;
  std::vector<std::vector<RocPoint>> dss_curves, gbpv_curves;

  for (int r = 0; r < sp.replicates; ++r) {
    std::uint64_t base = derive_seed(sp.seed, static_cast<std::uint64_t>(r) + 1);
    SimParams sim = sp.sim;
    sim.seed = derive_seed(base, 0);
    auto [ds, truth] = generate_dataset(sim);
    res.sigma_stars.push_back(truth.sigma_star);

    std::vector<MaskedCell> held;
    if (sp.missing_frac > 0.0) {
      Rng mrng(derive_seed(base, 1));
      held = apply_missingness(ds, sp.missing_frac, mrng);
    }

    McmcConfig full_cfg = sp.mcmc;
    full_cfg.fix_basis = false;
    full_cfg.seed = derive_seed(base, 2);
    Rng full_rng(full_cfg.seed);
    DrawArchive full = run_gibbs(ds, full_cfg, full_rng);

    McmcConfig fix_cfg = sp.mcmc;
    fix_cfg.fix_basis = true;
    fix_cfg.seed = derive_seed(base, 3);
    Rng fix_rng(fix_cfg.seed);
    DrawArchive fixed = run_gibbs(ds, fix_cfg, fix_rng);

    CoefficientSummary cs_full = summarize_coefficients(full);
    CoefficientSummary cs_fixed = summarize_coefficients(fixed);
    auto [w_full, c_full] = mciw_and_coverage(cs_full, truth);
    auto [w_fix, c_fix] = mciw_and_coverage(cs_fixed, truth);
    res.rows.push_back({"fosr", p, r, rmse(cs_full.mean, truth), w_full, c_full});
    res.rows.push_back(
        {"basis_spline", p, r, rmse(cs_fixed.mean, truth), w_fix, c_fix});

    SelectionResult sel = run_selection(full);
    res.dss_selected_sizes.push_back(sel.path[sel.chosen].model_size);
    res.dss_fallback.push_back(sel.fallback);
    dss_curves.push_back(roc_points(sel.entry_score, truth.support));
    gbpv_curves.push_back(roc_points(detail::gbpv_scores(full), truth.support));

    if (!held.empty())
      res.imputation_rmse.push_back(detail::imputation_rmse_for(full, held));

    if (progress) {
      char buf[160];
      std::snprintf(buf, sizeof(buf),
                    "replicate %d/%d: rmse fosr=%.4f basis_spline=%.4f dss_size=%d",
                    r + 1, sp.replicates, res.rows[res.rows.size() - 2].rmse,
                    res.rows.back().rmse, res.dss_selected_sizes.back());
      progress(buf);
    }
  }

  auto average = [&](const std::vector<std::vector<RocPoint>>& curves) {
    std::vector<RocPoint> avg(p + 1);
    for (int s = 0; s <= p; ++s) {
      avg[s].model_size = s;
      for (const auto& c : curves) {
        avg[s].fpr += c[s].fpr;
        avg[s].tpr += c[s].tpr;
      }
      avg[s].fpr /= curves.size();
      avg[s].tpr /= curves.size();
    }
    return avg;
  };
  res.roc_dss = average(dss_curves);
  res.roc_gbpv = average(gbpv_curves);
  res.roc_area_dss = roc_area(res.roc_dss);
  res.roc_area_gbpv = roc_area(res.roc_gbpv);
  return res;
}

inline void write_results_csv(const StudyResult& res,
                              const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw ValidationError("cannot write " + file.string());
  out << "method,p,replicate,rmse,mciw,coverage\n";
  for (const auto& row : res.rows)
    out << row.method << "," << row.p << "," << row.replicate << ","
        << format_double(row.rmse) << "," << format_double(row.mciw) << ","
        << format_double(row.coverage) << "\n";
}

inline void write_roc_csv(const StudyResult& res, int p,
                          const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw ValidationError("cannot write " + file.string());
  out << "method,p,model_size,fpr,tpr\n";
  for (const auto& pt : res.roc_dss)
    out << "dss," << p << "," << pt.model_size << "," << format_double(pt.fpr)
        << "," << format_double(pt.tpr) << "\n";
  for (const auto& pt : res.roc_gbpv)
    out << "gbpv," << p << "," << pt.model_size << "," << format_double(pt.fpr)
        << "," << format_double(pt.tpr) << "\n";
}

}  // namespace fosr
