#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "fosr/csv.hpp"
#include "fosr/draw_archive.hpp"
#include "fosr/errors.hpp"
#include "fosr/stats.hpp"

namespace fosr {

// Posterior draws of the coefficient functions alpha_j(tau) = sum_k f_k A_{k,j},
// mapped back to the raw predictor scale.  One p x m matrix per draw.
inline std::vector<Eigen::MatrixXd> coefficient_draws(const DrawArchive& a) {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(a.F.size());
  Eigen::VectorXd inv_sd = a.scaling.sd.cwiseInverse();
  for (std::size_t s = 0; s < a.F.size(); ++s)
    out.push_back(inv_sd.asDiagonal() * a.A[s].transpose() * a.F[s].transpose());
  return out;
}

// Draws of one predictor's coefficient function, S x m, raw scale.
inline Eigen::MatrixXd coefficient_draws_for(const DrawArchive& a, int j) {
  const int S = a.num_draws();
  Eigen::MatrixXd D(S, a.m);
  double inv_sd = 1.0 / a.scaling.sd[j];
  for (int s = 0; s < S; ++s)
    D.row(s) = (a.F[s] * (a.A[s].col(j) * inv_sd)).transpose();
  return D;
}

struct Band {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
};

// Simultaneous band from the max of standardized deviations: the level
// quantile q of max_l |draw - mean| / sd gives mean +- q sd.  Grid points
// with zero posterior spread degenerate to the mean and drop out of the max.
inline Band simultaneous_band(const Eigen::MatrixXd& draws, double level) {
  const int S = static_cast<int>(draws.rows());
  const int m = static_cast<int>(draws.cols());
  if (S < 100) throw ValidationError("need at least 100 draws for a simultaneous band");
  Eigen::VectorXd mean = draws.colwise().mean();
  Eigen::VectorXd sd(m);
  for (int l = 0; l < m; ++l)
    sd[l] = std::sqrt((draws.col(l).array() - mean[l]).square().sum() / (S - 1));

  std::vector<double> maxdev(S, 0.0);
  for (int s = 0; s < S; ++s) {
    double mx = 0.0;
    for (int l = 0; l < m; ++l)
      if (sd[l] > 0.0) mx = std::max(mx, std::abs(draws(s, l) - mean[l]) / sd[l]);
    maxdev[s] = mx;
  }
  double q = quantile(std::move(maxdev), level);

  Band b;
  b.lo = mean - q * sd;
  b.hi = mean + q * sd;
  return b;
}

// Pointwise equal-tail interval at the same level.
inline Band pointwise_band(const Eigen::MatrixXd& draws, double level) {
  const int m = static_cast<int>(draws.cols());
  Band b;
  b.lo.resize(m);
  b.hi.resize(m);
  for (int l = 0; l < m; ++l) {
    std::vector<double> col(draws.col(l).data(), draws.col(l).data() + draws.rows());
    std::sort(col.begin(), col.end());
    b.lo[l] = quantile_sorted(col, 0.5 * (1.0 - level));
    b.hi[l] = quantile_sorted(col, 0.5 * (1.0 + level));
  }
  return b;
}

// Per-predictor coefficient summaries on a common grid: posterior mean,
// pointwise interval, simultaneous band (all p x m, raw predictor scale).
struct CoefficientSummary {
  Eigen::VectorXd tau;
  Eigen::MatrixXd mean, pw_lo, pw_hi, sim_lo, sim_hi;
  double level = 0.95;
};

inline CoefficientSummary summarize_coefficients(const DrawArchive& a,
                                                 double level = 0.95) {
  CoefficientSummary cs;
  cs.tau = a.tau;
  cs.level = level;
  cs.mean.resize(a.p, a.m);
  cs.pw_lo.resize(a.p, a.m);
  cs.pw_hi.resize(a.p, a.m);
  cs.sim_lo.resize(a.p, a.m);
  cs.sim_hi.resize(a.p, a.m);
  for (int j = 0; j < a.p; ++j) {
    Eigen::MatrixXd D = coefficient_draws_for(a, j);
    cs.mean.row(j) = D.colwise().mean();
    Band pw = pointwise_band(D, level);
    Band sim = simultaneous_band(D, level);
    cs.pw_lo.row(j) = pw.lo.transpose();
    cs.pw_hi.row(j) = pw.hi.transpose();
    cs.sim_lo.row(j) = sim.lo.transpose();
    cs.sim_hi.row(j) = sim.hi.transpose();
  }
  return cs;
}

// Global band p-value per predictor: the fraction of draws whose own max
// standardized deviation exceeds that of the posterior mean curve.  A
// predictor's band at level L excludes zero somewhere iff pvalue <= 1 - L.
struct GbpvResult {
  Eigen::VectorXd pvalue;    // p
  Eigen::VectorXd max_stat;  // p, standardized max of the mean curve
};

inline GbpvResult gbpv_pvalues(const DrawArchive& a) {
  GbpvResult r;
  r.pvalue.resize(a.p);
  r.max_stat.resize(a.p);
  const int S = a.num_draws();
  for (int j = 0; j < a.p; ++j) {
    Eigen::MatrixXd D = coefficient_draws_for(a, j);
    Eigen::VectorXd mean = D.colwise().mean();
    Eigen::VectorXd sd(a.m);
    for (int l = 0; l < a.m; ++l)
      sd[l] = std::sqrt((D.col(l).array() - mean[l]).square().sum() / (S - 1));
    double T = 0.0;
    for (int l = 0; l < a.m; ++l)
      if (sd[l] > 0.0) T = std::max(T, std::abs(mean[l]) / sd[l]);
    int exceed = 0;
    for (int s = 0; s < S; ++s) {
      double mx = 0.0;
      for (int l = 0; l < a.m; ++l)
        if (sd[l] > 0.0) mx = std::max(mx, std::abs(D(s, l) - mean[l]) / sd[l]);
      if (mx >= T) ++exceed;
    }
    r.pvalue[j] = static_cast<double>(exceed) / S;
    r.max_stat[j] = T;
  }
  return r;
}

// Select predictors whose simultaneous band excludes zero somewhere.
inline std::vector<bool> gbpv_select(const CoefficientSummary& cs) {
  const int p = static_cast<int>(cs.mean.rows());
  std::vector<bool> sel(p, false);
  for (int j = 0; j < p; ++j)
    for (int l = 0; l < cs.mean.cols(); ++l)
      if (cs.sim_lo(j, l) > 0.0 || cs.sim_hi(j, l) < 0.0) {
        sel[j] = true;
        break;
      }
  return sel;
}

// One CSV per predictor: tau, mean, pw_lo, pw_hi, sim_lo, sim_hi.
inline void write_summary_csvs(const CoefficientSummary& cs,
                               const std::vector<std::string>& names,
                               const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  for (int j = 0; j < cs.mean.rows(); ++j) {
    std::ofstream out(dir / ("coef_" + names[j] + ".csv"));
    if (!out) throw ValidationError("cannot write summary CSV for " + names[j]);
    out << "tau,mean,pw_lo,pw_hi,sim_lo,sim_hi\n";
    for (int l = 0; l < cs.mean.cols(); ++l)
      out << format_double(cs.tau[l]) << "," << format_double(cs.mean(j, l)) << ","
          << format_double(cs.pw_lo(j, l)) << "," << format_double(cs.pw_hi(j, l))
          << "," << format_double(cs.sim_lo(j, l)) << ","
          << format_double(cs.sim_hi(j, l)) << "\n";
  }
}

}  // namespace fosr
