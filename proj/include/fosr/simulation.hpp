#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fosr/dataset.hpp"
#include "fosr/errors.hpp"
#include "fosr/rng.hpp"
#include "fosr/stats.hpp"
#include "fosr/summaries.hpp"

namespace fosr {

struct SimParams {
  int n = 100;
  int m = 30;
  int p = 20;
  int p1 = 10;
  double rsnr = 5.0;
  std::uint64_t seed = 1;
};

// Ground truth behind a synthetic dataset: four orthonormal loading curves
// (constant plus detrended quadratic/cubic/quartic), sparse evenly spaced
// support, and noise scaled to the requested root signal-to-noise ratio.
struct SimTruth {
  Eigen::VectorXd tau;         // m
  Eigen::MatrixXd F_star;      // m x K*
  Eigen::MatrixXd A_star;      // K* x p
  Eigen::VectorXd mu_star;     // K*
  Eigen::MatrixXd Gamma_star;  // K* x n
  Eigen::MatrixXd Y_star;      // n x m noiseless curves
  std::vector<bool> support;   // p
  double sigma_star = 0.0;
  double rsnr = 0.0;

  // True coefficient functions, p x m.
  Eigen::MatrixXd alpha_tilde() const {
    return (F_star * A_star).transpose();
  }
};

inline constexpr int kNumTrueFactors = 4;

namespace detail {

// Discrete orthonormal polynomials on the grid: modified Gram-Schmidt of the
// Vandermonde columns [1, t, ..., t^4], retaining degrees {0, 2, 3, 4}.  The
// linear column is orthogonalized against but dropped, so every retained
// curve has zero trend and the first is exactly the constant 1/sqrt(m).
inline Eigen::MatrixXd true_loadings(const Eigen::VectorXd& tau) {
  const int m = static_cast<int>(tau.size());
  Eigen::MatrixXd V(m, kNumTrueFactors + 1);
  V.col(0).setOnes();
  for (int d = 1; d <= kNumTrueFactors; ++d)
    V.col(d) = V.col(d - 1).cwiseProduct(tau);
  for (int k = 0; k <= kNumTrueFactors; ++k) {
    for (int rep = 0; rep < 2; ++rep)
      for (int l = 0; l < k; ++l)
        V.col(k) -= V.col(l).dot(V.col(k)) * V.col(l);
    double nrm = V.col(k).norm();
    if (nrm < 1e-12) throw NumericalError("degenerate polynomial loadings");
    V.col(k) /= nrm;
  }
  Eigen::MatrixXd F(m, kNumTrueFactors);
  F.col(0) = V.col(0);
  F.rightCols(kNumTrueFactors - 1) = V.rightCols(kNumTrueFactors - 1);
  return F;
}

inline std::vector<int> support_indices(int p, int p1) {
  std::vector<int> idx;
  for (int r = 0; r < p1; ++r) {
    double pos = (p1 == 1) ? 1.0 : 1.0 + (p - 1.0) * r / (p1 - 1.0);
    int j = static_cast<int>(std::lround(pos)) - 1;
    if (idx.empty() || idx.back() != j) idx.push_back(j);
  }
  return idx;
}

inline int truncated_poisson(Rng& rng, double mean, int lo, int hi) {
  for (;;) {
    int x = rng.poisson(mean);
    if (x >= lo && x <= hi) return x;
  }
}

}  // namespace detail

inline std::pair<FunctionalDataset, SimTruth> generate_dataset(const SimParams& sp) {
  if (sp.p < sp.p1 || sp.p1 < 1) throw ValidationError("need p >= p1 >= 1");
  if (sp.n < 2) throw ValidationError("need n >= 2");
  if (sp.m < kNumTrueFactors + 1)
    throw ValidationError("need m >= 5 grid points for the quartic loadings");
  if (!(sp.rsnr > 0)) throw ValidationError("rsnr must be positive");
  Rng rng(sp.seed);
  const int K = kNumTrueFactors;

  SimTruth tr;
  tr.rsnr = sp.rsnr;
  tr.tau = Eigen::VectorXd::LinSpaced(sp.m, 0.0, 1.0);
  tr.F_star = detail::true_loadings(tr.tau);

  // Predictors with AR(1) dependence across the index, standard normal margins.
  const double rho = 0.75;
  Eigen::MatrixXd X(sp.n, sp.p);
  for (int i = 0; i < sp.n; ++i) {
    X(i, 0) = rng.normal();
    for (int j = 1; j < sp.p; ++j)
      X(i, j) = rho * X(i, j - 1) + std::sqrt(1.0 - rho * rho) * rng.normal();
  }

  auto idx = detail::support_indices(sp.p, sp.p1);
  tr.support.assign(sp.p, false);
  for (int j : idx) tr.support[j] = true;

  tr.A_star = Eigen::MatrixXd::Zero(K, sp.p);
  for (int j : idx) {
    int kj = detail::truncated_poisson(rng, 1.0, 1, K);
    // Uniformly chosen factor subset of size kj (partial Fisher-Yates).
    int ks[kNumTrueFactors];
    for (int k = 0; k < K; ++k) ks[k] = k;
    for (int r = 0; r < kj; ++r) {
      int pick = r + std::min(static_cast<int>(rng.uniform() * (K - r)), K - r - 1);
      std::swap(ks[r], ks[pick]);
      tr.A_star(ks[r], j) = rng.normal(0.0, 1.0 / (ks[r] + 1));
    }
  }

  tr.mu_star.resize(K);
  for (int k = 0; k < K; ++k) tr.mu_star[k] = 1.0 / (k + 1);

  tr.Gamma_star.resize(K, sp.n);
  for (int k = 0; k < K; ++k)
    for (int i = 0; i < sp.n; ++i)
      tr.Gamma_star(k, i) = rng.normal(0.0, 1.0 / (k + 1));

  Eigen::MatrixXd Beta = tr.mu_star.replicate(1, sp.n) +
                         tr.A_star * X.transpose() + tr.Gamma_star;
  tr.Y_star = (tr.F_star * Beta).transpose();

  std::vector<double> flat(tr.Y_star.data(), tr.Y_star.data() + tr.Y_star.size());
  tr.sigma_star = sd_of(flat) / sp.rsnr;

  FunctionalDataset ds;
  ds.tau = tr.tau;
  ds.X = X;
  ds.predictor_names.resize(sp.p);
  for (int j = 0; j < sp.p; ++j) ds.predictor_names[j] = "x" + std::to_string(j + 1);
  ds.Y = tr.Y_star;
  for (int i = 0; i < sp.n; ++i)
    for (int l = 0; l < sp.m; ++l) ds.Y(i, l) += tr.sigma_star * rng.normal();
  ds.observed = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(
      sp.n, sp.m, true);
  validate_dataset(ds);
  return {std::move(ds), std::move(tr)};
}

struct MaskedCell {
  int row = 0, col = 0;
  double value = 0.0;
};

// Mask cells independently at the given rate, never emptying a row.
// Returns the held-out values for imputation scoring.
inline std::vector<MaskedCell> apply_missingness(FunctionalDataset& ds,
                                                 double frac, Rng& rng) {
  if (frac < 0.0 || frac >= 1.0) throw ValidationError("missing fraction must be in [0,1)");
  const int n = ds.n(), m = ds.m();
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> mask(n, m);
  for (int i = 0; i < n; ++i)
    for (int l = 0; l < m; ++l) mask(i, l) = rng.uniform() < frac;
  for (int i = 0; i < n; ++i)
    if (mask.row(i).all()) {
      int keep = static_cast<int>(rng.uniform() * m);
      mask(i, std::min(keep, m - 1)) = false;
    }
  std::vector<MaskedCell> held;
  for (int i = 0; i < n; ++i)
    for (int l = 0; l < m; ++l)
      if (mask(i, l) && ds.observed(i, l)) {
        held.push_back({i, l, ds.Y(i, l)});
        ds.Y(i, l) = std::numeric_limits<double>::quiet_NaN();
        ds.observed(i, l) = false;
      }
  validate_dataset(ds);
  return held;
}

namespace detail {

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& M) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < M.rows(); ++i) {
    nlohmann::json r = nlohmann::json::array();
    for (int j = 0; j < M.cols(); ++j) r.push_back(M(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& rows) {
  if (!rows.is_array() || rows.empty()) throw ValidationError("expected matrix rows");
  int r = static_cast<int>(rows.size());
  int c = static_cast<int>(rows[0].size());
  Eigen::MatrixXd M(r, c);
  for (int i = 0; i < r; ++i) {
    if (static_cast<int>(rows[i].size()) != c)
      throw ValidationError("ragged matrix rows");
    for (int j = 0; j < c; ++j) M(i, j) = rows[i][j].get<double>();
  }
  return M;
}

}  // namespace detail

inline void save_truth(const SimTruth& tr, const std::filesystem::path& file) {
  nlohmann::json j;
  j["tau"] = std::vector<double>(tr.tau.data(), tr.tau.data() + tr.tau.size());
  j["F_star"] = detail::matrix_to_json(tr.F_star);
  j["A_star"] = detail::matrix_to_json(tr.A_star);
  j["mu_star"] =
      std::vector<double>(tr.mu_star.data(), tr.mu_star.data() + tr.mu_star.size());
  j["Gamma_star"] = detail::matrix_to_json(tr.Gamma_star);
  j["Y_star"] = detail::matrix_to_json(tr.Y_star);
  j["support"] = tr.support;
  j["sigma_star"] = tr.sigma_star;
  j["rsnr"] = tr.rsnr;
  std::ofstream out(file);
  if (!out) throw ValidationError("cannot write " + file.string());
  out << j.dump(1) << "\n";
}

inline SimTruth load_truth(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ValidationError("cannot open " + file.string());
  nlohmann::json j = nlohmann::json::parse(in, nullptr, true);
  SimTruth tr;
  auto tau = j.at("tau").get<std::vector<double>>();
  tr.tau = Eigen::Map<Eigen::VectorXd>(tau.data(), tau.size());
  tr.F_star = detail::matrix_from_json(j.at("F_star"));
  tr.A_star = detail::matrix_from_json(j.at("A_star"));
  auto mu = j.at("mu_star").get<std::vector<double>>();
  tr.mu_star = Eigen::Map<Eigen::VectorXd>(mu.data(), mu.size());
  tr.Gamma_star = detail::matrix_from_json(j.at("Gamma_star"));
  tr.Y_star = detail::matrix_from_json(j.at("Y_star"));
  tr.support = j.at("support").get<std::vector<bool>>();
  tr.sigma_star = j.at("sigma_star").get<double>();
  tr.rsnr = j.at("rsnr").get<double>();
  return tr;
}

// Root mean squared error between estimated and true coefficient functions,
// both p x m on the raw predictor scale.
inline double rmse(const Eigen::MatrixXd& estimate, const SimTruth& tr) {
  Eigen::MatrixXd truth = tr.alpha_tilde();
  if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols())
    throw ValidationError("estimate shape does not match truth");
  return std::sqrt((estimate - truth).squaredNorm() / truth.size());
}

// Mean width and empirical coverage of the pointwise intervals against the
// true coefficient functions, averaged over all (predictor, grid) cells.
inline std::pair<double, double> mciw_and_coverage(const CoefficientSummary& cs,
                                                   const SimTruth& tr) {
  Eigen::MatrixXd truth = tr.alpha_tilde();
  if (cs.mean.rows() != truth.rows() || cs.mean.cols() != truth.cols())
    throw ValidationError("summary shape does not match truth");
  double width = 0.0, cover = 0.0;
  for (int j = 0; j < truth.rows(); ++j)
    for (int l = 0; l < truth.cols(); ++l) {
      width += cs.pw_hi(j, l) - cs.pw_lo(j, l);
      cover += (cs.pw_lo(j, l) <= truth(j, l) && truth(j, l) <= cs.pw_hi(j, l));
    }
  return {width / truth.size(), cover / truth.size()};
}

struct RocPoint {
  int model_size = 0;
  double fpr = 0.0;
  double tpr = 0.0;
};

// Sweep model sizes 0..p down a score ranking (higher first, index breaks
// ties); each size contributes one (fpr, tpr) point.
inline std::vector<RocPoint> roc_points(const Eigen::VectorXd& scores,
                                        const std::vector<bool>& support) {
  const int p = static_cast<int>(support.size());
  if (scores.size() != p) throw ValidationError("score length mismatch");
  std::vector<int> order(p);
  for (int j = 0; j < p; ++j) order[j] = j;
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores[a] > scores[b]; });
  int pos = 0;
  for (bool s : support) pos += s;
  int neg = p - pos;

  std::vector<RocPoint> pts(p + 1);
  int tp = 0, fp = 0;
  pts[0] = {0, 0.0, 0.0};
  for (int s = 1; s <= p; ++s) {
    if (support[order[s - 1]]) ++tp; else ++fp;
    pts[s].model_size = s;
    pts[s].fpr = neg > 0 ? static_cast<double>(fp) / neg : 0.0;
    pts[s].tpr = pos > 0 ? static_cast<double>(tp) / pos : 1.0;
  }
  return pts;
}

// Trapezoid area under a curve given as (fpr, tpr) points sorted by fpr.
inline double roc_area(const std::vector<RocPoint>& pts) {
  double area = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    area += 0.5 * (pts[i].tpr + pts[i - 1].tpr) * (pts[i].fpr - pts[i - 1].fpr);
  return area;
}

}  // namespace fosr
