#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "fosr/csv.hpp"
#include "fosr/draw_archive.hpp"
#include "fosr/errors.hpp"
#include "fosr/stats.hpp"

namespace fosr {

// Sparse posterior summarization: approximate the posterior mean regression
// fit R_i = mu_bar + A_bar x_i by an intercept plus a column-sparse K x p
// matrix, one penalty group per predictor (its K factor coefficients).
struct DssProblem {
  Eigen::VectorXd mu_bar;  // K
  Eigen::MatrixXd A_bar;   // K x p
  Eigen::MatrixXd F_bar;   // m x K, for the final curve estimator F_bar * Delta
  Eigen::MatrixXd X;       // n x p prediction design (standardized scale)
  Eigen::VectorXd w;       // p adaptive group weights
  Eigen::MatrixXd R;       // K x n fitted targets mu_bar + A_bar x_i
  double nm = 0.0;         // normalizing count for the quadratic term
};

inline constexpr double kMaxGroupWeight = 1e12;

// X_tilde overrides the training design (same standardized scale, n' x p).
inline DssProblem build_dss_problem(const DrawArchive& a,
                                    const Eigen::MatrixXd& X_tilde = {}) {
  if (a.num_draws() < 1) throw ValidationError("empty archive");
  DssProblem prob;
  prob.mu_bar = Eigen::VectorXd::Zero(a.K);
  prob.A_bar = Eigen::MatrixXd::Zero(a.K, a.p);
  prob.F_bar = Eigen::MatrixXd::Zero(a.m, a.K);
  for (int s = 0; s < a.num_draws(); ++s) {
    prob.A_bar += a.A[s];
    prob.mu_bar += a.mu[s];
    prob.F_bar += a.F[s];
  }
  prob.A_bar /= a.num_draws();
  prob.mu_bar /= a.num_draws();
  prob.F_bar /= a.num_draws();
  prob.X = X_tilde.size() ? X_tilde : a.X;
  if (prob.X.cols() != a.p)
    throw ValidationError("prediction design has wrong number of columns");
  prob.R = prob.mu_bar.replicate(1, prob.X.rows()) +
           prob.A_bar * prob.X.transpose();
  prob.w.resize(a.p);
  for (int j = 0; j < a.p; ++j)
    prob.w[j] = std::min(kMaxGroupWeight,
                         1.0 / std::max(prob.A_bar.col(j).norm(),
                                        1.0 / kMaxGroupWeight));
  prob.nm = static_cast<double>(prob.X.rows()) * a.m;
  return prob;
}

struct GroupLassoFit {
  Eigen::MatrixXd Delta;    // K x p
  Eigen::VectorXd delta0;   // K
  double kkt_residual = 0;  // max group stationarity violation
  int sweeps = 0;
  bool converged = false;
};

// Smallest penalty at which every group is zero (with delta0 at the row means).
inline double lambda_max_for(const DssProblem& prob) {
  Eigen::VectorXd rbar = prob.R.rowwise().mean();
  Eigen::MatrixXd Rc = prob.R.colwise() - rbar;
  double lmax = 0.0;
  for (int j = 0; j < prob.X.cols(); ++j) {
    double znorm = (2.0 / prob.nm) * (Rc * prob.X.col(j)).norm();
    lmax = std::max(lmax, znorm / prob.w[j]);
  }
  return lmax;
}

// Cyclic block coordinate descent with group soft-thresholding.  `fit` is
// used as the warm start and overwritten.
inline void solve_group_lasso(const DssProblem& prob, double lambda,
                              GroupLassoFit& fit, double tol = 1e-8,
                              int max_sweeps = 10000) {
  const int K = static_cast<int>(prob.R.rows());
  const int p = static_cast<int>(prob.X.cols());
  const int n = static_cast<int>(prob.X.rows());
  if (fit.Delta.rows() != K || fit.Delta.cols() != p) {
    fit.Delta = Eigen::MatrixXd::Zero(K, p);
    fit.delta0 = Eigen::VectorXd::Zero(K);
  }

  Eigen::VectorXd c(p);
  for (int j = 0; j < p; ++j)
    c[j] = (2.0 / prob.nm) * prob.X.col(j).squaredNorm();

  // Residual matrix E = R - delta0 1' - Delta X', maintained incrementally.
  Eigen::MatrixXd E = prob.R - fit.delta0.replicate(1, n) -
                      fit.Delta * prob.X.transpose();

  fit.sweeps = 0;
  fit.converged = false;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double max_change = 0.0;

    Eigen::VectorXd shift = E.rowwise().mean();
    E.colwise() -= shift;
    fit.delta0 += shift;
    max_change = std::max(max_change, shift.cwiseAbs().maxCoeff());

    for (int j = 0; j < p; ++j) {
      Eigen::VectorXd old = fit.Delta.col(j);
      Eigen::VectorXd z = (2.0 / prob.nm) * (E * prob.X.col(j)) + c[j] * old;
      double znorm = z.norm();
      double thresh = lambda * prob.w[j];
      Eigen::VectorXd next;
      if (znorm <= thresh || c[j] <= 0.0)
        next = Eigen::VectorXd::Zero(K);
      else
        next = (z / c[j]) * (1.0 - thresh / znorm);
      Eigen::VectorXd diff = next - old;
      double ch = diff.cwiseAbs().maxCoeff();
      if (ch > 0.0) {
        E.noalias() -= diff * prob.X.col(j).transpose();
        fit.Delta.col(j) = next;
        max_change = std::max(max_change, ch);
      }
    }
    ++fit.sweeps;
    if (max_change < tol) {
      fit.converged = true;
      break;
    }
  }

  // Certify stationarity: the quadratic term's gradient must match the
  // penalty subgradient on active groups and stay inside the ball otherwise.
  double kkt = (2.0 / prob.nm) * E.rowwise().sum().norm();
  for (int j = 0; j < p; ++j) {
    Eigen::VectorXd g = (2.0 / prob.nm) * (E * prob.X.col(j));
    double dn = fit.Delta.col(j).norm();
    if (dn > 0.0)
      kkt = std::max(kkt, (g - lambda * prob.w[j] * fit.Delta.col(j) / dn).norm());
    else
      kkt = std::max(kkt, std::max(0.0, g.norm() - lambda * prob.w[j]));
  }
  fit.kkt_residual = kkt;
}

// Proportion of predictive variability captured by the regression component,
// one value per posterior draw; the penalized variant charges the sparse
// approximation error against the same budget.
struct Rho2Summary {
  double mean = 0, lo90 = 0, hi90 = 0, lo95 = 0, hi95 = 0;
};

namespace detail {

inline Rho2Summary summarize_rho2(std::vector<double> v) {
  Rho2Summary s;
  s.mean = mean_of(v);
  std::sort(v.begin(), v.end());
  s.lo90 = quantile_sorted(v, 0.05);
  s.hi90 = quantile_sorted(v, 0.95);
  s.lo95 = quantile_sorted(v, 0.025);
  s.hi95 = quantile_sorted(v, 0.975);
  return s;
}

// Draw-level pieces of the variance decomposition: signal tr(A G A') with
// G = X'X, and noise nm sigma_eps^2 + sum sigma_gamma^2.
struct Rho2Parts {
  std::vector<double> signal, noise;
};

inline Rho2Parts rho2_parts(const DrawArchive& a, const Eigen::MatrixXd& X) {
  Eigen::MatrixXd G = X.transpose() * X;
  Rho2Parts parts;
  const int S = a.num_draws();
  parts.signal.resize(S);
  parts.noise.resize(S);
  double nm = static_cast<double>(X.rows()) * a.m;
  for (int s = 0; s < S; ++s) {
    parts.signal[s] = ((a.A[s] * G).cwiseProduct(a.A[s])).sum();
    parts.noise[s] =
        nm * a.sigma_eps[s] * a.sigma_eps[s] + a.sigma_gamma[s].squaredNorm();
  }
  return parts;
}

}  // namespace detail

inline std::vector<double> rho2_posterior(const DrawArchive& a,
                                          const Eigen::MatrixXd& X_tilde = {}) {
  auto parts = detail::rho2_parts(a, X_tilde.size() ? X_tilde : a.X);
  std::vector<double> out(parts.signal.size());
  for (std::size_t s = 0; s < out.size(); ++s)
    out[s] = parts.signal[s] / (parts.signal[s] + parts.noise[s]);
  return out;
}

inline std::vector<double> rho2_lambda_posterior(
    const DrawArchive& a, const Eigen::MatrixXd& Delta,
    const Eigen::MatrixXd& X_tilde = {}) {
  const Eigen::MatrixXd& X = X_tilde.size() ? X_tilde : a.X;
  auto parts = detail::rho2_parts(a, X);
  Eigen::MatrixXd DG = Delta * (X.transpose() * X);
  double tdd = (DG.cwiseProduct(Delta)).sum();
  std::vector<double> out(parts.signal.size());
  for (std::size_t s = 0; s < out.size(); ++s) {
    double cross = (DG.cwiseProduct(a.A[s])).sum();
    double misfit = std::max(0.0, parts.signal[s] - 2.0 * cross + tdd);
    out[s] = parts.signal[s] / (parts.signal[s] + parts.noise[s] + misfit);
  }
  return out;
}

struct PathPoint {
  double lambda = 0;
  int model_size = 0;
  std::vector<bool> active;
  Rho2Summary rho2;
  double kkt_residual = 0;
  bool converged = false;
};

struct SelectionResult {
  std::vector<PathPoint> path;    // descending lambda
  int chosen = -1;                // index into path
  bool fallback = false;          // no path point met the rule
  Rho2Summary rho2_full;
  double lambda_max = 0;
  Eigen::MatrixXd Delta_chosen;   // K x p, standardized scale
  Eigen::VectorXd delta0_chosen;  // K
  Eigen::MatrixXd F_bar;          // the curve estimator is F_bar * Delta_chosen
  Eigen::VectorXd entry_score;    // p, higher = enters the path earlier
};

// Sweep a descending penalty grid with warm starts, then pick the smallest
// model whose penalized variance-explained interval still covers the full
// model's posterior mean; among equal sizes the heavier penalty wins.
inline SelectionResult run_selection(const DrawArchive& a, int n_lambda = 100,
                                     double decades = 4.0,
                                     double ci_level = 0.90,
                                     const Eigen::MatrixXd& X_tilde = {}) {
  if (ci_level != 0.90 && ci_level != 0.95)
    throw ValidationError("selection rule supports credible levels 0.90 and 0.95");
  DssProblem prob = build_dss_problem(a, X_tilde);
  const int p = static_cast<int>(prob.X.cols());

  SelectionResult res;
  res.F_bar = prob.F_bar;
  res.lambda_max = lambda_max_for(prob);
  if (!(res.lambda_max > 0.0))
    throw NumericalError("degenerate selection problem: all fitted targets constant");
  res.rho2_full = detail::summarize_rho2(rho2_posterior(a, prob.X));

  auto parts = detail::rho2_parts(a, prob.X);
  Eigen::MatrixXd G = prob.X.transpose() * prob.X;
  const int S = a.num_draws();

  double log_hi = std::log(res.lambda_max);
  double log_lo = log_hi - decades * std::log(10.0);
  GroupLassoFit fit;
  std::vector<Eigen::MatrixXd> deltas;
  std::vector<Eigen::VectorXd> delta0s;
  std::vector<int> entry_at(p, -1);
  std::vector<double> entry_norm(p, 0.0);

  for (int i = 0; i < n_lambda; ++i) {
    double frac = (n_lambda == 1) ? 0.0 : static_cast<double>(i) / (n_lambda - 1);
    double lambda = std::exp(log_hi + (log_lo - log_hi) * frac);
    solve_group_lasso(prob, lambda, fit);

    PathPoint pt;
    pt.lambda = lambda;
    pt.active.resize(p);
    for (int j = 0; j < p; ++j) {
      double dn = fit.Delta.col(j).norm();
      pt.active[j] = dn > 0.0;
      if (pt.active[j]) {
        ++pt.model_size;
        if (entry_at[j] < 0) {
          entry_at[j] = i;
          entry_norm[j] = dn;
        }
      }
    }
    pt.kkt_residual = fit.kkt_residual;
    pt.converged = fit.converged;

    Eigen::MatrixXd DG = fit.Delta * G;
    double tdd = (DG.cwiseProduct(fit.Delta)).sum();
    std::vector<double> r2(S);
    for (int s = 0; s < S; ++s) {
      double cross = (DG.cwiseProduct(a.A[s])).sum();
      double misfit = std::max(0.0, parts.signal[s] - 2.0 * cross + tdd);
      r2[s] = parts.signal[s] / (parts.signal[s] + parts.noise[s] + misfit);
    }
    pt.rho2 = detail::summarize_rho2(std::move(r2));

    res.path.push_back(std::move(pt));
    deltas.push_back(fit.Delta);
    delta0s.push_back(fit.delta0);
  }

  // Near-active groups at the smallest penalty order the never-entered
  // predictors; x/(1+x) keeps their scores strictly below every entrant.
  {
    Eigen::MatrixXd E = prob.R -
                        delta0s.back().replicate(1, prob.X.rows()) -
                        deltas.back() * prob.X.transpose();
    double lmin = res.path.back().lambda;
    res.entry_score.resize(p);
    for (int j = 0; j < p; ++j) {
      if (entry_at[j] >= 0) {
        res.entry_score[j] =
            (n_lambda - entry_at[j]) + entry_norm[j] / (1.0 + entry_norm[j]);
      } else {
        double g = (2.0 / prob.nm) * (E * prob.X.col(j)).norm();
        double x = g / (lmin * prob.w[j]);
        res.entry_score[j] = x / (1.0 + x);
      }
    }
  }

  auto covers = [&](const Rho2Summary& r) {
    double lo = (ci_level == 0.95) ? r.lo95 : r.lo90;
    double hi = (ci_level == 0.95) ? r.hi95 : r.hi90;
    return lo <= res.rho2_full.mean && res.rho2_full.mean <= hi;
  };

  int best_size = p + 1;
  for (int i = 0; i < static_cast<int>(res.path.size()); ++i) {
    if (!covers(res.path[i].rho2)) continue;
    if (res.path[i].model_size < best_size) {
      best_size = res.path[i].model_size;
      res.chosen = i;  // first hit at this size carries the largest lambda
    }
  }
  if (res.chosen < 0) {
    res.chosen = static_cast<int>(res.path.size()) - 1;
    res.fallback = true;
  }
  res.Delta_chosen = deltas[res.chosen];
  res.delta0_chosen = delta0s[res.chosen];
  return res;
}

inline void write_selection_csv(const SelectionResult& res, int p,
                                const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw ValidationError("cannot write " + file.string());
  out << "model_size,lambda,rho2_mean,rho2_lo90,rho2_hi90\n";
  for (const auto& pt : res.path)
    out << pt.model_size << "," << format_double(pt.lambda) << ","
        << format_double(pt.rho2.mean) << "," << format_double(pt.rho2.lo90)
        << "," << format_double(pt.rho2.hi90) << "\n";
  out << p << ",0," << format_double(res.rho2_full.mean) << ","
      << format_double(res.rho2_full.lo90) << ","
      << format_double(res.rho2_full.hi90) << "\n";
}

}  // namespace fosr
