#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "fosr/dataset.hpp"
#include "fosr/draw_archive.hpp"
#include "fosr/errors.hpp"
#include "fosr/gaussian_samplers.hpp"
#include "fosr/loadings.hpp"
#include "fosr/mcmc_config.hpp"
#include "fosr/rng.hpp"
#include "fosr/shrinkage.hpp"
#include "fosr/spline_basis.hpp"

namespace fosr {

// Factor-score regression state.  beta is always stored as the composed
// sum mu 1' + A X' + Gamma; the loading sweep temporarily rescales rows of
// beta, and the regression block restores the composition every iteration.
struct RegressionState {
  Eigen::MatrixXd beta;    // K x n
  Eigen::VectorXd mu;      // K
  Eigen::MatrixXd A;       // K x p
  Eigen::MatrixXd Gamma;   // K x n
  Eigen::MatrixXd y_proj;  // K x n projected responses
  double sigma_eps = 1.0;
};

// Immutable problem setup shared by every sweep.
struct GibbsModel {
  FunctionalDataset data;
  Eigen::MatrixXd Xs;    // n x p standardized design
  Standardization scaling;
  Eigen::MatrixXd Xaug;  // n x (p+1), intercept first
  SplineBasis sb;
  Eigen::MatrixXd BtB;
  McmcConfig config;
  std::vector<std::pair<int, int>> missing_cells;  // (subject, grid)
};

struct GibbsState {
  Eigen::MatrixXd Ycomp;  // m x n completed curves, subjects in columns
  Eigen::MatrixXd Fit;    // m x n cache of F * beta
  BasisState basis;
  RegressionState reg;
  HorseshoeState hs;
  MgpState mgp;
};

inline GibbsModel make_gibbs_model(const FunctionalDataset& data,
                                   const McmcConfig& config) {
  validate_dataset(data);
  validate_config(config);
  GibbsModel mod;
  mod.data = data;
  mod.Xs = standardize_design(data.X, mod.scaling);
  mod.Xaug.resize(data.n(), data.p() + 1);
  mod.Xaug.col(0).setOnes();
  mod.Xaug.rightCols(data.p()) = mod.Xs;
  mod.sb = build_lrtps(data.tau);
  mod.BtB = mod.sb.B.transpose() * mod.sb.B;
  mod.config = config;
  if (config.K > std::min({data.m(), data.n(), mod.sb.L()}))
    throw ValidationError("K exceeds min(m, n, spline dimension)");
  for (int i = 0; i < data.n(); ++i)
    for (int l = 0; l < data.m(); ++l)
      if (!data.observed(i, l)) mod.missing_cells.emplace_back(i, l);
  return mod;
}

inline Eigen::MatrixXd compose_beta(const RegressionState& reg,
                                    const Eigen::MatrixXd& Xs) {
  return reg.mu * Eigen::RowVectorXd::Ones(Xs.rows()) + reg.A * Xs.transpose() +
         reg.Gamma;
}

inline GibbsState init_gibbs_state(const GibbsModel& mod) {
  const int n = mod.data.n(), m = mod.data.m(), K = mod.config.K;
  GibbsState st;

  // Mean-imputed starting curves.
  st.Ycomp.resize(m, n);
  for (int l = 0; l < m; ++l) {
    double sum = 0.0;
    int cnt = 0;
    for (int i = 0; i < n; ++i)
      if (mod.data.observed(i, l)) {
        sum += mod.data.Y(i, l);
        ++cnt;
      }
    double colmean = cnt > 0 ? sum / cnt : 0.0;
    for (int i = 0; i < n; ++i)
      st.Ycomp(l, i) = mod.data.observed(i, l) ? mod.data.Y(i, l) : colmean;
  }

  st.basis = mod.config.fix_basis
                 ? init_loadings_spline(mod.sb, K)
                 : init_loadings_svd(mod.sb, mod.data.Y, mod.data.observed, K,
                                     mod.Xs);

  // Project the start data onto the loadings so the first precision matrix
  // in the loading sweep is non-degenerate; predictor effects start at 0.
  Eigen::VectorXd ybar = st.Ycomp.rowwise().mean();
  st.reg.mu = st.basis.F.transpose() * ybar;
  st.reg.A = Eigen::MatrixXd::Zero(K, mod.data.p());
  st.reg.Gamma = st.basis.F.transpose() *
                 (st.Ycomp - ybar * Eigen::RowVectorXd::Ones(n));
  st.reg.beta = compose_beta(st.reg, mod.Xs);
  st.reg.y_proj = st.basis.F.transpose() * st.Ycomp;

  st.Fit = st.basis.F * st.reg.beta;
  double ssr = (st.Ycomp - st.Fit).squaredNorm();
  st.reg.sigma_eps = std::max(std::sqrt(ssr / (static_cast<double>(n) * m)), 1e-6);

  st.hs = init_horseshoe(mod.data.p(), K);
  st.mgp = init_mgp(K, n, mod.config.fixed_hypers);
  return st;
}

// Step 1: conditional draws for the unobserved cells.
inline void impute_missing(const GibbsModel& mod, GibbsState& st, Rng& rng) {
  for (const auto& [i, l] : mod.missing_cells)
    st.Ycomp(l, i) = st.Fit(l, i) + st.reg.sigma_eps * rng.normal();
}

// Step 2: smoothing precisions and constrained loading draws.
inline void basis_sweep(const GibbsModel& mod, GibbsState& st, Rng& rng) {
  for (int k = 0; k < mod.config.K; ++k) {
    bool floor_hit = false;
    st.basis.lambda_f[k] = sample_lambda_f(st.basis.Psi.col(k), mod.sb, rng, &floor_hit);
    if (floor_hit) ++st.basis.lambda_floor_hits;
    sample_basis_column(mod.sb, mod.BtB, st.basis, st.reg.beta, st.Ycomp, st.Fit,
                        st.reg.sigma_eps, k, rng);
  }
}

// Step 3: project curves onto the loadings, y_{k,i} = f_k' Y_i, computed
// through the spline factorization psi' (B' Y).
inline Eigen::MatrixXd project(const Eigen::MatrixXd& Psi, const Eigen::MatrixXd& B,
                               const Eigen::MatrixXd& Ycurves) {
  return Psi.transpose() * (B.transpose() * Ycurves);
}

inline Eigen::MatrixXd project_direct(const Eigen::MatrixXd& F,
                                      const Eigen::MatrixXd& Ycurves) {
  return F.transpose() * Ycurves;
}

// gamma_{k,i} full conditional: precision sigma_eps^{-2} + sigma_{gamma}^{-2},
// location term sigma_eps^{-2} * (y_{k,i} - mu_k - x_i' alpha_k).
inline std::pair<double, double> gamma_full_conditional(double sigma_eps,
                                                        double sigma_gki,
                                                        double resid) {
  double q = 1.0 / (sigma_eps * sigma_eps) + 1.0 / (sigma_gki * sigma_gki);
  double mean = resid / (sigma_eps * sigma_eps) / q;
  return {mean, 1.0 / q};
}

// Step 4 for one factor: joint (mu_k, alpha_k) draw marginal over gamma,
// then per-subject gamma draws, then the composed beta row.
inline void sample_regression_block(const GibbsModel& mod, GibbsState& st, int k,
                                    Rng& rng) {
  const int n = mod.data.n(), p = mod.data.p();
  const double s2e = st.reg.sigma_eps * st.reg.sigma_eps;

  RegressionDrawProblem pr;
  pr.X = mod.Xaug;
  pr.sigma2_y =
      st.mgp.sigma_gamma.row(k).transpose().array().square().matrix() +
      Eigen::VectorXd::Constant(n, s2e);
  pr.sigma2_a.resize(p + 1);
  pr.sigma2_a[0] = st.mgp.sigma_mu[k] * st.mgp.sigma_mu[k];
  for (int j = 0; j < p; ++j) {
    double s = st.hs.sigma_alpha(j, k);
    pr.sigma2_a[j + 1] = s * s;
  }
  pr.y = st.reg.y_proj.row(k).transpose();

  Eigen::VectorXd coef = sample_regression_coefficients(pr, rng);
  st.reg.mu[k] = coef[0];
  st.reg.A.row(k) = coef.tail(p).transpose();

  Eigen::VectorXd xb = mod.Xaug * coef;
  for (int i = 0; i < n; ++i) {
    auto [mean, var] = gamma_full_conditional(
        st.reg.sigma_eps, st.mgp.sigma_gamma(k, i), st.reg.y_proj(k, i) - xb[i]);
    st.reg.Gamma(k, i) = mean + std::sqrt(var) * rng.normal();
  }
  st.reg.beta.row(k) = xb.transpose() + st.reg.Gamma.row(k);
}

// Step 5(a): error precision from the full m x n residual (imputed cells
// included).  Defaults give the scale-invariant 1/sigma^2 prior; a proper
// Gamma(prior_shape, prior_rate) prior on the precision is available for
// validation runs that need one.
inline void sample_sigma_eps(const GibbsModel& mod, GibbsState& st, Rng& rng,
                             double prior_shape = 0.0, double prior_rate = 0.0) {
  const double nm = static_cast<double>(mod.data.n()) * mod.data.m();
  double ssr = (st.Ycomp - st.Fit).squaredNorm();
  double rate = prior_rate + 0.5 * ssr;
  if (!(rate > 0.0)) rate = 1e-12;
  double prec = rng.gamma(prior_shape + 0.5 * nm, rate);
  st.reg.sigma_eps = 1.0 / std::sqrt(prec);
}

namespace detail {

struct SigmaEpsPrior {
  double shape = 0.0;
  double rate = 0.0;
};

}  // namespace detail

// One full sweep in sampling order: impute, loading sweep, project,
// regression blocks, error variance, shrinkage scales, hyperparameters.
inline void gibbs_sweep(const GibbsModel& mod, GibbsState& st, Rng& rng,
                        detail::SigmaEpsPrior eps_prior = {}) {
  const char* step = "impute";
  try {
    impute_missing(mod, st, rng);

    if (!mod.config.fix_basis) {
      step = "basis";
      st.Fit = st.basis.F * st.reg.beta;  // resync before incremental updates
      basis_sweep(mod, st, rng);
    }

    step = "project";
    st.reg.y_proj = project(st.basis.Psi, mod.sb.B, st.Ycomp);

    step = "regression";
    for (int k = 0; k < mod.config.K; ++k) sample_regression_block(mod, st, k, rng);

    step = "sigma_eps";
    st.Fit = st.basis.F * st.reg.beta;
    sample_sigma_eps(mod, st, rng, eps_prior.shape, eps_prior.rate);
    if (!std::isfinite(st.reg.sigma_eps) || !(st.reg.sigma_eps > 0.0))
      throw NumericalError("sigma_eps became non-finite");

    step = "shrinkage";
    update_mgp_mu(st.reg.mu, st.mgp, rng);
    update_mgp_gamma(st.reg.Gamma, st.mgp, rng);
    update_horseshoe(st.reg.A, st.hs, rng);

    step = "hypers";
    slice_sample_hypers(st.mgp, rng);
  } catch (const NumericalError& e) {
    throw NumericalError(std::string("step '") + step + "': " + e.what());
  }
}

// Constant-in-beta difference between these two is what makes the factor
// regression exact (see the projection tests).
inline double full_loglik(const Eigen::MatrixXd& Ycurves, const Eigen::MatrixXd& F,
                          const Eigen::MatrixXd& beta, double sigma_eps) {
  const double nm = static_cast<double>(Ycurves.rows()) * Ycurves.cols();
  double ssr = (Ycurves - F * beta).squaredNorm();
  return -0.5 * nm * std::log(2.0 * M_PI * sigma_eps * sigma_eps) -
         0.5 * ssr / (sigma_eps * sigma_eps);
}

inline double working_loglik(const Eigen::MatrixXd& y_proj,
                             const Eigen::MatrixXd& beta, double sigma_eps) {
  const double nk = static_cast<double>(y_proj.rows()) * y_proj.cols();
  double ssr = (y_proj - beta).squaredNorm();
  return -0.5 * nk * std::log(2.0 * M_PI * sigma_eps * sigma_eps) -
         0.5 * ssr / (sigma_eps * sigma_eps);
}

inline DrawArchive run_gibbs(
    const FunctionalDataset& data, const McmcConfig& config, Rng& rng,
    const std::function<void(const std::string&)>& progress = nullptr) {
  GibbsModel mod = make_gibbs_model(data, config);
  GibbsState st = init_gibbs_state(mod);

  DrawArchive arch;
  arch.n = data.n();
  arch.m = data.m();
  arch.p = data.p();
  arch.K = config.K;
  arch.config = config;
  arch.tau = data.tau;
  arch.predictor_names = data.predictor_names;
  arch.scaling = mod.scaling;
  arch.X = mod.Xs;
  arch.missing_cells = mod.missing_cells;
  const int S = config.num_draws();
  arch.F.reserve(S);
  arch.mu.reserve(S);
  arch.A.reserve(S);
  arch.Gamma.reserve(S);
  arch.sigma_eps.reserve(S);
  arch.sigma_gamma.reserve(S);
  arch.y_missing.reserve(S);

  auto t0 = std::chrono::steady_clock::now();
  for (int it = 1; it <= config.n_iter; ++it) {
    try {
      gibbs_sweep(mod, st, rng);
    } catch (const NumericalError& e) {
      throw NumericalError("iteration " + std::to_string(it) + ", " + e.what());
    }

    if (it > config.burn_in && (it - config.burn_in) % config.thin == 0) {
      arch.F.push_back(st.basis.F);
      arch.mu.push_back(st.reg.mu);
      arch.A.push_back(st.reg.A);
      arch.Gamma.push_back(st.reg.Gamma);
      arch.sigma_eps.push_back(st.reg.sigma_eps);
      arch.sigma_gamma.push_back(st.mgp.sigma_gamma);
      Eigen::VectorXd ym(static_cast<int>(mod.missing_cells.size()));
      for (std::size_t c = 0; c < mod.missing_cells.size(); ++c)
        ym[static_cast<int>(c)] =
            st.Ycomp(mod.missing_cells[c].second, mod.missing_cells[c].first);
      arch.y_missing.push_back(std::move(ym));
    }

    if (progress && it % 100 == 0) {
      double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                        .count();
      char line[128];
      std::snprintf(line, sizeof(line), "iter %d/%d (%.1fs) sigma_eps=%.4g", it,
                    config.n_iter, secs, st.reg.sigma_eps);
      progress(line);
    }
  }

  validate_archive(arch);
  return arch;
}

}  // namespace fosr
