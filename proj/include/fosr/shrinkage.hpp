#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <optional>

#include "fosr/errors.hpp"
#include "fosr/mcmc_config.hpp"
#include "fosr/rng.hpp"

namespace fosr {

// ---------------------------------------------------------------------------
// Slice sampler (stepping out + shrinkage) for the scalar hyperparameters.
// ---------------------------------------------------------------------------

// One slice update of x0 under log density logf, restricted to (lo, hi).
// On bracket/shrinkage failure the current value is kept and *failed set.
inline double slice_step(const std::function<double(double)>& logf, double x0,
                         double width, int max_expand, double lo, double hi,
                         Rng& rng, bool* failed = nullptr) {
  if (failed) *failed = false;
  double f0 = logf(x0);
  if (!std::isfinite(f0)) {
    if (failed) *failed = true;
    return x0;
  }
  double logy = f0 - rng.exponential(1.0);

  double L = x0 - width * rng.uniform();
  double R = L + width;
  L = std::max(L, lo);
  R = std::min(R, hi);
  for (int i = 0; i < max_expand && L > lo && logf(L) > logy; ++i)
    L = std::max(L - width, lo);
  for (int i = 0; i < max_expand && R < hi && logf(R) > logy; ++i)
    R = std::min(R + width, hi);

  for (int i = 0; i < 1000; ++i) {
    double x1 = rng.uniform(L, R);
    if (logf(x1) > logy) return x1;
    if (x1 < x0)
      L = x1;
    else
      R = x1;
  }
  if (failed) *failed = true;
  return x0;
}

// ---------------------------------------------------------------------------
// Groupwise half-Cauchy (horseshoe-type) scales for the predictor effects.
// All half-Cauchy layers are handled through the usual inverse-gamma
// parameter expansion, so every update below is a conjugate Gamma draw.
// ---------------------------------------------------------------------------

struct HorseshoeState {
  Eigen::MatrixXd sigma_alpha;  // p x K, sd of alpha_{j,k}
  Eigen::MatrixXd xi_alpha;     // p x K auxiliaries
  Eigen::VectorXd lambda;       // p, per-predictor scale
  Eigen::VectorXd xi_lambda;    // p auxiliaries
  double lambda0 = 1.0;         // global scale, half-Cauchy(0, p^{-1/2})
  double xi_lambda0 = 1.0;
};

inline HorseshoeState init_horseshoe(int p, int K) {
  HorseshoeState h;
  h.sigma_alpha = Eigen::MatrixXd::Ones(p, K);
  h.xi_alpha = Eigen::MatrixXd::Ones(p, K);
  h.lambda = Eigen::VectorXd::Ones(p);
  h.xi_lambda = Eigen::VectorXd::Ones(p);
  return h;
}

// A is the K x p coefficient matrix (row = factor, column = predictor).
inline void update_horseshoe(const Eigen::MatrixXd& A, HorseshoeState& h, Rng& rng) {
  const int K = static_cast<int>(A.rows());
  const int p = static_cast<int>(A.cols());
  if (h.sigma_alpha.rows() != p || h.sigma_alpha.cols() != K)
    throw ValidationError("horseshoe state shape mismatch");

  for (int j = 0; j < p; ++j) {
    double lj2inv = 1.0 / (h.lambda[j] * h.lambda[j]);
    for (int k = 0; k < K; ++k) {
      double prec = rng.gamma(1.0, h.xi_alpha(j, k) + 0.5 * A(k, j) * A(k, j));
      h.sigma_alpha(j, k) = 1.0 / std::sqrt(prec);
      h.xi_alpha(j, k) = rng.gamma(1.0, lj2inv + prec);
    }
  }
  double l02inv = 1.0 / (h.lambda0 * h.lambda0);
  for (int j = 0; j < p; ++j) {
    double lj2inv = rng.gamma(0.5 * (K + 1), h.xi_lambda[j] + h.xi_alpha.row(j).sum());
    h.lambda[j] = 1.0 / std::sqrt(lj2inv);
    h.xi_lambda[j] = rng.gamma(1.0, l02inv + lj2inv);
  }
  l02inv = rng.gamma(0.5 * (p + 1), h.xi_lambda0 + h.xi_lambda.sum());
  h.lambda0 = 1.0 / std::sqrt(l02inv);
  h.xi_lambda0 = rng.gamma(1.0, static_cast<double>(p) + l02inv);
}

// ---------------------------------------------------------------------------
// Multiplicative gamma process over factor index k for the intercepts mu_k
// and the subject deviations gamma_{k,i}, with heavier-tailed per-element
// rescaling xi_{gamma_{k,i}} ~ Gamma(nu/2, nu/2) for the deviations.
// ---------------------------------------------------------------------------

struct MgpState {
  Eigen::VectorXd delta_mu;       // K increments
  Eigen::VectorXd delta_gamma;    // K increments
  Eigen::MatrixXd xi_gamma;       // K x n per-element rescale
  double nu_gamma = 65.0;
  double a_mu1 = 2.0, a_mu2 = 2.0;
  double a_gamma1 = 2.0, a_gamma2 = 2.0;
  bool hypers_fixed = false;
  int slice_failures = 0;

  // Derived scales, refreshed by the update functions.
  Eigen::VectorXd sigma_mu;       // K
  Eigen::VectorXd sigma_gamma_k;  // K
  Eigen::MatrixXd sigma_gamma;    // K x n, sd of gamma_{k,i}
};

inline MgpState init_mgp(int K, int n, const std::optional<FixedHypers>& fixed) {
  MgpState s;
  s.delta_mu = Eigen::VectorXd::Ones(K);
  s.delta_gamma = Eigen::VectorXd::Ones(K);
  s.xi_gamma = Eigen::MatrixXd::Ones(K, n);
  s.sigma_mu = Eigen::VectorXd::Ones(K);
  s.sigma_gamma_k = Eigen::VectorXd::Ones(K);
  s.sigma_gamma = Eigen::MatrixXd::Ones(K, n);
  if (fixed) {
    s.a_mu1 = fixed->a_mu1;
    s.a_mu2 = fixed->a_mu2;
    s.a_gamma1 = fixed->a_gamma1;
    s.a_gamma2 = fixed->a_gamma2;
    s.nu_gamma = fixed->nu_gamma;
    s.hypers_fixed = true;
  }
  return s;
}

namespace detail {

// Product of delta[h] for h <= k, skipping index skip (leave-one-out
// cumulative precision of the multiplicative gamma process).
inline double loo_product(const Eigen::VectorXd& delta, int k, int skip) {
  double prod = 1.0;
  for (int h = 0; h <= k; ++h)
    if (h != skip) prod *= delta[h];
  return prod;
}

inline void refresh_sigma_from_delta(const Eigen::VectorXd& delta,
                                     Eigen::VectorXd& sigma) {
  double prod = 1.0;
  for (int k = 0; k < delta.size(); ++k) {
    prod *= delta[k];
    sigma[k] = 1.0 / std::sqrt(prod);
  }
}

}  // namespace detail

inline void update_mgp_mu(const Eigen::VectorXd& mu, MgpState& s, Rng& rng) {
  const int K = static_cast<int>(mu.size());
  for (int l = 0; l < K; ++l) {
    double shape = (l == 0 ? s.a_mu1 : s.a_mu2) + 0.5 * (K - l);
    double rate = 1.0;
    for (int k = l; k < K; ++k)
      rate += 0.5 * detail::loo_product(s.delta_mu, k, l) * mu[k] * mu[k];
    s.delta_mu[l] = rng.gamma(shape, rate);
  }
  detail::refresh_sigma_from_delta(s.delta_mu, s.sigma_mu);
}

inline void update_mgp_gamma(const Eigen::MatrixXd& Gamma, MgpState& s, Rng& rng) {
  const int K = static_cast<int>(Gamma.rows());
  const int n = static_cast<int>(Gamma.cols());

  // Weighted row sums sum_i gamma_{k,i}^2 xi_{gamma_{k,i}}.
  Eigen::VectorXd wss(K);
  for (int k = 0; k < K; ++k)
    wss[k] = (Gamma.row(k).array().square() * s.xi_gamma.row(k).array()).sum();

  for (int l = 0; l < K; ++l) {
    double shape = (l == 0 ? s.a_gamma1 : s.a_gamma2) + 0.5 * n * (K - l);
    double rate = 1.0;
    for (int k = l; k < K; ++k)
      rate += 0.5 * detail::loo_product(s.delta_gamma, k, l) * wss[k];
    s.delta_gamma[l] = rng.gamma(shape, rate);
  }
  detail::refresh_sigma_from_delta(s.delta_gamma, s.sigma_gamma_k);

  const double half_nu = 0.5 * s.nu_gamma;
  for (int k = 0; k < K; ++k) {
    double inv2sk2 = 0.5 / (s.sigma_gamma_k[k] * s.sigma_gamma_k[k]);
    for (int i = 0; i < n; ++i) {
      double g2 = Gamma(k, i) * Gamma(k, i);
      s.xi_gamma(k, i) = rng.gamma(half_nu + 0.5, half_nu + g2 * inv2sk2);
      s.sigma_gamma(k, i) = s.sigma_gamma_k[k] / std::sqrt(s.xi_gamma(k, i));
    }
  }
}

// ---------------------------------------------------------------------------
// Slice updates for a_mu1, a_mu2, a_gamma1, a_gamma2 (Gamma(2,1) priors,
// log scale, width 1) and nu_gamma (Uniform(2,128), natural scale, width 8).
// ---------------------------------------------------------------------------

namespace detail {

// log posterior of a first-increment shape a: prior Gamma(2,1) plus one
// Gamma(a, 1) likelihood term.
inline double log_post_a_first(double a, double delta1) {
  return std::log(a) - a + (a - 1.0) * std::log(delta1) - std::lgamma(a);
}

// Shape for increments 2..K: prior Gamma(2,1), K-1 likelihood terms.
inline double log_post_a_rest(double a, const Eigen::VectorXd& delta) {
  const int K = static_cast<int>(delta.size());
  double slog = 0.0;
  for (int l = 1; l < K; ++l) slog += std::log(delta[l]);
  return std::log(a) - a + (a - 1.0) * slog - (K - 1) * std::lgamma(a);
}

inline double slice_shape(const std::function<double(double)>& logpost,
                          double current, Rng& rng, int* failures) {
  // Sample on the log scale with the Jacobian term.
  auto logf = [&](double t) { return logpost(std::exp(t)) + t; };
  bool failed = false;
  double t1 = slice_step(logf, std::log(current), 1.0, 100, -40.0, 40.0, rng, &failed);
  if (failed) {
    ++*failures;
    return current;
  }
  return std::exp(t1);
}

}  // namespace detail

inline void slice_sample_hypers(MgpState& s, Rng& rng) {
  if (s.hypers_fixed) return;
  const int K = static_cast<int>(s.delta_mu.size());

  s.a_mu1 = detail::slice_shape(
      [&](double a) { return detail::log_post_a_first(a, s.delta_mu[0]); },
      s.a_mu1, rng, &s.slice_failures);
  if (K > 1)
    s.a_mu2 = detail::slice_shape(
        [&](double a) { return detail::log_post_a_rest(a, s.delta_mu); },
        s.a_mu2, rng, &s.slice_failures);
  s.a_gamma1 = detail::slice_shape(
      [&](double a) { return detail::log_post_a_first(a, s.delta_gamma[0]); },
      s.a_gamma1, rng, &s.slice_failures);
  if (K > 1)
    s.a_gamma2 = detail::slice_shape(
        [&](double a) { return detail::log_post_a_rest(a, s.delta_gamma); },
        s.a_gamma2, rng, &s.slice_failures);

  // nu_gamma: Kn iid Gamma(nu/2, nu/2) terms for the xi_gamma auxiliaries.
  const double cnt = static_cast<double>(s.xi_gamma.size());
  const double slog = s.xi_gamma.array().log().sum();
  const double ssum = s.xi_gamma.sum();
  auto logf = [&](double nu) {
    double h = 0.5 * nu;
    return cnt * (h * std::log(h) - std::lgamma(h)) + h * (slog - ssum);
  };
  bool failed = false;
  double nu1 = slice_step(logf, s.nu_gamma, 8.0, 100, 2.0, 128.0, rng, &failed);
  if (failed)
    ++s.slice_failures;
  else
    s.nu_gamma = nu1;
}

}  // namespace fosr
