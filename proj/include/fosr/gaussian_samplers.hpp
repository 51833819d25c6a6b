#pragma once

#include <Eigen/Dense>
#include <string>

#include "fosr/errors.hpp"
#include "fosr/rng.hpp"

namespace fosr {

// One factor's regression draw: coefficients alpha ~ N(Q^{-1} l, Q^{-1})
// with Q = X' Sigma_y^{-1} X + Sigma_a^{-1} and l = X' Sigma_y^{-1} y,
// where both covariances are diagonal.  X carries the intercept as its
// first column, so q = p + 1.
struct RegressionDrawProblem {
  Eigen::MatrixXd X;         // n x q
  Eigen::VectorXd sigma2_y;  // n observation variances
  Eigen::VectorXd sigma2_a;  // q prior variances
  Eigen::VectorXd y;         // n
};

inline void validate_problem(const RegressionDrawProblem& pr) {
  const auto n = pr.X.rows();
  const auto q = pr.X.cols();
  if (pr.sigma2_y.size() != n || pr.y.size() != n || pr.sigma2_a.size() != q)
    throw ValidationError("regression draw dimensions disagree");
  if (!pr.X.allFinite() || !pr.y.allFinite() || !pr.sigma2_y.allFinite() ||
      !pr.sigma2_a.allFinite())
    throw NumericalError("regression draw has non-finite inputs");
  if (!(pr.sigma2_y.minCoeff() > 0.0) || !(pr.sigma2_a.minCoeff() > 0.0))
    throw NumericalError("regression draw needs positive variances");
}

namespace detail {

inline Eigen::LLT<Eigen::MatrixXd> chol_with_jitter(Eigen::MatrixXd Q,
                                                    const std::string& what) {
  Eigen::LLT<Eigen::MatrixXd> llt(Q);
  if (llt.info() == Eigen::Success) return llt;
  // One shot of diagonal jitter, then give up.
  double eps = 1e-10 * Q.diagonal().mean();
  Q.diagonal().array() += eps;
  llt.compute(Q);
  if (llt.info() == Eigen::Success) return llt;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q);
  throw NumericalError(what + ": precision matrix not PD (smallest pivot " +
                       std::to_string(es.eigenvalues().minCoeff()) + ")");
}

}  // namespace detail

// Direct Cholesky sampler; O(q^3), preferred when q <= n.
inline Eigen::VectorXd sample_gaussian_cholesky(const RegressionDrawProblem& pr,
                                                Rng& rng) {
  validate_problem(pr);
  const int q = static_cast<int>(pr.X.cols());
  Eigen::VectorXd inv_sy = pr.sigma2_y.cwiseInverse();
  Eigen::MatrixXd W = inv_sy.cwiseSqrt().asDiagonal() * pr.X;
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(q, q);
  Q.selfadjointView<Eigen::Lower>().rankUpdate(W.transpose());
  Q = Q.selfadjointView<Eigen::Lower>();
  Q.diagonal() += pr.sigma2_a.cwiseInverse();
  Eigen::VectorXd l = pr.X.transpose() * (inv_sy.cwiseProduct(pr.y));

  auto llt = detail::chol_with_jitter(std::move(Q), "regression draw");
  Eigen::VectorXd lbar = llt.matrixL().solve(l);
  Eigen::VectorXd z(q);
  for (int i = 0; i < q; ++i) z[i] = rng.normal();
  return llt.matrixU().solve(lbar + z);
}

// Data-augmentation sampler; O(n^2 q), preferred when q > n.
inline Eigen::VectorXd sample_gaussian_fast(const RegressionDrawProblem& pr,
                                            Rng& rng) {
  validate_problem(pr);
  const int n = static_cast<int>(pr.X.rows());
  const int q = static_cast<int>(pr.X.cols());
  Eigen::VectorXd sa = pr.sigma2_a.cwiseSqrt();
  Eigen::VectorXd inv_sy_half = pr.sigma2_y.cwiseSqrt().cwiseInverse();

  Eigen::VectorXd u(q);
  for (int j = 0; j < q; ++j) u[j] = sa[j] * rng.normal();
  Eigen::VectorXd delta(n);
  for (int i = 0; i < n; ++i) delta[i] = rng.normal();

  Eigen::MatrixXd Xk = inv_sy_half.asDiagonal() * pr.X;
  Eigen::VectorXd v = Xk * u + delta;
  Eigen::MatrixXd U = Xk * sa.asDiagonal();
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n);
  M.selfadjointView<Eigen::Lower>().rankUpdate(U);
  M = M.selfadjointView<Eigen::Lower>();

  auto llt = detail::chol_with_jitter(std::move(M), "regression draw (fast)");
  Eigen::VectorXd w = llt.solve(inv_sy_half.cwiseProduct(pr.y) - v);
  return u + pr.sigma2_a.cwiseProduct(pr.X.transpose() * (inv_sy_half.cwiseProduct(w)));
}

// Dispatch on shape: the augmentation sampler wins once q = p + 1 exceeds n.
inline Eigen::VectorXd sample_regression_coefficients(const RegressionDrawProblem& pr,
                                                      Rng& rng) {
  return pr.X.cols() > pr.X.rows() ? sample_gaussian_fast(pr, rng)
                                   : sample_gaussian_cholesky(pr, rng);
}

}  // namespace fosr
