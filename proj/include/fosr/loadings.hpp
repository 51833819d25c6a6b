#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "fosr/errors.hpp"
#include "fosr/rng.hpp"
#include "fosr/spline_basis.hpp"

namespace fosr {

// Unknown loading curves f_k = B psi_k, kept orthonormal as a matrix
// (F'F = I_K) by a conditioning-on-constraint draw plus unit rescaling.
struct BasisState {
  Eigen::MatrixXd Psi;       // L x K spline coefficients
  Eigen::MatrixXd F;         // m x K, F = B * Psi
  Eigen::VectorXd lambda_f;  // K smoothing precisions
  int lambda_floor_hits = 0;
};

namespace detail {

// Largest-magnitude entry of each loading made positive; compensating sign
// flips are the caller's responsibility.
inline bool flip_for_sign(Eigen::MatrixXd& F, Eigen::MatrixXd& Psi, int k) {
  int idx = 0;
  F.col(k).cwiseAbs().maxCoeff(&idx);
  if (F(idx, k) < 0.0) {
    F.col(k) = -F.col(k);
    Psi.col(k) = -Psi.col(k);
    return true;
  }
  return false;
}

}  // namespace detail

// Smoothing precision lambda_{f_k}: Gamma((L - D + 2)/2, psi' Omega psi / 2)
// restricted to [1e-8, 1e8].  The lower bound is exactly the Uniform(0, 1e4)
// bound on lambda^{-1/2}; the upper bound (lambda^{-1/2} >= 1e-4) keeps the
// draw recurrent: the conditional's shape exceeds half the penalty rank, so
// once a loading settles into the polynomial null space the roughness is
// ~ chi^2 / lambda and lambda would otherwise ratchet up geometrically until
// overflow.  At the cap the loading is smooth to 1e-4, which is the same
// state the runaway was heading for.  A zero-roughness state falls back to
// a tiny rate.
inline double sample_lambda_f(const Eigen::VectorXd& psi, const SplineBasis& sb,
                              Rng& rng, bool* floor_hit = nullptr) {
  const int L = sb.L();
  const int D = sb.degree();
  double rate = 0.5 * psi.dot(sb.Omega * psi);
  if (floor_hit) *floor_hit = false;
  if (!(rate > 0.0)) {
    rate = 1e-10;
    if (floor_hit) *floor_hit = true;
  }
  return rng.gamma_truncated(0.5 * (L - D + 2), rate, 1e-8, 1e8);
}

// Draw from N(Q^{-1} l, Q^{-1}) conditional on C x = 0 (C may be empty):
// Cholesky of Q, unconstrained draw by two triangular solves, then the
// conditioning-by-projection correction x* = x0 - Ct (C Ct)^{-1} C x0
// with Ct = Q^{-1} C'.
inline Eigen::VectorXd draw_constrained_normal(const Eigen::MatrixXd& Q,
                                               const Eigen::VectorXd& l,
                                               const Eigen::MatrixXd& C,
                                               Rng& rng) {
  const int L = static_cast<int>(Q.rows());
  Eigen::LLT<Eigen::MatrixXd> llt(Q);
  if (llt.info() != Eigen::Success)
    throw NumericalError("loading precision not PD (degenerate lambda_f or sigma_eps state)");

  Eigen::VectorXd lbar = llt.matrixL().solve(l);
  Eigen::VectorXd z(L);
  for (int i = 0; i < L; ++i) z[i] = rng.normal();
  Eigen::VectorXd x0 = llt.matrixU().solve(lbar + z);
  if (C.rows() == 0) return x0;

  Eigen::MatrixXd Ct = llt.matrixU().solve(llt.matrixL().solve(C.transpose()));
  Eigen::MatrixXd S = C * Ct;  // (K-1) x (K-1), PD when loadings independent
  Eigen::LLT<Eigen::MatrixXd> slt(S);
  if (slt.info() != Eigen::Success)
    throw NumericalError("orthogonality constraint rank collapse among loadings");
  return x0 - Ct * slt.solve(C * x0);
}

// One loading update.  Draws psi_k given everything else subject to
// f_k' f_l = 0 (l != k), rescales to ||B psi|| = 1 with the compensating
// beta_k scale change, and applies the sign convention.  Fit = F * beta
// (m x n) is kept in sync incrementally.
inline void sample_basis_column(const SplineBasis& sb, const Eigen::MatrixXd& BtB,
                                BasisState& bs, Eigen::MatrixXd& beta,
                                const Eigen::MatrixXd& Ycomp, Eigen::MatrixXd& Fit,
                                double sigma_eps, int k, Rng& rng) {
  const int K = static_cast<int>(bs.F.cols());
  const double inv_s2 = 1.0 / (sigma_eps * sigma_eps);
  const double sumb2 = beta.row(k).squaredNorm();

  Eigen::MatrixXd Q = (inv_s2 * sumb2) * BtB + bs.lambda_f[k] * sb.Omega;
  // Partial residual against all other loadings, weighted by beta_k.
  Eigen::VectorXd v = (Ycomp - Fit) * beta.row(k).transpose() + bs.F.col(k) * sumb2;
  Eigen::VectorXd l = inv_s2 * (sb.B.transpose() * v);

  Eigen::MatrixXd C(K - 1, sb.L());
  int r = 0;
  for (int l2 = 0; l2 < K; ++l2)
    if (l2 != k) C.row(r++) = (BtB * bs.Psi.col(l2)).transpose();

  Eigen::VectorXd psi_star = draw_constrained_normal(Q, l, C, rng);
  Eigen::VectorXd f_star = sb.B * psi_star;
  double norm = f_star.norm();
  if (!(norm > 0.0) || !std::isfinite(norm))
    throw NumericalError("degenerate loading draw (zero norm)");

  // f_new * beta_new = f_star * beta_old, so the fitted surface moves by
  // (f_star - f_old) beta_old regardless of rescale and sign.
  Fit.noalias() += (f_star - bs.F.col(k)) * beta.row(k);

  bs.Psi.col(k) = psi_star / norm;
  bs.F.col(k) = f_star / norm;
  beta.row(k) *= norm;
  if (detail::flip_for_sign(bs.F, bs.Psi, k)) beta.row(k) = -beta.row(k);
}

// Data-driven start: leading left singular vectors of the mean-imputed,
// grid-point-centered data, projected into the spline column space,
// re-orthonormalized, then rotated within the span onto the eigenvectors
// of the residual score covariance (scores regressed on the design,
// ridge-stabilized), largest variance first.  The SVD alone orients the
// span by TOTAL score covariance, which mixes the factors whenever the
// design induces score correlation; the ordered prior on the
// subject-specific effects identifies the RESIDUAL orientation instead.
// The within-span rotation barely moves under the column-at-a-time
// constrained draws, so the starting orientation persists.
inline BasisState init_loadings_svd(const SplineBasis& sb, const Eigen::MatrixXd& Y,
                                    const Eigen::Matrix<bool, Eigen::Dynamic,
                                                        Eigen::Dynamic>& observed,
                                    int K, const Eigen::MatrixXd& Xs) {
  const int n = static_cast<int>(Y.rows());
  const int m = static_cast<int>(Y.cols());
  Eigen::MatrixXd Yt(m, n);  // curves in columns
  for (int l = 0; l < m; ++l) {
    double sum = 0.0;
    int cnt = 0;
    for (int i = 0; i < n; ++i)
      if (observed(i, l)) {
        sum += Y(i, l);
        ++cnt;
      }
    double colmean = cnt > 0 ? sum / cnt : 0.0;
    for (int i = 0; i < n; ++i)
      Yt(l, i) = (observed(i, l) ? Y(i, l) : colmean) - colmean;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Yt, Eigen::ComputeThinU);
  if (svd.matrixU().cols() < K)
    throw ValidationError("K exceeds the rank of the data");
  Eigen::MatrixXd U = svd.matrixU().leftCols(K);

  // Least squares spline fit of each component, then thin QR to restore
  // orthonormality inside the spline space.
  Eigen::MatrixXd Psi0 = sb.B.colPivHouseholderQr().solve(U);
  Eigen::MatrixXd F0 = sb.B * Psi0;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(F0);
  Eigen::MatrixXd R = qr.matrixQR().topRows(K).triangularView<Eigen::Upper>();
  for (int k = 0; k < K; ++k)
    if (std::abs(R(k, k)) < 1e-10)
      throw NumericalError("initial loadings numerically dependent");

  BasisState bs;
  bs.F = qr.householderQ() * Eigen::MatrixXd::Identity(m, K);
  bs.Psi = R.triangularView<Eigen::Upper>().solve<Eigen::OnTheRight>(Psi0);

  // Orientation: rotate onto the principal axes of the score covariance
  // left over after regressing the scores on [1, X].  Unit ridge keeps the
  // solve defined for p >= n and is negligible for standardized columns.
  if (Xs.rows() == n && Xs.cols() > 0) {
    Eigen::MatrixXd S = (bs.F.transpose() * Yt).transpose();  // n x K scores
    Eigen::MatrixXd M(n, Xs.cols() + 1);
    M.col(0).setOnes();
    M.rightCols(Xs.cols()) = Xs;
    const int q = static_cast<int>(M.cols());
    Eigen::MatrixXd G = M.transpose() * M + Eigen::MatrixXd::Identity(q, q);
    Eigen::MatrixXd resid = S - M * G.ldlt().solve(M.transpose() * S);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(resid.transpose() * resid);
    if (es.info() != Eigen::Success)
      throw NumericalError("score covariance eigendecomposition failed");
    Eigen::MatrixXd W = es.eigenvectors().rowwise().reverse();  // descending
    bs.F = bs.F * W;
    bs.Psi = bs.Psi * W;
  }

  bs.lambda_f = Eigen::VectorXd::Ones(K);
  for (int k = 0; k < K; ++k) detail::flip_for_sign(bs.F, bs.Psi, k);
  return bs;
}

// Fixed-basis ablation start: first K columns of the orthonormalized
// spline design itself (no data involved); the sampler then never touches F.
inline BasisState init_loadings_spline(const SplineBasis& sb, int K) {
  const int m = static_cast<int>(sb.B.rows());
  const int L = sb.L();
  if (K > L) throw ValidationError("K exceeds spline dimension");
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(sb.B);
  Eigen::MatrixXd R = qr.matrixQR().topRows(L).triangularView<Eigen::Upper>();
  BasisState bs;
  bs.F = (qr.householderQ() * Eigen::MatrixXd::Identity(m, L)).leftCols(K);
  bs.Psi = R.triangularView<Eigen::Upper>()
               .solve(Eigen::MatrixXd::Identity(L, L))
               .leftCols(K);
  bs.lambda_f = Eigen::VectorXd::Ones(K);
  for (int k = 0; k < K; ++k) detail::flip_for_sign(bs.F, bs.Psi, k);
  return bs;
}

inline double orthonormality_error(const Eigen::MatrixXd& F) {
  const int K = static_cast<int>(F.cols());
  return (F.transpose() * F - Eigen::MatrixXd::Identity(K, K))
      .cwiseAbs()
      .maxCoeff();
}

}  // namespace fosr
