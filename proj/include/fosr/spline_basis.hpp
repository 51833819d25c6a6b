#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "fosr/errors.hpp"
#include "fosr/stats.hpp"

namespace fosr {

// Low-rank thin plate spline design on the observation grid.
//
// Columns of B: intercept, linear term, then the cubic radial part
// |t - knot|^3 reparameterized so the roughness penalty is the identity on
// the radial block (the knot-Gram penalty expressed in transformed
// coordinates).  Omega is therefore PSD with exactly null_dim = 2 zero
// eigenvalues corresponding to the unpenalized linear polynomial.
struct SplineBasis {
  Eigen::MatrixXd B;      // m x L
  Eigen::MatrixXd Omega;  // L x L
  Eigen::VectorXd knots;  // on the rescaled [0,1] grid
  int null_dim = 2;

  int L() const { return static_cast<int>(B.cols()); }
  int degree() const { return null_dim - 1; }  // D = 1
};

inline int default_num_knots(int m) {
  int j = (m + 3) / 4;  // ceil(m/4)
  return std::max(2, std::min(j, 35));
}

inline SplineBasis build_lrtps(const Eigen::VectorXd& tau, int num_knots = -1) {
  const int m = static_cast<int>(tau.size());
  if (m < 2) throw ValidationError("need at least 2 grid points");
  const int J = num_knots > 0 ? num_knots : default_num_knots(m);
  if (J < 2) throw ValidationError("need at least 2 knots");
  if (m < J + 2) throw ValidationError("grid too small for requested knots (need m >= knots + 2)");

  double lo = tau.minCoeff(), hi = tau.maxCoeff();
  if (!(hi > lo)) throw ValidationError("grid has no spread");
  Eigen::VectorXd t = (tau.array() - lo) / (hi - lo);

  std::vector<double> sorted(t.data(), t.data() + m);
  std::sort(sorted.begin(), sorted.end());
  Eigen::VectorXd knots(J);
  for (int j = 0; j < J; ++j)
    knots[j] = quantile_sorted(sorted, (j + 1.0) / (J + 1.0));
  for (int j = 0; j + 1 < J; ++j)
    if (!(knots[j + 1] - knots[j] > 1e-12))
      throw ValidationError("duplicate knots; grid has too few distinct values");

  Eigen::MatrixXd R(m, J);
  for (int l = 0; l < m; ++l)
    for (int j = 0; j < J; ++j)
      R(l, j) = std::pow(std::abs(t[l] - knots[j]), 3);

  // Knot Gram of the cubic radial kernel.  It is only conditionally
  // positive definite, so take the symmetric |eigenvalue| square root for
  // the standard low-rank reparameterization.
  Eigen::MatrixXd OmegaK(J, J);
  for (int a = 0; a < J; ++a)
    for (int b = 0; b < J; ++b)
      OmegaK(a, b) = std::pow(std::abs(knots[a] - knots[b]), 3);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(OmegaK);
  if (es.info() != Eigen::Success)
    throw NumericalError("knot Gram eigendecomposition failed");
  Eigen::VectorXd absev = es.eigenvalues().cwiseAbs();
  double evmax = absev.maxCoeff();
  if (!(absev.minCoeff() > 1e-12 * evmax))
    throw ValidationError("knot Gram numerically singular (near-duplicate knots)");
  Eigen::MatrixXd T = es.eigenvectors() *
                      absev.cwiseSqrt().cwiseInverse().asDiagonal() *
                      es.eigenvectors().transpose();

  SplineBasis sb;
  const int L = J + 2;
  sb.B.resize(m, L);
  sb.B.col(0).setOnes();
  sb.B.col(1) = t;
  sb.B.rightCols(J) = R * T;
  sb.Omega = Eigen::MatrixXd::Zero(L, L);
  sb.Omega.bottomRightCorner(J, J).setIdentity();
  sb.knots = knots;

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(sb.B);
  double cond = svd.singularValues()(0) /
                svd.singularValues()(svd.singularValues().size() - 1);
  if (!(cond < 1e8))
    throw ValidationError("spline design is ill conditioned; reduce num_knots");
  return sb;
}

}  // namespace fosr
