#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "fosr/csv.hpp"
#include "fosr/errors.hpp"

namespace fosr {

// Functional responses on a common grid plus scalar predictors.
// Y is n x m (row = subject, column = grid point); unobserved cells hold
// NaN and are flagged false in `observed`.  X is the raw (unstandardized)
// n x p design without an intercept column.
struct FunctionalDataset {
  Eigen::MatrixXd Y;
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> observed;
  Eigen::VectorXd tau;
  Eigen::MatrixXd X;
  std::vector<std::string> predictor_names;

  int n() const { return static_cast<int>(Y.rows()); }
  int m() const { return static_cast<int>(Y.cols()); }
  int p() const { return static_cast<int>(X.cols()); }
  int num_missing() const {
    return static_cast<int>(observed.size()) -
           static_cast<int>(observed.cast<int>().sum());
  }
};

inline void validate_dataset(const FunctionalDataset& d) {
  const int n = d.n(), m = d.m();
  if (n < 2 || m < 2) throw ValidationError("need at least 2 subjects and 2 grid points");
  if (d.tau.size() != m) throw ValidationError("tau length does not match curve grid");
  for (int l = 0; l + 1 < m; ++l)
    if (!(d.tau[l] < d.tau[l + 1]))
      throw ValidationError("grid values must be strictly increasing");
  if (d.X.rows() != n)
    throw ValidationError("design rows do not match number of curves");
  if (!d.X.allFinite())
    throw ValidationError("design matrix has non-finite entries");
  if (static_cast<int>(d.predictor_names.size()) != d.p())
    throw ValidationError("predictor name count does not match design columns");
  if (d.observed.rows() != n || d.observed.cols() != m)
    throw ValidationError("observation mask shape mismatch");
  for (int i = 0; i < n; ++i) {
    bool any = false;
    for (int l = 0; l < m; ++l) {
      if (d.observed(i, l)) {
        any = true;
        if (!std::isfinite(d.Y(i, l)))
          throw ValidationError("observed curve cell is non-finite");
      }
    }
    if (!any) throw ValidationError("curve row " + std::to_string(i) + " has no observed values");
  }
}

// Curves file: wide CSV, header row = grid values, one row per subject,
// empty or NA cells = missing.  Design file: CSV with a header of
// predictor names, one row per subject.
inline FunctionalDataset load_dataset(const std::string& curves_path,
                                      const std::string& design_path) {
  FunctionalDataset d;

  auto crows = read_csv(curves_path);
  if (crows.size() < 2) throw ValidationError("curves file needs a header and data rows");
  const int m = static_cast<int>(crows[0].size());
  const int n = static_cast<int>(crows.size()) - 1;
  d.tau.resize(m);
  for (int l = 0; l < m; ++l)
    d.tau[l] = parse_double(crows[0][l], "curves header of " + curves_path);
  d.Y.setConstant(n, m, std::numeric_limits<double>::quiet_NaN());
  d.observed.setConstant(n, m, false);
  for (int i = 0; i < n; ++i) {
    const auto& row = crows[i + 1];
    if (static_cast<int>(row.size()) != m)
      throw ValidationError("curves row " + std::to_string(i + 1) + " has wrong width");
    for (int l = 0; l < m; ++l) {
      if (is_missing_token(row[l])) continue;
      d.Y(i, l) = parse_double(row[l], "curves row " + std::to_string(i + 1));
      d.observed(i, l) = true;
    }
  }

  auto xrows = read_csv(design_path);
  if (xrows.size() < 2) throw ValidationError("design file needs a header and data rows");
  const int p = static_cast<int>(xrows[0].size());
  if (static_cast<int>(xrows.size()) - 1 != n)
    throw ValidationError("design rows do not match number of curves");
  for (int j = 0; j < p; ++j) d.predictor_names.push_back(trim(xrows[0][j]));
  d.X.resize(n, p);
  for (int i = 0; i < n; ++i) {
    const auto& row = xrows[i + 1];
    if (static_cast<int>(row.size()) != p)
      throw ValidationError("design row " + std::to_string(i + 1) + " has wrong width");
    for (int j = 0; j < p; ++j)
      d.X(i, j) = parse_double(row[j], "design row " + std::to_string(i + 1));
  }

  validate_dataset(d);
  return d;
}

inline void write_dataset(const FunctionalDataset& d, const std::string& curves_path,
                          const std::string& design_path) {
  std::ofstream cf(curves_path);
  if (!cf) throw ValidationError("cannot write " + curves_path);
  for (int l = 0; l < d.m(); ++l)
    cf << (l ? "," : "") << format_double(d.tau[l]);
  cf << "\n";
  for (int i = 0; i < d.n(); ++i) {
    for (int l = 0; l < d.m(); ++l) {
      if (l) cf << ",";
      if (d.observed(i, l)) cf << format_double(d.Y(i, l));
    }
    cf << "\n";
  }

  std::ofstream xf(design_path);
  if (!xf) throw ValidationError("cannot write " + design_path);
  for (int j = 0; j < d.p(); ++j)
    xf << (j ? "," : "") << d.predictor_names[j];
  xf << "\n";
  for (int i = 0; i < d.n(); ++i) {
    for (int j = 0; j < d.p(); ++j)
      xf << (j ? "," : "") << format_double(d.X(i, j));
    xf << "\n";
  }
}

// Column means and standard deviations used to put the design on model
// scale; kept so reported coefficients can be mapped back to raw units.
struct Standardization {
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;
};

// Center and scale each column to mean 0, SD 1 (divide-by-n convention).
// Constant columns are rejected: the intercept is modeled separately.
inline Eigen::MatrixXd standardize_design(const Eigen::MatrixXd& X,
                                          Standardization& rec) {
  const int n = static_cast<int>(X.rows());
  const int p = static_cast<int>(X.cols());
  rec.mean.resize(p);
  rec.sd.resize(p);
  Eigen::MatrixXd Z(n, p);
  for (int j = 0; j < p; ++j) {
    rec.mean[j] = X.col(j).mean();
    Eigen::VectorXd c = X.col(j).array() - rec.mean[j];
    rec.sd[j] = std::sqrt(c.squaredNorm() / n);
    if (!(rec.sd[j] > 0.0))
      throw ValidationError("zero-variance design column " + std::to_string(j) +
                            " (the intercept is modeled separately)");
    Z.col(j) = c / rec.sd[j];
  }
  return Z;
}

}  // namespace fosr
