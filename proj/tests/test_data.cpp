#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <fstream>

#include "fosr/dataset.hpp"
#include "test_util.hpp"

using namespace fosr;

namespace {

FunctionalDataset small_dataset() {
  FunctionalDataset d;
  d.Y.resize(3, 4);
  d.Y << 0.1, 0.2, 0.3, 0.4, 1.0, 1.1, 1.2, 1.3, -0.5, 0.0, 0.5, 1.0;
  d.observed = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(3, 4, true);
  d.Y(1, 2) = std::numeric_limits<double>::quiet_NaN();
  d.observed(1, 2) = false;
  d.tau.resize(4);
  d.tau << 0.0, 0.3, 0.6, 1.0;
  d.X.resize(3, 2);
  d.X << 1.0, -2.0, 2.0, 0.5, 3.0, 1.5;
  d.predictor_names = {"age", "dose"};
  return d;
}

}  // namespace

TEST_CASE("standardization centers and scales with the 1/n convention", "[data]") {
  Eigen::MatrixXd X(3, 1);
  X << 1.0, 2.0, 3.0;
  Standardization rec;
  Eigen::MatrixXd Z = standardize_design(X, rec);
  CHECK(rec.mean[0] == Catch::Approx(2.0));
  CHECK(rec.sd[0] == Catch::Approx(0.816496580927726).epsilon(1e-12));
  CHECK(Z(0, 0) == Catch::Approx(-1.224744871391589).epsilon(1e-12));
  CHECK(Z(1, 0) == Catch::Approx(0.0).margin(1e-14));
  CHECK(Z(2, 0) == Catch::Approx(1.224744871391589).epsilon(1e-12));
}

TEST_CASE("standardization is scale equivariant", "[data]") {
  Eigen::MatrixXd X = Eigen::MatrixXd::Random(20, 2);
  Standardization r1, r2;
  Eigen::MatrixXd Z1 = standardize_design(X, r1);
  Eigen::MatrixXd Z2 = standardize_design(2.0 * X, r2);
  CHECK((Z1 - Z2).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(r2.sd[0] == Catch::Approx(2.0 * r1.sd[0]));
}

TEST_CASE("constant design columns are rejected", "[data]") {
  Eigen::MatrixXd X(3, 1);
  X << 5.0, 5.0, 5.0;
  Standardization rec;
  CHECK_THROWS_MATCHES(standardize_design(X, rec), ValidationError,
                       Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring(
                           "zero-variance design column")));
}

TEST_CASE("dataset files round trip including missing cells", "[data]") {
  FunctionalDataset d = small_dataset();
  TempDir tmp;
  write_dataset(d, (tmp / "c.csv").string(), (tmp / "x.csv").string());
  FunctionalDataset r = load_dataset((tmp / "c.csv").string(), (tmp / "x.csv").string());

  REQUIRE(r.n() == 3);
  REQUIRE(r.m() == 4);
  REQUIRE(r.p() == 2);
  CHECK(r.predictor_names == d.predictor_names);
  CHECK((r.tau - d.tau).cwiseAbs().maxCoeff() == 0.0);
  CHECK((r.X - d.X).cwiseAbs().maxCoeff() == 0.0);
  CHECK_FALSE(r.observed(1, 2));
  CHECK(std::isnan(r.Y(1, 2)));
  for (int i = 0; i < 3; ++i)
    for (int l = 0; l < 4; ++l)
      if (r.observed(i, l)) CHECK(r.Y(i, l) == d.Y(i, l));
}

TEST_CASE("NA tokens and blanks both mark missing cells", "[data]") {
  TempDir tmp;
  {
    std::ofstream c(tmp / "c.csv");
    c << "0,0.5,1\n1.5,NA,2.5\n,nan,0.25\n";
    std::ofstream x(tmp / "x.csv");
    x << "z\n0.1\n0.9\n";
  }
  FunctionalDataset d = load_dataset((tmp / "c.csv").string(), (tmp / "x.csv").string());
  CHECK(d.num_missing() == 3);
  CHECK(d.observed(0, 0));
  CHECK_FALSE(d.observed(0, 1));
  CHECK_FALSE(d.observed(1, 0));
  CHECK_FALSE(d.observed(1, 1));
}

TEST_CASE("dataset validation rejects malformed inputs", "[data]") {
  SECTION("non-increasing grid") {
    FunctionalDataset d = small_dataset();
    d.tau[2] = d.tau[1];
    CHECK_THROWS_AS(validate_dataset(d), ValidationError);
  }
  SECTION("fully missing row") {
    FunctionalDataset d = small_dataset();
    for (int l = 0; l < 4; ++l) d.observed(0, l) = false;
    CHECK_THROWS_AS(validate_dataset(d), ValidationError);
  }
  SECTION("name count mismatch") {
    FunctionalDataset d = small_dataset();
    d.predictor_names.pop_back();
    CHECK_THROWS_AS(validate_dataset(d), ValidationError);
  }
  SECTION("non-finite design") {
    FunctionalDataset d = small_dataset();
    d.X(0, 0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(validate_dataset(d), ValidationError);
  }
  SECTION("observed non-finite curve value") {
    FunctionalDataset d = small_dataset();
    d.Y(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(validate_dataset(d), ValidationError);
  }
}

TEST_CASE("loader reports file-level problems", "[data]") {
  TempDir tmp;
  CHECK_THROWS_AS(load_dataset((tmp / "nope.csv").string(), (tmp / "x.csv").string()),
                  ValidationError);
  {
    std::ofstream c(tmp / "c.csv");
    c << "0,1\n1.5,abc\n2.0,3.0\n";
    std::ofstream x(tmp / "x.csv");
    x << "z\n0.1\n0.9\n";
  }
  CHECK_THROWS_MATCHES(
      load_dataset((tmp / "c.csv").string(), (tmp / "x.csv").string()), ValidationError,
      Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("abc")));
  {
    std::ofstream c(tmp / "c2.csv");
    c << "0,1\n1.5,2.5,9\n2.0,3.0\n";
    std::ofstream x(tmp / "x.csv");
    x << "z\n0.1\n0.9\n";
  }
  CHECK_THROWS_MATCHES(
      load_dataset((tmp / "c2.csv").string(), (tmp / "x.csv").string()), ValidationError,
      Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("wrong width")));
}
