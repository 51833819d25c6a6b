#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "fosr/rng.hpp"
#include "fosr/stats.hpp"

using namespace fosr;

TEST_CASE("seeding is deterministic and streams are distinct", "[rng]") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());

  CHECK(derive_seed(42, 1) != derive_seed(42, 2));
  CHECK(derive_seed(42, 1) != derive_seed(43, 1));
  Rng c(derive_seed(42, 1)), d(derive_seed(42, 2));
  int same = 0;
  for (int i = 0; i < 100; ++i) same += (c.uniform() == d.uniform());
  CHECK(same == 0);
}

TEST_CASE("gamma uses the rate parameterization", "[rng]") {
  Rng rng(7);
  const int N = 200000;
  std::vector<double> x(N);
  for (int i = 0; i < N; ++i) x[i] = rng.gamma(3.0, 2.0);
  double mean = mean_of(x);
  double sd = sd_of(x);
  // Gamma(shape 3, rate 2): mean 1.5, var 0.75.
  CHECK(std::abs(mean - 1.5) < 4.0 * sd / std::sqrt(static_cast<double>(N)));
  CHECK(sd * sd == Catch::Approx(0.75).margin(0.02));

  for (int i = 0; i < N / 4; ++i) x[i] = rng.gamma(1.0, 5.0);
  x.resize(N / 4);
  CHECK(mean_of(x) == Catch::Approx(0.2).margin(0.005));

  CHECK_THROWS_AS(rng.gamma(0.0, 1.0), NumericalError);
  CHECK_THROWS_AS(rng.gamma(1.0, -1.0), NumericalError);
}

TEST_CASE("truncated gamma respects its lower bound and conditional law", "[rng]") {
  Rng rng(11);
  const double shape = 0.5, rate = 1.0, lower = 2.0;
  const int N = 10000;
  std::vector<double> x(N);
  for (int i = 0; i < N; ++i) {
    x[i] = rng.gamma_truncated_lower(shape, rate, lower);
    REQUIRE(x[i] >= lower);
  }

  // Independent oracle: plain rejection from the untruncated distribution.
  Rng oracle(1234);
  std::vector<double> y;
  while (y.size() < static_cast<std::size_t>(N)) {
    double v = oracle.gamma(shape, rate);
    if (v >= lower) y.push_back(v);
  }
  double se = std::hypot(sd_of(x) / std::sqrt(static_cast<double>(N)),
                         sd_of(y) / std::sqrt(static_cast<double>(N)));
  CHECK(std::abs(mean_of(x) - mean_of(y)) < 4.0 * se);
}

TEST_CASE("two-sided truncated gamma matches rejection in every regime", "[rng]") {
  Rng rng(19);

  // Bulk inside the window: behaves like the plain draw.
  const int N = 20000;
  std::vector<double> x(N);
  for (int i = 0; i < N; ++i) {
    x[i] = rng.gamma_truncated(3.0, 2.0, 1e-8, 1e8);
    REQUIRE(x[i] >= 1e-8);
    REQUIRE(x[i] <= 1e8);
  }
  CHECK(mean_of(x) == Catch::Approx(1.5).margin(0.03));

  // Bulk far above the window (the smoothing-precision runaway regime):
  // with rate ~ 0 the conditional is the pure power law x^{shape-1}, whose
  // mean on [0, u] is u * shape / (shape + 1).
  const double u = 1e8;
  for (int i = 0; i < N; ++i) {
    x[i] = rng.gamma_truncated(3.0, 1e-10, 1e-8, u);
    REQUIRE(x[i] <= u);
  }
  CHECK(mean_of(x) == Catch::Approx(0.75 * u).epsilon(0.01));

  // Bulk below the window: the draw reduces to the lower-truncated tail
  // draw (whose law the dedicated test above covers, including its
  // documented shifted-exponential tail approximation); here only the
  // window itself is asserted.
  for (int i = 0; i < 2000; ++i) {
    double v = rng.gamma_truncated(2.0, 1.0, 20.0, 24.0);
    REQUIRE(v >= 20.0);
    REQUIRE(v <= 24.0);
  }

  CHECK_THROWS_AS(rng.gamma_truncated(1.0, 1.0, 2.0, 2.0), NumericalError);
}

TEST_CASE("poisson mean and variance", "[rng]") {
  Rng rng(3);
  const int N = 100000;
  std::vector<double> x(N);
  for (int i = 0; i < N; ++i) x[i] = rng.poisson(1.0);
  CHECK(mean_of(x) == Catch::Approx(1.0).margin(0.02));
  CHECK(sd_of(x) * sd_of(x) == Catch::Approx(1.0).margin(0.03));
}

TEST_CASE("normal with explicit mean and sd", "[rng]") {
  Rng rng(5);
  const int N = 100000;
  std::vector<double> x(N);
  for (int i = 0; i < N; ++i) x[i] = rng.normal(-2.0, 3.0);
  CHECK(mean_of(x) == Catch::Approx(-2.0).margin(0.05));
  CHECK(sd_of(x) == Catch::Approx(3.0).margin(0.05));
}
