#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "fosr/simulation.hpp"
#include "fosr/stats.hpp"
#include "test_util.hpp"

TEST_CASE("generated data honors the signal-to-noise definition", "[sim]") {
  fosr::SimParams sp;
  sp.n = 50;
  sp.m = 20;
  sp.p = 10;
  sp.p1 = 5;
  sp.rsnr = 5.0;
  sp.seed = 42;
  auto [ds, tr] = fosr::generate_dataset(sp);

  std::vector<double> flat(tr.Y_star.data(), tr.Y_star.data() + tr.Y_star.size());
  REQUIRE(fosr::sd_of(flat) / tr.sigma_star == Catch::Approx(5.0).epsilon(1e-10));

  // Same seed reproduces everything; another seed moves the noise.
  auto [ds2, tr2] = fosr::generate_dataset(sp);
  REQUIRE((ds.Y - ds2.Y).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE((ds.X - ds2.X).cwiseAbs().maxCoeff() == 0.0);
  sp.seed = 43;
  auto [ds3, tr3] = fosr::generate_dataset(sp);
  REQUIRE((ds.Y - ds3.Y).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("true loadings are orthonormal with a flat first column", "[sim]") {
  for (int m : {10, 30, 101}) {
    Eigen::VectorXd tau = Eigen::VectorXd::LinSpaced(m, 0.0, 1.0);
    Eigen::MatrixXd F = fosr::detail::true_loadings(tau);
    REQUIRE(F.cols() == 4);
    Eigen::MatrixXd G = F.transpose() * F - Eigen::MatrixXd::Identity(4, 4);
    REQUIRE(G.cwiseAbs().maxCoeff() < 1e-10);
    for (int l = 0; l < m; ++l)
      REQUIRE(F(l, 0) == Catch::Approx(1.0 / std::sqrt(double(m))).epsilon(1e-14));
    // Orthogonal polynomials of degree 2..4: no component along the linear
    // trend, so the dropped degree-1 direction stays outside the true span.
    Eigen::VectorXd lin = tau.array() - tau.mean();
    lin /= lin.norm();
    REQUIRE((F.transpose() * lin).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("design columns follow the intended autoregression", "[sim]") {
  fosr::SimParams sp;
  sp.n = 10000;
  sp.m = 5;
  sp.p = 5;
  sp.p1 = 2;
  sp.seed = 7;
  auto [ds, tr] = fosr::generate_dataset(sp);

  auto corr = [&](int a, int b) {
    double ma = ds.X.col(a).mean(), mb = ds.X.col(b).mean();
    Eigen::VectorXd ca = ds.X.col(a).array() - ma;
    Eigen::VectorXd cb = ds.X.col(b).array() - mb;
    return ca.dot(cb) / std::sqrt(ca.squaredNorm() * cb.squaredNorm());
  };
  const double se = (1.0 - 0.75 * 0.75) / std::sqrt(double(sp.n));
  for (int j = 0; j + 1 < sp.p; ++j)
    REQUIRE(corr(j, j + 1) == Catch::Approx(0.75).margin(4 * se));
  REQUIRE(corr(0, 2) == Catch::Approx(0.75 * 0.75).margin(0.03));
  for (int j = 0; j < sp.p; ++j) {
    REQUIRE(ds.X.col(j).mean() == Catch::Approx(0.0).margin(4.0 / std::sqrt(double(sp.n))));
    double v = (ds.X.col(j).array() - ds.X.col(j).mean()).square().sum() / (sp.n - 1);
    REQUIRE(v == Catch::Approx(1.0).margin(0.06));
  }
}

TEST_CASE("support layout and coefficient structure hold for every seed", "[sim]") {
  auto idx = fosr::detail::support_indices(20, 10);
  REQUIRE(idx == std::vector<int>{0, 2, 4, 6, 8, 11, 13, 15, 17, 19});
  REQUIRE(fosr::detail::support_indices(7, 1) == std::vector<int>{0});
  REQUIRE(fosr::detail::support_indices(3, 3) == std::vector<int>{0, 1, 2});

  // Nonzero factor subsets are uniform, not nested: count how often each
  // factor appears and how often factor 1 is skipped entirely.
  int factor_hits[4] = {0, 0, 0, 0};
  int skip_first = 0, nonnull_total = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    fosr::SimParams sp;
    sp.n = 8;
    sp.m = 12;
    sp.p = 20;
    sp.p1 = 10;
    sp.seed = seed;
    auto [ds, tr] = fosr::generate_dataset(sp);

    int active = 0;
    for (int j = 0; j < sp.p; ++j) {
      bool on = tr.support[j];
      active += on;
      int nonzero = 0;
      for (int k = 0; k < 4; ++k) nonzero += (tr.A_star(k, j) != 0.0);
      if (on) {
        REQUIRE(nonzero >= 1);
        REQUIRE(nonzero <= 4);
        ++nonnull_total;
        for (int k = 0; k < 4; ++k) factor_hits[k] += (tr.A_star(k, j) != 0.0);
        skip_first += (tr.A_star(0, j) == 0.0);
      } else {
        REQUIRE(nonzero == 0);
      }
    }
    REQUIRE(active == sp.p1);
    for (int k = 0; k < 4; ++k)
      REQUIRE(tr.mu_star[k] == Catch::Approx(1.0 / (k + 1)).epsilon(1e-15));
  }
  // Exchangeable selection: every factor appears at roughly the same rate
  // (E[K*_j]/4 ~ 0.36 of non-nulls each), and factor 1 is absent from a
  // substantial share, which a nested top-down scheme would never produce.
  for (int k = 0; k < 4; ++k) {
    REQUIRE(factor_hits[k] > nonnull_total / 5);
    REQUIRE(factor_hits[k] < nonnull_total / 2);
  }
  REQUIRE(skip_first > nonnull_total / 3);
}

TEST_CASE("rare-event counts stay within the truncation bounds", "[sim]") {
  fosr::Rng rng(17);
  double sum = 0.0;
  const int N = 5000;
  for (int s = 0; s < N; ++s) {
    int k = fosr::detail::truncated_poisson(rng, 1.0, 1, 4);
    REQUIRE(k >= 1);
    REQUIRE(k <= 4);
    sum += k;
  }
  // Mean of Poisson(1) restricted to {1,..,4}.
  const double w = 1.0 + 0.5 + 1.0 / 6.0 + 1.0 / 24.0;
  const double mean = (1.0 + 1.0 + 0.5 + 1.0 / 6.0) / w;
  REQUIRE(sum / N == Catch::Approx(mean).margin(0.045));
}

TEST_CASE("truth files round-trip through json", "[sim]") {
  fosr::SimParams sp;
  sp.n = 6;
  sp.m = 9;
  sp.p = 5;
  sp.p1 = 3;
  sp.seed = 3;
  auto [ds, tr] = fosr::generate_dataset(sp);

  TempDir tmp;
  fosr::save_truth(tr, tmp / "truth.json");
  fosr::SimTruth back = fosr::load_truth(tmp / "truth.json");
  REQUIRE((back.tau - tr.tau).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE((back.F_star - tr.F_star).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE((back.A_star - tr.A_star).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE((back.mu_star - tr.mu_star).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE((back.Gamma_star - tr.Gamma_star).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE((back.Y_star - tr.Y_star).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(back.support == tr.support);
  REQUIRE(back.sigma_star == tr.sigma_star);
  REQUIRE(back.rsnr == tr.rsnr);
}

TEST_CASE("coefficient error metric has exact reference values", "[sim]") {
  fosr::SimTruth tr;
  tr.F_star.resize(2, 1);
  tr.F_star << 1.0, 0.0;
  tr.A_star.resize(1, 2);
  tr.A_star << 3.0, 4.0;
  // alpha_tilde = [[3,0],[4,0]] (p = 2, m = 2)

  REQUIRE(fosr::rmse(tr.alpha_tilde(), tr) == 0.0);
  Eigen::MatrixXd plus1 = tr.alpha_tilde().array() + 1.0;
  REQUIRE(fosr::rmse(plus1, tr) == Catch::Approx(1.0).epsilon(1e-14));
  REQUIRE(fosr::rmse(Eigen::MatrixXd::Zero(2, 2), tr) ==
          Catch::Approx(2.5).epsilon(1e-14));
  REQUIRE_THROWS_AS(fosr::rmse(Eigen::MatrixXd::Zero(3, 2), tr),
                    fosr::ValidationError);
}

TEST_CASE("interval width and coverage metrics have exact values", "[sim]") {
  fosr::SimTruth tr;
  tr.F_star.resize(2, 1);
  tr.F_star << 1.0, 0.0;
  tr.A_star.resize(1, 2);
  tr.A_star << 3.0, 4.0;

  fosr::CoefficientSummary cs;
  cs.mean = Eigen::MatrixXd::Zero(2, 2);
  cs.pw_lo.resize(2, 2);
  cs.pw_hi.resize(2, 2);
  cs.pw_lo << 2.5, -1.0, 10.0, -1.0;
  cs.pw_hi << 3.5, 1.0, 11.0, 1.0;

  auto [width, cover] = fosr::mciw_and_coverage(cs, tr);
  REQUIRE(width == Catch::Approx(1.5).epsilon(1e-14));
  REQUIRE(cover == Catch::Approx(0.75).epsilon(1e-14));
}

TEST_CASE("ranking curves hit the textbook endpoints", "[sim]") {
  std::vector<bool> support{true, true, false, false};

  Eigen::VectorXd perfect(4);
  perfect << 4, 3, 2, 1;
  auto pts = fosr::roc_points(perfect, support);
  REQUIRE(pts.size() == 5);
  REQUIRE(pts.front().fpr == 0.0);
  REQUIRE(pts.front().tpr == 0.0);
  REQUIRE(pts[2].tpr == 1.0);  // both true predictors first
  REQUIRE(pts[2].fpr == 0.0);
  REQUIRE(pts.back().fpr == 1.0);
  REQUIRE(pts.back().tpr == 1.0);
  REQUIRE(fosr::roc_area(pts) == Catch::Approx(1.0));

  Eigen::VectorXd worst(4);
  worst << 1, 2, 3, 4;
  REQUIRE(fosr::roc_area(fosr::roc_points(worst, support)) == Catch::Approx(0.0));

  // Random scores average to a diagonal curve.
  fosr::Rng rng(5);
  std::vector<bool> sup10(10, false);
  for (int j = 0; j < 5; ++j) sup10[j] = true;
  double total = 0.0;
  const int R = 2000;
  for (int r = 0; r < R; ++r) {
    Eigen::VectorXd sc(10);
    for (int j = 0; j < 10; ++j) sc[j] = rng.uniform();
    total += fosr::roc_area(fosr::roc_points(sc, sup10));
  }
  REQUIRE(total / R == Catch::Approx(0.5).margin(0.02));

  Eigen::VectorXd wrong(3);
  wrong << 1, 2, 3;
  REQUIRE_THROWS_AS(fosr::roc_points(wrong, support), fosr::ValidationError);
}

TEST_CASE("masking holds out cells without emptying rows", "[sim]") {
  fosr::SimParams sp;
  sp.n = 40;
  sp.m = 15;
  sp.p = 6;
  sp.p1 = 3;
  sp.seed = 9;
  auto [ds, tr] = fosr::generate_dataset(sp);
  Eigen::MatrixXd orig = ds.Y;

  fosr::Rng rng(1);
  auto held = fosr::apply_missingness(ds, 0.3, rng);

  const double expect = 0.3 * sp.n * sp.m;
  REQUIRE(std::abs(double(held.size()) - expect) <
          4 * std::sqrt(expect * 0.7) + 1);
  int masked = 0;
  for (int i = 0; i < sp.n; ++i) {
    bool any = false;
    for (int l = 0; l < sp.m; ++l) {
      if (!ds.observed(i, l)) ++masked;
      any = any || ds.observed(i, l);
    }
    REQUIRE(any);  // no fully missing rows
  }
  REQUIRE(masked == static_cast<int>(held.size()));
  for (const auto& c : held) {
    REQUIRE(!ds.observed(c.row, c.col));
    REQUIRE(c.value == orig(c.row, c.col));
    REQUIRE(std::isnan(ds.Y(c.row, c.col)));
  }

  // Extreme rate still leaves one point per row.
  auto [ds2, tr2] = fosr::generate_dataset(sp);
  fosr::Rng rng2(2);
  fosr::apply_missingness(ds2, 0.95, rng2);
  for (int i = 0; i < sp.n; ++i) {
    bool any = false;
    for (int l = 0; l < sp.m; ++l) any = any || ds2.observed(i, l);
    REQUIRE(any);
  }

  fosr::Rng rng3(3);
  REQUIRE_THROWS_AS(fosr::apply_missingness(ds2, 1.0, rng3), fosr::ValidationError);
  REQUIRE_THROWS_AS(fosr::apply_missingness(ds2, -0.1, rng3), fosr::ValidationError);
}

TEST_CASE("generation rejects impossible shapes", "[sim]") {
  fosr::SimParams sp;
  sp.p = 3;
  sp.p1 = 5;
  REQUIRE_THROWS_AS(fosr::generate_dataset(sp), fosr::ValidationError);
  sp.p1 = 0;
  REQUIRE_THROWS_AS(fosr::generate_dataset(sp), fosr::ValidationError);
  sp.p = 10;
  sp.p1 = 5;
  sp.rsnr = 0.0;
  REQUIRE_THROWS_AS(fosr::generate_dataset(sp), fosr::ValidationError);
}
