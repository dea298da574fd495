#include <catch2/catch_amalgamated.hpp>

#include "tensormi/replica.hpp"

using namespace tensormi;

namespace {

// independent 1-D oracle for the scalar Rademacher channel potential:
// psi(s) = -s/2 + E ln cosh(s + sqrt(s) Z), via fine Simpson integration
double rademacher_psi_oracle(double s) {
  const double lo = -10.0, hi = 10.0;
  const int intervals = 4000;
  double h = (hi - lo) / intervals;
  auto integrand = [&](double z) {
    return std::log(std::cosh(s + std::sqrt(s) * z)) * std::exp(-0.5 * z * z) /
           std::sqrt(2.0 * M_PI);
  };
  double acc = integrand(lo) + integrand(hi);
  for (int i = 1; i < intervals; ++i) acc += integrand(lo + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  return -0.5 * s + acc * h / 3.0;
}

Mat random_psd(int k, Rng& rng, double scale) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Mat a(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) a(i, j) = gauss(rng);
  Mat m = a * a.transpose();
  return scale * m / std::max(m.norm(), 1e-12);
}

}  // namespace

TEST_CASE("psi vanishes at zero for a spread of priors") {
  std::vector<Prior> priors{rademacher_prior(), sparse_prior(0.1), sparse_prior(0.5),
                            product_rademacher_prior(2), product_rademacher_prior(3)};
  for (const auto& p : priors) {
    auto quad = QuadSpec::default_for_dim(p.dim());
    Mat zero = Mat::Zero(p.dim(), p.dim());
    REQUIRE(replica::psi(p, zero, quad).value == Catch::Approx(0.0).margin(1e-14));
  }
}

TEST_CASE("scalar rademacher potential matches the closed form") {
  Prior p = rademacher_prior();
  auto quad = QuadSpec::gauss_hermite(40);
  for (double s : {0.1, 0.4, 0.7, 1.0, 1.3, 1.6, 2.0}) {
    Mat m(1, 1);
    m << s;
    REQUIRE(replica::psi(p, m, quad).value ==
            Catch::Approx(rademacher_psi_oracle(s)).margin(1e-10));
  }
}

TEST_CASE("psi gradient matches finite differences") {
  Rng rng = make_rng(21);
  for (int trial = 0; trial < 8; ++trial) {
    int k = 1 + trial % 2;
    Prior p = k == 1 ? rademacher_prior() : product_rademacher_prior(2);
    auto quad = QuadSpec::gauss_hermite(24);
    Mat s = random_psd(k, rng, 0.8) + 0.05 * Mat::Identity(k, k);
    Mat g = replica::grad_psi(p, s, quad).value;
    double h = 1e-5;
    for (int l = 0; l < k; ++l)
      for (int lp = l; lp < k; ++lp) {
        Mat e = symmat::unit_direction(k, l, lp);
        double fd = (replica::psi(p, s + h * e, quad).value -
                     replica::psi(p, s - h * e, quad).value) /
                    (2.0 * h);
        double analytic = g.cwiseProduct(e).sum();
        REQUIRE(analytic == Catch::Approx(fd).margin(1e-6));
      }
  }
}

TEST_CASE("phi gradient matches finite differences") {
  Rng rng = make_rng(22);
  Prior p = product_rademacher_prior(2);
  auto quad = QuadSpec::gauss_hermite(20);
  for (int trial = 0; trial < 4; ++trial) {
    Mat s = random_psd(2, rng, 0.6) + 0.1 * Mat::Identity(2, 2);
    int order = trial % 2 == 0 ? 2 : 4;
    double lambda = 0.8;
    Mat g = replica::grad_phi(p, s, order, lambda, quad);
    double h = 1e-5;
    for (int l = 0; l < 2; ++l)
      for (int lp = l; lp < 2; ++lp) {
        Mat e = symmat::unit_direction(2, l, lp);
        double fd = (replica::phi(p, s + h * e, order, lambda, quad).value -
                     replica::phi(p, s - h * e, order, lambda, quad).value) /
                    (2.0 * h);
        REQUIRE(g.cwiseProduct(e).sum() == Catch::Approx(fd).margin(1e-6));
      }
  }
}

TEST_CASE("below-threshold scalar solve sits at zero overlap") {
  replica::SolverConfig cfg;
  auto sol = replica::solve_replica(rademacher_prior(), 2, 0.5, cfg);
  REQUIRE(sol.converged);
  REQUIRE(sol.s_star(0, 0) == Catch::Approx(0.0).margin(1e-5));
  REQUIRE(sol.mi_limit == Catch::Approx(0.125).margin(1e-8));
}

TEST_CASE("above-threshold scalar solve matches a dense grid oracle") {
  double lambda = 2.0;
  replica::SolverConfig cfg;
  auto sol = replica::solve_replica(rademacher_prior(), 2, lambda, cfg);
  REQUIRE(sol.converged);
  REQUIRE(sol.s_star(0, 0) > 0.1);

  // oracle: refine a dense scan of phi(s) = psi_oracle(lambda s) - lambda s^2/4
  double best_s = 0.0, best_v = 0.0;
  for (int i = 0; i <= 20000; ++i) {
    double s = 1.2 * i / 20000.0;
    double v = (s == 0.0 ? 0.0 : rademacher_psi_oracle(lambda * s)) - lambda * s * s / 4.0;
    if (v > best_v) {
      best_v = v;
      best_s = s;
    }
  }
  double mi_oracle = lambda / 4.0 - best_v;
  REQUIRE(sol.mi_limit == Catch::Approx(mi_oracle).margin(1e-5));
  REQUIRE(sol.s_star(0, 0) == Catch::Approx(best_s).margin(1e-3));
}

TEST_CASE("sweep warm starts and mutual information grows with snr") {
  replica::SolverConfig cfg;
  auto rows = replica::lambda_sweep(rademacher_prior(), 2, {0.5, 1.0, 1.5, 2.0}, cfg);
  REQUIRE(rows.size() == 4);
  for (std::size_t i = 1; i < rows.size(); ++i)
    REQUIRE(rows[i].solution.mi_limit >= rows[i - 1].solution.mi_limit - 1e-9);
}

TEST_CASE("argument validation") {
  auto quad = QuadSpec::gauss_hermite(10);
  Mat s = Mat::Identity(1, 1);
  REQUIRE_THROWS_AS(replica::phi(rademacher_prior(), s, 2, 0.0, quad), std::invalid_argument);
  REQUIRE_THROWS_AS(replica::phi(rademacher_prior(), s, 1, 1.0, quad), std::invalid_argument);
  Mat neg = -Mat::Identity(1, 1);
  REQUIRE_THROWS_AS(replica::psi(rademacher_prior(), neg, quad), NotPSD);
}
