#include <catch2/catch_amalgamated.hpp>

#include "tensormi/quadrature.hpp"

using namespace tensormi;

namespace {

// fine composite Simpson against the Gaussian density, independent of the
// Golub-Welsch construction
double simpson_gaussian(double (*f)(double), double lo = -10.0, double hi = 10.0,
                        int intervals = 4000) {
  auto integrand = [&](double z) {
    return f(z) * std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
  };
  double h = (hi - lo) / intervals;
  double acc = integrand(lo) + integrand(hi);
  for (int i = 1; i < intervals; ++i) acc += integrand(lo + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

}  // namespace

TEST_CASE("gauss-hermite reproduces gaussian moments") {
  GaussHermite gh(20);
  REQUIRE(gh.weights.sum() == Catch::Approx(1.0));
  double m2 = 0, m4 = 0, m6 = 0, m1 = 0;
  for (int i = 0; i < 20; ++i) {
    double z = gh.nodes[i], w = gh.weights[i];
    m1 += w * z;
    m2 += w * z * z;
    m4 += w * std::pow(z, 4);
    m6 += w * std::pow(z, 6);
  }
  REQUIRE(m1 == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(m2 == Catch::Approx(1.0));
  REQUIRE(m4 == Catch::Approx(3.0));
  REQUIRE(m6 == Catch::Approx(15.0));
}

TEST_CASE("gauss-hermite agrees with an independent quadrature on a smooth integrand") {
  auto est = gaussian_expectation(1, QuadSpec::gauss_hermite(40),
                                  [](const Vec& z) { return std::log(std::cosh(1.0 + z[0])); });
  double oracle = simpson_gaussian(+[](double z) { return std::log(std::cosh(1.0 + z)); });
  REQUIRE(est.value == Catch::Approx(oracle).margin(1e-10));
  REQUIRE(est.std_err == 0.0);
}

TEST_CASE("tensor grid covers multiple dimensions") {
  auto est = gaussian_expectation(2, QuadSpec::gauss_hermite(12),
                                  [](const Vec& z) { return z[0] * z[0] * z[1] * z[1]; });
  REQUIRE(est.value == Catch::Approx(1.0));
  REQUIRE_THROWS_AS(gaussian_expectation(4, QuadSpec::gauss_hermite(8),
                                         [](const Vec&) { return 0.0; }),
                    std::invalid_argument);
}

TEST_CASE("monte carlo estimate with error bar") {
  auto est = gaussian_expectation(1, QuadSpec::monte_carlo(40000, 5),
                                  [](const Vec& z) { return z[0] * z[0]; });
  REQUIRE(std::abs(est.value - 1.0) < 4.0 * est.std_err);
  // common random numbers: same seed gives identical output
  auto again = gaussian_expectation(1, QuadSpec::monte_carlo(40000, 5),
                                    [](const Vec& z) { return z[0] * z[0]; });
  REQUIRE(est.value == again.value);
  REQUIRE(est.std_err == again.std_err);
}

TEST_CASE("matrix-valued expectation matches scalar path") {
  auto scalar = gaussian_expectation(2, QuadSpec::gauss_hermite(16),
                                     [](const Vec& z) { return z[0] * z[0] + 2.0 * z[1]; });
  auto mat = gaussian_expectation_mat(2, QuadSpec::gauss_hermite(16), 1, 2, [](const Vec& z) {
    Mat m(1, 2);
    m << z[0] * z[0] + 2.0 * z[1], z[0] * z[1];
    return m;
  });
  REQUIRE(mat.value(0, 0) == Catch::Approx(scalar.value));
  REQUIRE(mat.value(0, 1) == Catch::Approx(0.0).margin(1e-12));

  auto mc = gaussian_expectation_mat(2, QuadSpec::monte_carlo(20000, 9), 1, 2, [](const Vec& z) {
    Mat m(1, 2);
    m << z[0] * z[0], z[1];
    return m;
  });
  REQUIRE(std::abs(mc.value(0, 0) - 1.0) < 4.0 * mc.std_err(0, 0));
  REQUIRE(std::abs(mc.value(0, 1)) < 4.0 * mc.std_err(0, 1));
}

TEST_CASE("welford accumulator") {
  MeanVar mv;
  for (double x : {1.0, 2.0, 3.0, 4.0}) mv.add(x);
  REQUIRE(mv.mean == Catch::Approx(2.5));
  REQUIRE(mv.variance() == Catch::Approx(5.0 / 3.0));
  REQUIRE(mv.stderr_mean() == Catch::Approx(std::sqrt(5.0 / 12.0)));
}

TEST_CASE("log-sum-exp is overflow safe") {
  std::vector<double> xs{1000.0, 1000.0};
  REQUIRE(log_sum_exp(xs) == Catch::Approx(1000.0 + std::log(2.0)));
  std::vector<double> small{-2.0, -1.0, 0.0};
  double direct = std::log(std::exp(-2.0) + std::exp(-1.0) + 1.0);
  REQUIRE(log_sum_exp(small) == Catch::Approx(direct));
}

TEST_CASE("parallel loops are deterministic across worker counts") {
  std::vector<double> a(64), b(64);
  auto task = [](std::size_t i) {
    Rng rng = make_rng(42, i);
    std::normal_distribution<double> gauss;
    return gauss(rng);
  };
  parallel_for(64, 1, [&](std::size_t i) { a[i] = task(i); });
  parallel_for(64, 8, [&](std::size_t i) { b[i] = task(i); });
  REQUIRE(a == b);
}
