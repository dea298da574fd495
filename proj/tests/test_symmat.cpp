#include <catch2/catch_amalgamated.hpp>

#include "tensormi/symmat.hpp"

using namespace tensormi;
using namespace tensormi::symmat;

namespace {

Mat random_psd(int k, Rng& rng, double shift = 0.0) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Mat a(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) a(i, j) = gauss(rng);
  return a * a.transpose() + shift * Mat::Identity(k, k);
}

}  // namespace

TEST_CASE("sym and unit directions") {
  Mat a(2, 2);
  a << 1, 3, 5, 7;
  Mat s = sym(a);
  REQUIRE(s(0, 1) == Catch::Approx(4.0));
  REQUIRE(s(1, 0) == Catch::Approx(4.0));

  Mat e01 = unit_direction(3, 0, 1);
  REQUIRE(e01(0, 1) == 1.0);
  REQUIRE(e01(1, 0) == 1.0);
  REQUIRE(e01.sum() == 2.0);
  Mat e11 = unit_direction(3, 1, 1);
  REQUIRE(e11(1, 1) == 1.0);
  REQUIRE(e11.sum() == 1.0);
}

TEST_CASE("hadamard powers") {
  Mat a(2, 2);
  a << 2, -1, -1, 3;
  REQUIRE(hadamard_power(a, 0).isApprox(Mat::Ones(2, 2)));
  REQUIRE(hadamard_power(a, 1).isApprox(a));
  REQUIRE(hadamard_power(a, 3)(0, 1) == Catch::Approx(-1.0));
  REQUIRE(hadamard_power(a, 3)(1, 1) == Catch::Approx(27.0));
  REQUIRE_THROWS_AS(hadamard_power(a, -1), std::invalid_argument);
}

TEST_CASE("psd square root round trip") {
  Rng rng = make_rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    int k = 1 + trial % 4;
    Mat a = random_psd(k, rng, 0.1);
    Mat b = sqrt_psd(a);
    REQUIRE((b * b - a).norm() < 1e-10);
    REQUIRE((b - b.transpose()).norm() < 1e-12);
  }
  Mat neg = -Mat::Identity(2, 2);
  REQUIRE_THROWS_AS(sqrt_psd(neg), NotPSD);
}

TEST_CASE("psd projection") {
  Mat a(2, 2);
  a << 1, 0, 0, -2;
  Mat p = project_psd(a);
  REQUIRE(p(0, 0) == Catch::Approx(1.0));
  REQUIRE(p(1, 1) == Catch::Approx(0.0).margin(1e-14));
  Rng rng = make_rng(12);
  Mat psd = random_psd(3, rng, 0.2);
  REQUIRE((project_psd(psd) - psd).norm() < 1e-10);
}

TEST_CASE("sylvester equation residual") {
  Rng rng = make_rng(13);
  Mat r = random_psd(3, rng, 0.5);
  Mat b = sym(random_psd(3, rng));
  Mat d = sylvester_sqrt_solve(r, b);
  Mat sq = sqrt_psd(r);
  REQUIRE((sq * d + d * sq - b).norm() < 1e-9);
  REQUIRE_THROWS_AS(sylvester_sqrt_solve(Mat::Zero(2, 2), b.topLeftCorner(2, 2)), SingularMatrix);
}

TEST_CASE("matrix square root derivative matches finite differences") {
  Rng rng = make_rng(14);
  for (int trial = 0; trial < 10; ++trial) {
    int k = 1 + trial % 3;
    Mat r = random_psd(k, rng, 0.5);
    for (int l = 0; l < k; ++l)
      for (int lp = l; lp < k; ++lp) {
        Mat e = unit_direction(k, l, lp);
        double h = 1e-5;
        Mat fd = (sqrt_psd(r + h * e) - sqrt_psd(r - h * e)) / (2.0 * h);
        REQUIRE((dsqrt(r, l, lp) - fd).norm() < 1e-7);
        Mat fd2 = (sqrt_psd(r + h * e) - 2.0 * sqrt_psd(r) + sqrt_psd(r - h * e)) / (h * h);
        REQUIRE((d2sqrt(r, l, lp) - fd2).norm() < 1e-4);
      }
  }
}

TEST_CASE("scalar square root derivatives in closed form") {
  Mat r(1, 1);
  r << 0.49;
  REQUIRE(dsqrt(r, 0, 0)(0, 0) == Catch::Approx(0.5 / 0.7));
  REQUIRE(d2sqrt(r, 0, 0)(0, 0) == Catch::Approx(-0.25 / std::pow(0.49, 1.5)));
}

TEST_CASE("perturbation box samples are comfortably positive definite") {
  for (int k : {1, 2, 3}) {
    double sn = default_sn(8, k);
    REQUIRE(sn > 0.0);
    REQUIRE(sn < 1.0);
    PerturbationBox box(k, sn);
    Rng rng = make_rng(15, static_cast<std::uint64_t>(k));
    for (int trial = 0; trial < 50; ++trial) {
      Mat e = box.sample(rng);
      REQUIRE(min_eigenvalue(e) >= sn - 1e-12);
      for (int i = 0; i < k; ++i) {
        REQUIRE(e(i, i) >= 2.0 * k * sn);
        REQUIRE(e(i, i) <= (2.0 * k + 1.0) * sn);
        for (int j = i + 1; j < k; ++j) {
          REQUIRE(e(i, j) >= sn);
          REQUIRE(e(i, j) <= 2.0 * sn);
        }
      }
    }
  }
}

TEST_CASE("shrink rate decreases with n") {
  REQUIRE(default_sn(100, 1) < default_sn(10, 1));
  // s_n^{9+3K(K+1)} * n must diverge: check the defining exponent inequality
  double alpha_budget = 1.0 / (9.0 + 3.0 * 1 * 2);
  double alpha_used = std::log(default_sn(100, 1)) / std::log(0.99 / 100.0);
  REQUIRE(alpha_used < alpha_budget);
}
