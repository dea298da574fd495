#include <catch2/catch_amalgamated.hpp>

#include "tensormi/model.hpp"
#include "tensormi/prior.hpp"

using namespace tensormi;

TEST_CASE("weights normalize and validate") {
  Vec a(1), b(1);
  a << 1.0;
  b << -1.0;
  Prior p = make_prior({{a, 2.0}, {b, 6.0}});
  REQUIRE(p.weight(0) == Catch::Approx(0.25));
  REQUIRE(p.weight(1) == Catch::Approx(0.75));
  REQUIRE(p.log_weight(1) == Catch::Approx(std::log(0.75)));

  REQUIRE_THROWS_AS(make_prior({}), std::invalid_argument);
  REQUIRE_THROWS_AS(make_prior({{a, 0.0}}), std::invalid_argument);
  Vec c2(2);
  c2 << 1.0, 2.0;
  REQUIRE_THROWS_AS(make_prior({{a, 1.0}, {c2, 1.0}}), std::invalid_argument);
}

TEST_CASE("second moments of the stock priors") {
  REQUIRE(rademacher_prior().second_moment()(0, 0) == Catch::Approx(1.0));
  REQUIRE(sparse_prior(0.3).second_moment()(0, 0) == Catch::Approx(1.0));
  Mat sigma = product_rademacher_prior(2).second_moment();
  REQUIRE(sigma.isApprox(Mat::Identity(2, 2), 1e-12));
  REQUIRE(product_rademacher_prior(3).n_atoms() == 8);
}

TEST_CASE("moment bound helper") {
  Prior p = sparse_prior(0.25);
  // E|X|^4 = rho * (1/rho)^2 = 1/rho
  REQUIRE(p.moment(4) == Catch::Approx(4.0));
  REQUIRE(p.moment(2) == Catch::Approx(1.0));
}

TEST_CASE("snr rescaling scales atoms by lambda^(1/2p)") {
  Prior base = rademacher_prior();
  Prior scaled = rescale_to_unit_snr(base, 2, 0.5);
  REQUIRE(scaled.point(0)(0) == Catch::Approx(std::pow(0.5, 0.25)));
  REQUIRE(scaled.weight(0) == Catch::Approx(0.5));
}

TEST_CASE("rescaling preserves the observation law") {
  // signal coefficient times product term must agree between (lambda, P_X)
  // and (1, rescaled P_X) for identical atom picks
  Prior base = rademacher_prior();
  int p = 4;
  double lambda = 2.7;
  Prior scaled = rescale_to_unit_snr(base, p, lambda);
  long n = 5;
  Rng rng1 = make_rng(3), rng2 = make_rng(3);
  Mat x1 = model::sample_signal(base, n, rng1);
  Mat x2 = model::sample_signal(scaled, n, rng2);
  auto idx = model::ordered_indices(n, p);
  double c1 = model::signal_coeff(n, p, lambda);
  double c2 = model::signal_coeff(n, p, 1.0);
  for (const auto& tuple : idx)
    REQUIRE(c1 * model::product_term(x1, tuple) ==
            Catch::Approx(c2 * model::product_term(x2, tuple)).margin(1e-12));
}

TEST_CASE("json round trip") {
  Prior p = product_rademacher_prior(2);
  Prior q = prior_from_json(prior_to_json(p));
  REQUIRE(q.dim() == p.dim());
  REQUIRE(q.n_atoms() == p.n_atoms());
  for (int i = 0; i < p.n_atoms(); ++i) {
    REQUIRE((q.point(i) - p.point(i)).norm() == 0.0);
    REQUIRE(q.weight(i) == Catch::Approx(p.weight(i)));
  }
  nlohmann::json bad = {{"K", 2}, {"atoms", {{{"x", {1.0}}, {"w", 1.0}}}}};
  REQUIRE_THROWS_AS(prior_from_json(bad), std::invalid_argument);
}

TEST_CASE("named priors parse") {
  REQUIRE(named_prior("rademacher").n_atoms() == 2);
  REQUIRE(named_prior("sparse(0.2)").second_moment()(0, 0) == Catch::Approx(1.0));
  REQUIRE(named_prior("product_rademacher(3)").dim() == 3);
  REQUIRE_THROWS_AS(named_prior("gaussian"), std::invalid_argument);
}

TEST_CASE("atom sampling matches weights") {
  Prior p = sparse_prior(0.3);
  Rng rng = make_rng(4);
  long hits = 0;
  const long m = 200000;
  for (long i = 0; i < m; ++i)
    if (p.sample_atom(rng) == 1) ++hits;
  double freq = static_cast<double>(hits) / m;
  REQUIRE(std::abs(freq - 0.3) < 4.0 * std::sqrt(0.3 * 0.7 / m));
}
