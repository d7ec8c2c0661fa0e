#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "cnsbm/special.hpp"

using namespace cnsbm;

TEST_CASE("digamma satisfies the recurrence psi(x+1) = psi(x) + 1/x") {
  for (double x : {0.1, 0.5, 1.0, 2.5, 7.0, 25.0, 400.0}) {
    REQUIRE(digamma(x + 1.0) == Catch::Approx(digamma(x) + 1.0 / x).epsilon(1e-12));
  }
}

TEST_CASE("digamma rejects non-positive arguments") {
  REQUIRE_THROWS_AS(digamma(0.0), DomainError);
  REQUIRE_THROWS_AS(digamma(-1.5), DomainError);
}

TEST_CASE("expected_log_dirichlet on (1,1) gives (-1,-1)") {
  const auto out = expected_log_dirichlet({1.0, 1.0});
  REQUIRE(out[0] == Catch::Approx(-1.0).margin(1e-12));
  REQUIRE(out[1] == Catch::Approx(-1.0).margin(1e-12));
}

TEST_CASE("expected_log_dirichlet on (2,2) gives (-5/6,-5/6)") {
  const auto out = expected_log_dirichlet({2.0, 2.0});
  REQUIRE(out[0] == Catch::Approx(-5.0 / 6.0).margin(1e-12));
  REQUIRE(out[1] == Catch::Approx(-5.0 / 6.0).margin(1e-12));
}

namespace {
// fourth-order central difference of log Gamma; truncation stays below 1e-9
// even at x = 0.1 where lower-order stencils lose accuracy
double lgamma_slope(double x) {
  const double h = 1e-4;
  return (-std::lgamma(x + 2 * h) + 8 * std::lgamma(x + h) - 8 * std::lgamma(x - h) +
          std::lgamma(x - 2 * h)) /
         (12 * h);
}
}  // namespace

TEST_CASE("expected_log_dirichlet matches a finite-difference log-gamma oracle") {
  for (double x = 0.1; x <= 50.0; x *= 1.45) {
    const auto out = expected_log_dirichlet({x, 3.0});
    REQUIRE(out[0] ==
            Catch::Approx(lgamma_slope(x) - lgamma_slope(x + 3.0)).epsilon(0).margin(1e-8));
  }
}

TEST_CASE("expected_log_dirichlet outputs satisfy Jensen strictly") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> gamma(4);
    for (double& g : gamma) g = 0.2 + 10.0 * rng.uniform();
    double total = 0.0;
    for (double e : expected_log_dirichlet(gamma)) total += std::exp(e);
    REQUIRE(total < 1.0);
  }
}

TEST_CASE("dirichlet_kl is zero at equality") {
  REQUIRE(dirichlet_kl({1.0, 1.0}, {1.0, 1.0}) == Catch::Approx(0.0).margin(1e-14));
  REQUIRE(dirichlet_kl({3.5, 0.2, 7.0}, {3.5, 0.2, 7.0}) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("dirichlet_kl closed-form example: KL((2,1) || (1,1)) = log 2 - 1/2") {
  REQUIRE(dirichlet_kl({2.0, 1.0}, {1.0, 1.0}) ==
          Catch::Approx(std::log(2.0) - 0.5).margin(1e-10));
}

TEST_CASE("dirichlet_kl is non-negative on random pairs and positive off equality") {
  Rng rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> q(3), p(3);
    for (int k = 0; k < 3; ++k) {
      q[k] = 0.1 + 8.0 * rng.uniform();
      p[k] = 0.1 + 8.0 * rng.uniform();
    }
    REQUIRE(dirichlet_kl(q, p) >= -1e-12);
  }
  REQUIRE(dirichlet_kl({1.001, 1.0}, {1.0, 1.0}) > 0.0);
}

TEST_CASE("dirichlet_kl validates its inputs") {
  REQUIRE_THROWS_AS(dirichlet_kl({1.0}, {1.0, 1.0}), ShapeError);
  REQUIRE_THROWS_AS(dirichlet_kl({0.0, 1.0}, {1.0, 1.0}), DomainError);
}

TEST_CASE("log_beta on small exact cases") {
  REQUIRE(log_beta({1.0, 1.0}) == Catch::Approx(0.0).margin(1e-14));           // B(1,1) = 1
  REQUIRE(log_beta({2.0, 1.0}) == Catch::Approx(-std::log(2.0)).margin(1e-12));  // B(2,1) = 1/2
}
