#include <catch2/catch_amalgamated.hpp>

#include "qsl/liouville.hpp"

using namespace qsl;

TEST_CASE("critical dimension and exponent closed forms") {
  CHECK(critical_dimension(2.0) == Catch::Approx(10.0).margin(1e-14));
  const auto rep = lower_bound_exponent(2.0, 3);
  CHECK(rep.gamma ==
        Catch::Approx((1.0 + 2.0 * std::sqrt(2.0)) / 2.0).epsilon(1e-13));
  CHECK(rep.regime == "polynomial");
  CHECK_THROWS_AS(lower_bound_exponent(1.0, 3), ValidationError);
  CHECK_THROWS_AS(lower_bound_exponent(0.5, 3), ValidationError);
}

TEST_CASE("gamma vanishes exactly at the critical dimension") {
  for (double p : {1.5, 2.0, 3.0, 5.0}) {
    const double nstar = critical_dimension(p);
    CHECK(std::abs(lower_bound_gamma(p, nstar)) <= 1e-12);
  }
  // p = 3: n* = 4*3/2 + 3 = 9 exactly, so the integer report is logarithmic
  const auto rep = lower_bound_exponent(3.0, 9);
  CHECK(rep.regime == "logarithmic");
}

TEST_CASE("gamma is strictly decreasing in n where the bound is monotone") {
  // gamma'(n) = (1/p)(-1 + 1/sqrt((n-1)(p-1))): decreasing for
  // (n-1)(p-1) > 1; below that threshold the exponent rises with n
  // (e.g. gamma(1.5, 2) < gamma(1.5, 3)).
  for (double p : {1.5, 2.0, 4.0}) {
    const int n0 = static_cast<int>(std::ceil(1.0 + 1.0 / (p - 1.0))) + 1;
    double prev = 1e300;
    for (int n = n0; n <= 20; ++n) {
      const double g = lower_bound_gamma(p, n);
      CHECK(g < prev);
      prev = g;
    }
  }
  CHECK(lower_bound_gamma(1.5, 2) < lower_bound_gamma(1.5, 3));
}

TEST_CASE("regimes by dimension for p = 2") {
  CHECK(lower_bound_exponent(2.0, 3).regime == "polynomial");
  CHECK(lower_bound_exponent(2.0, 10).regime == "logarithmic");
  CHECK(lower_bound_exponent(2.0, 11).regime == "bounded-admissible");
}

TEST_CASE("growth fit calibrates on synthetic power laws") {
  const auto rep = lower_bound_exponent(2.0, 3);
  auto synth = [&rep](double r) {
    return Eigen::VectorXd::Constant(1, std::pow(r, rep.gamma));
  };
  const auto fit = growth_fit(synth, 1, 1.0, 100.0, rep);
  CHECK(fit.slope == Catch::Approx(rep.gamma).margin(1e-3));
  CHECK(fit.pass);
}

TEST_CASE("growth fit marks constants as vacuous") {
  const auto rep = lower_bound_exponent(2.0, 3);
  auto constant = [](double) { return Eigen::VectorXd::Constant(1, 0.7); };
  const auto fit = growth_fit(constant, 1, 1.0, 50.0, rep);
  CHECK(fit.vacuous);
  CHECK(fit.pass);
  CHECK(fit.verdict.find("vacuous") != std::string::npos);
}

TEST_CASE("growth fit flags sub-bound growth as inconsistent with stability") {
  const auto rep = lower_bound_exponent(2.0, 3);  // gamma ~ 1.914
  auto slow = [](double r) {
    return Eigen::VectorXd::Constant(1, std::sqrt(r) * (1.0 + 0.2 * std::sin(3 * r)));
  };
  const auto fit = growth_fit(slow, 1, 1.0, 100.0, rep);
  CHECK_FALSE(fit.pass);
  CHECK(fit.verdict.find("inconsistent") != std::string::npos);
}

TEST_CASE("growth fit needs at least a decade of radii") {
  const auto rep = lower_bound_exponent(2.0, 3);
  auto synth = [](double r) { return Eigen::VectorXd::Constant(1, r); };
  CHECK_THROWS_AS(growth_fit(synth, 1, 1.0, 5.0, rep), InsufficientRange);
}

TEST_CASE("Holder chain on the synthetic linear radial solution") {
  // u(r) = r, m = 1, p = 2, n = 3 on [1, 4]: all three integrals elementary
  RadialSolution rad;
  rad.dim = 3;
  rad.p = 2.0;
  Profile1D& pr = rad.profile;
  pr.t0 = 0.0;
  pr.t1 = 5.0;
  pr.m = 1;
  pr.phi = make_phi(PhiKind::Laplacian);
  pr.h = allen_cahn();
  const int np = 2001;
  pr.u.assign(1, Eigen::VectorXd(np));
  pr.du.assign(1, Eigen::VectorXd::Ones(np));
  for (int k = 0; k < np; ++k) pr.u[0][k] = pr.t0 + (pr.t1 - pr.t0) * k / (np - 1);

  const auto res = holder_chain_check(rad, 1.0, 4.0);
  CHECK(res.pass);
  // lhs = int_1^4 s^{-2/3} ds = 3(4^{1/3} - 1)
  CHECK(res.lhs ==
        Catch::Approx(3.0 * (std::cbrt(4.0) - 1.0)).epsilon(1e-4));
  // I1 = int_1^4 s^-2 = 3/4,  I2 = 3  ->  rhs = (3/4)^{1/3} * 3^{2/3}
  CHECK(res.rhs ==
        Catch::Approx(std::cbrt(0.75) * std::pow(3.0, 2.0 / 3.0)).epsilon(1e-4));
  CHECK(res.slack >= 0.0);
}

TEST_CASE("Holder chain degenerates gracefully as r -> R") {
  RadialSolution rad;
  rad.dim = 3;
  rad.p = 2.0;
  Profile1D& pr = rad.profile;
  pr.t0 = 0.0;
  pr.t1 = 5.0;
  pr.m = 1;
  pr.phi = make_phi(PhiKind::Laplacian);
  pr.h = allen_cahn();
  pr.u.assign(1, Eigen::VectorXd::LinSpaced(501, 0.0, 5.0));
  pr.du.assign(1, Eigen::VectorXd::Ones(501));
  const auto res = holder_chain_check(rad, 2.0, 2.0 + 1e-9);
  CHECK(res.pass);
}

TEST_CASE("Holder chain rejects degenerate derivatives") {
  RadialSolution rad;
  rad.dim = 3;
  rad.p = 2.0;
  Profile1D& pr = rad.profile;
  pr.t0 = 0.0;
  pr.t1 = 5.0;
  pr.m = 1;
  pr.phi = make_phi(PhiKind::Laplacian);
  pr.h = allen_cahn();
  pr.u.assign(1, Eigen::VectorXd::Ones(501));
  pr.du.assign(1, Eigen::VectorXd::Zero(501));
  CHECK_THROWS_AS(holder_chain_check(rad, 1.0, 4.0), DegenerateDerivative);
}

TEST_CASE("exponent report serializes to JSON") {
  const auto rep = lower_bound_exponent(2.0, 10);
  const auto j = rep.to_json();
  CHECK(j["regime"] == "logarithmic");
  CHECK(std::abs(double(j["gamma"])) <= 1e-12);
  CHECK(double(j["critical_dimension"]) == 10.0);
}
