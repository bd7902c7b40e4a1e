#include <catch2/catch_amalgamated.hpp>

#include "qsl/phi_model.hpp"

using namespace qsl;

TEST_CASE("built-in models evaluate in closed form") {
  const auto lap = make_phi(PhiKind::Laplacian);
  CHECK(lap(4.0) == 4.0);
  CHECK(lap.dphi(4.0) == 1.0);
  CHECK(lap.ddphi(4.0) == 0.0);

  const auto mc = make_phi(PhiKind::MeanCurvature);
  CHECK(mc(3.0) == Catch::Approx(2.0).epsilon(1e-15));
  CHECK(mc.dphi(3.0) == Catch::Approx(0.5).epsilon(1e-15));

  const auto p2 = make_phi(PhiKind::PLaplacian, 2.0, 0.0);
  for (double s : logspace(1e-6, 1e6, 25)) {
    CHECK(p2(s) == Catch::Approx(lap(s)).epsilon(1e-14));
    CHECK(p2.dphi(s) == Catch::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(make_phi(PhiKind::PLaplacian, 1.0, 0.0), ValidationError);
  CHECK_THROWS_AS(make_phi(PhiKind::PLaplacian, 0.5, 0.0), ValidationError);
  CHECK_THROWS_AS(make_phi(PhiKind::PLaplacian, 3.0, -1.0), ValidationError);
}

TEST_CASE("standing positivity and derivative consistency") {
  for (auto phi : {make_phi(PhiKind::Laplacian), make_phi(PhiKind::MeanCurvature),
                   make_phi(PhiKind::PLaplacian, 3.0, 0.0),
                   make_phi(PhiKind::PLaplacian, 1.5, 0.1)}) {
    CHECK_NOTHROW(phi.validate());
    for (double s : logspace(1e-8, 1e8, 100))
      CHECK(phi.a_parallel(s) > 0.0);
  }
}

TEST_CASE("diffusion matrix matches its closed form") {
  const auto lap = make_phi(PhiKind::Laplacian);
  Eigen::VectorXd eta(3);
  eta << 0.3, -1.2, 2.0;
  const auto A = diffusion_matrix(lap, eta);
  CHECK((A.a - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-15);

  const auto p3 = make_phi(PhiKind::PLaplacian, 3.0, 0.0);
  Eigen::VectorXd e1(2);
  e1 << 1.0, 0.0;
  const auto A3 = diffusion_matrix(p3, e1);
  CHECK(A3.a(0, 0) == Catch::Approx(2.0).epsilon(1e-14));
  CHECK(A3.a(1, 1) == Catch::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(A3.a(0, 1)) < 1e-15);

  const auto mc = make_phi(PhiKind::MeanCurvature);
  const auto A0 = diffusion_matrix(mc, Eigen::VectorXd::Zero(2));
  CHECK((A0.a - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("quadratic form expansion and positive definiteness") {
  Rng rng(11);
  for (auto phi : {make_phi(PhiKind::MeanCurvature),
                   make_phi(PhiKind::PLaplacian, 3.0, 0.0),
                   make_phi(PhiKind::PLaplacian, 1.5, 0.2)}) {
    for (int t = 0; t < 50; ++t) {
      Eigen::VectorXd eta(3), zeta(3);
      for (int i = 0; i < 3; ++i) {
        eta[i] = rng.normal();
        zeta[i] = rng.normal();
      }
      eta *= std::pow(10.0, rng.uniform(-3, 3));
      const auto A = diffusion_matrix(phi, eta);
      const double s = eta.squaredNorm();
      const double expect = 2.0 * phi.ddphi(s) * std::pow(eta.dot(zeta), 2) +
                            phi.dphi(s) * zeta.squaredNorm();
      CHECK(A.quadratic_form(zeta) ==
            Catch::Approx(expect).epsilon(1e-12).margin(1e-300));
      CHECK(A.smallest_eigenvalue() > 0.0);
    }
  }
}

TEST_CASE("degenerate gradient handling") {
  const auto p15 = make_phi(PhiKind::PLaplacian, 1.5, 0.0);
  CHECK_THROWS_AS(diffusion_matrix(p15, Eigen::VectorXd::Zero(2)),
                  DegenerateGradient);
}

TEST_CASE("alpha* closed-form values for the built-in families") {
  const auto grid = default_alpha_grid(100000);
  CHECK(alpha_star(make_phi(PhiKind::Laplacian), grid) ==
        Catch::Approx(2.0).margin(1e-6));
  CHECK(alpha_star(make_phi(PhiKind::MeanCurvature), grid) ==
        Catch::Approx(2.0).margin(1e-6));
  for (double p : {1.5, 3.0, 4.0})
    CHECK(alpha_star(make_phi(PhiKind::PLaplacian, p, 0.0), grid) ==
          Catch::Approx(p).margin(1e-6));
}

TEST_CASE("alpha* is monotone under grid refinement") {
  const auto mc = make_phi(PhiKind::MeanCurvature);
  double prev = -1e300;
  for (int npts : {100, 1000, 10000}) {
    // nested grids: the refined grid contains the coarse points
    auto grid = logspace(1e-8, 1e8, 100);
    auto extra = logspace(1e-8, 1e8, npts);
    grid.insert(grid.end(), extra.begin(), extra.end());
    const double a = alpha_star(mc, grid);
    CHECK(a >= prev - 1e-15);
    prev = a;
  }
}

TEST_CASE("alpha* of the regularized p-Laplacian is reported, not p") {
  const auto grid = default_alpha_grid(50000);
  const double a = alpha_star(make_phi(PhiKind::PLaplacian, 3.0, 0.5), grid);
  CHECK(a > 2.0);
  CHECK(a < 3.0);  // epsilon > 0 pulls the supremum below p for p > 2
  const double a0 = alpha_star(make_phi(PhiKind::PLaplacian, 3.0, 0.0), grid);
  CHECK(a0 == Catch::Approx(3.0).margin(1e-6));
}

TEST_CASE("alpha* rejects bad grids") {
  const auto lap = make_phi(PhiKind::Laplacian);
  CHECK_THROWS_AS(alpha_star(lap, std::vector<double>{}), ValidationError);
  CHECK_THROWS_AS(alpha_star(lap, std::vector<double>{-1.0}), ValidationError);
}

TEST_CASE("structural growth conditions") {
  const auto repA = check_conditions_AB(make_phi(PhiKind::MeanCurvature), 500);
  CHECK(repA.condition == 'A');
  CHECK(repA.satisfied);
  CHECK(repA.c1 > 0.0);
  CHECK(std::isfinite(repA.c2));

  const auto repB = check_conditions_AB(make_phi(PhiKind::PLaplacian, 3.0, 0.1), 500);
  CHECK(repB.condition == 'B');
  CHECK(repB.satisfied);

  const auto repL = check_conditions_AB(make_phi(PhiKind::Laplacian), 500);
  CHECK(repL.condition == 'B');
  CHECK(repL.p == 2.0);
  CHECK(repL.c1 == Catch::Approx(1.0).margin(1e-12));
  CHECK(repL.c2 == Catch::Approx(1.0).margin(1e-12));

  CHECK_THROWS_AS(check_conditions_AB(make_phi(PhiKind::Laplacian), 10),
                  ValidationError);
}
