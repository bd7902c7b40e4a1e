#include <catch2/catch_amalgamated.hpp>

#include <fstream>

#include "qsl/profile_solver.hpp"

using namespace qsl;

namespace {

Nonlinearity constant_source(double value) {
  Nonlinearity h;
  h.m = 1;
  h.name = "constant_source";
  h.H = [value](const Eigen::VectorXd&) {
    return Eigen::VectorXd::Constant(1, value);
  };
  h.jacobian = [](const Eigen::VectorXd&) {
    return Eigen::MatrixXd::Zero(1, 1);
  };
  h.antiderivative = [value](const Eigen::VectorXd& u) { return value * u[0]; };
  return h;
}

}  // namespace

TEST_CASE("Allen-Cahn heteroclinic matches tanh(t/sqrt(2))") {
  const auto prof = solve_profile(make_phi(PhiKind::Laplacian), allen_cahn(),
                                  20.0, 1024, {-1.0}, {1.0});
  CHECK(prof.residual_norm <= 1e-10);
  double err = 0;
  for (int k = 0; k < prof.nodes(); ++k)
    err = std::max(err,
                   std::abs(prof.u[0][k] - std::tanh(prof.t(k) / std::sqrt(2.0))));
  CHECK(err < 1e-6);
  const auto deficit = first_integral_deficit(prof);
  CHECK(deficit.lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("grid convergence of the heteroclinic is at least 8x per halving") {
  auto err_at = [](int N) {
    const auto prof = solve_profile(make_phi(PhiKind::Laplacian), allen_cahn(),
                                    20.0, N, {-1.0}, {1.0});
    double err = 0;
    for (int k = 0; k < prof.nodes(); ++k)
      err = std::max(
          err, std::abs(prof.u[0][k] - std::tanh(prof.t(k) / std::sqrt(2.0))));
    return err;
  };
  const double e1 = err_at(256), e2 = err_at(512);
  CHECK(e1 / e2 >= 8.0);
}

TEST_CASE("constant equilibrium data gives the constant profile") {
  for (auto phi : {make_phi(PhiKind::Laplacian), make_phi(PhiKind::MeanCurvature)}) {
    const auto prof =
        solve_profile(phi, allen_cahn(), 10.0, 128, {1.0}, {1.0},
                      {.seed = SeedPolicy::Linear});
    for (int k = 0; k < prof.nodes(); ++k)
      CHECK(std::abs(prof.u[0][k] - 1.0) < 1e-12);
    const auto deficit = first_integral_deficit(prof);
    CHECK(deficit.cwiseAbs().maxCoeff() <= 1e-20);  // float-exact constant
  }
}

TEST_CASE("first-integral conservation holds for all three families") {
  const std::vector<PhiModel> phis = {make_phi(PhiKind::Laplacian),
                                      make_phi(PhiKind::MeanCurvature),
                                      make_phi(PhiKind::PLaplacian, 3.0, 0.0)};
  for (const auto& phi : phis) {
    const auto prof =
        solve_profile(phi, allen_cahn(), 20.0, 1024, {-1.0}, {1.0});
    const double h4 = std::pow(prof.spacing(), 4);
    const auto deficit = first_integral_deficit(prof);
    CHECK(deficit.lpNorm<Eigen::Infinity>() <= 100.0 * (1e-10 + h4));
  }
}

TEST_CASE("degenerate p-Laplacian profile is monotone and regularized") {
  const auto prof = solve_profile(make_phi(PhiKind::PLaplacian, 3.0, 0.0),
                                  allen_cahn(), 20.0, 1024, {-1.0}, {1.0});
  CHECK(prof.epsilon_applied > 0.0);
  CHECK(prof.epsilon_applied <= 1e-8);
  for (int k = 0; k + 1 < prof.nodes(); ++k)
    CHECK(prof.u[0][k + 1] - prof.u[0][k] >= -1e-7);
}

TEST_CASE("m=2 coupled wall at beta=3 reproduces its closed form") {
  // u = ((1-T)/2, (1+T)/2), T = tanh(t/sqrt 2): exact segregated wall
  const auto prof = solve_profile(make_phi(PhiKind::Laplacian),
                                  coupled_pair(3.0), 20.0, 1024, {1.0, 0.0},
                                  {0.0, 1.0});
  double err = 0;
  for (int k = 0; k < prof.nodes(); ++k) {
    const double T = std::tanh(prof.t(k) / std::sqrt(2.0));
    err = std::max(err, std::abs(prof.u[0][k] - 0.5 * (1 - T)));
    err = std::max(err, std::abs(prof.u[1][k] - 0.5 * (1 + T)));
  }
  CHECK(err < 1e-9);
  const auto deficit = first_integral_deficit(prof);
  CHECK(deficit.lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("perturbed profiles violate the first integral detectably") {
  auto prof = solve_profile(make_phi(PhiKind::Laplacian), allen_cahn(), 20.0,
                            512, {-1.0}, {1.0});
  for (int k = 0; k < prof.nodes(); ++k) {
    const double t = prof.t(k);
    prof.u[0][k] += 0.1 * std::exp(-t * t);
  }
  prof.du[0] = derivative_on_nodes(prof.u[0], prof.spacing(), 7);
  const auto deficit = first_integral_deficit(prof);
  CHECK(deficit.lpNorm<Eigen::Infinity>() >= 1e-2);
}

TEST_CASE("missing antiderivative is reported") {
  Nonlinearity h;
  h.m = 1;
  h.name = "no_antiderivative";
  h.H = [](const Eigen::VectorXd& u) { return (-u).eval(); };
  h.jacobian = [](const Eigen::VectorXd&) {
    return (-Eigen::MatrixXd::Identity(1, 1)).eval();
  };
  const auto prof = solve_profile(make_phi(PhiKind::Laplacian), h, 5.0, 128,
                                  {0.0}, {0.0}, {.seed = SeedPolicy::Linear});
  CHECK_THROWS_AS(first_integral_deficit(prof), MissingAntiderivative);
}

TEST_CASE("input validation") {
  const auto lap = make_phi(PhiKind::Laplacian);
  CHECK_THROWS_AS(solve_profile(lap, allen_cahn(), -1.0, 128, {0.0}, {0.0}),
                  ValidationError);
  CHECK_THROWS_AS(solve_profile(lap, allen_cahn(), 1.0, 16, {0.0}, {0.0}),
                  ValidationError);
  CHECK_THROWS_AS(solve_profile(lap, allen_cahn(), 1.0, 128, {0.0, 1.0}, {0.0}),
                  ValidationError);
}

TEST_CASE("radial: zero source gives the constant solution") {
  Nonlinearity h = constant_source(0.0);
  const auto rad = solve_radial(make_phi(PhiKind::Laplacian), h, 3, 0.0, 5.0,
                                {2.5}, 128);
  for (int k = 0; k < rad.profile.nodes(); ++k)
    CHECK(std::abs(rad.profile.u[0][k] - 2.5) < 1e-12);
}

TEST_CASE("radial: -Laplace u = 1 in 3D has the parabolic solution") {
  const double R = 4.0;
  const auto rad = solve_radial(make_phi(PhiKind::Laplacian),
                                constant_source(1.0), 3, 0.0, R, {0.0}, 256);
  double err = 0;
  for (int k = 0; k < rad.profile.nodes(); ++k) {
    const double r = rad.profile.t(k);
    err = std::max(err, std::abs(rad.profile.u[0][k] - (R * R - r * r) / 6.0));
  }
  CHECK(err <= 1e-8);
  CHECK(rad.profile.residual_norm <= 1e-8);
}

TEST_CASE("radial Ginzburg-Landau system converges") {
  const auto rad = solve_radial(make_phi(PhiKind::Laplacian),
                                ginzburg_landau(2), 3, 0.0, 8.0, {0.8, -0.6},
                                256);
  CHECK(rad.profile.residual_norm <= 1e-8);
  CHECK(rad.profile.m == 2);
}

TEST_CASE("radial degenerate p-Laplacian is regularized with report") {
  const auto rad = solve_radial(make_phi(PhiKind::PLaplacian, 3.0, 0.0),
                                constant_source(1.0), 3, 0.0, 2.0, {0.0}, 128);
  CHECK(rad.profile.epsilon_applied == Catch::Approx(1e-10));
  CHECK(rad.profile.residual_norm <= 1e-8);
}

TEST_CASE("profile CSV serialization") {
  const auto prof = solve_profile(make_phi(PhiKind::Laplacian), allen_cahn(),
                                  5.0, 64, {1.0}, {1.0},
                                  {.seed = SeedPolicy::Linear});
  const std::string path = "test_profile.csv";
  write_profile_csv(path, prof);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "t,u_1,du_1");
  std::string first;
  std::getline(in, first);
  CHECK(first.substr(0, 3) == "-5,");
  int rows = 2;
  std::string line;
  while (std::getline(in, line)) ++rows;
  CHECK(rows - 1 == prof.nodes());
}
