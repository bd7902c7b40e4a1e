#include <catch2/catch_amalgamated.hpp>

#include <cstdio>

#include "qsl/grid_solver.hpp"
#include "qsl/profile_solver.hpp"

using namespace qsl;

namespace {

Profile1D tanh_profile(int N = 768) {
  return solve_profile(make_phi(PhiKind::Laplacian), allen_cahn(), 20.0, N,
                       {-1.0}, {1.0});
}

Eigen::VectorXd unit2(double ang) {
  Eigen::VectorXd a(2);
  a << std::cos(ang), std::sin(ang);
  return a;
}

}  // namespace

TEST_CASE("axis-aligned planar field has no transverse dependence") {
  const auto prof = tanh_profile();
  const auto f = planar_field(prof, unit2(0.0), {-8, -8, 0}, {8, 8, 0}, 0.25);
  double worst = 0;
  for (int i = 0; i < f.dims[0]; ++i)
    for (int j = 0; j < f.dims[1]; ++j)
      worst = std::max(worst, std::abs(f.grad[0][1][f.index(i, j)]));
  CHECK(worst == 0.0);
}

TEST_CASE("oblique planar field obeys the chain rule") {
  const auto prof = tanh_profile();
  const auto a = unit2(M_PI / 4);
  const auto f = planar_field(prof, a, {-8, -8, 0}, {8, 8, 0}, 0.125);
  double worst = 0;
  for (std::int64_t id = 0; id < f.total(); ++id) {
    const Eigen::VectorXd g = f.gradient_at(0, id);
    // |grad u| should equal |u*'(a.x)| sampled through the interpolant
    const double diff = std::abs(g.norm() - std::abs(g.dot(a)));
    worst = std::max(worst, diff);
  }
  CHECK(worst < 1e-12);  // gradient stored as a * u*'
  // and central differences of the values reproduce the stored gradient
  GridField fc = f;
  rebuild_gradients(fc);
  double gerr = 0;
  const auto mr = f.margin_range();
  for (int i = mr[0][0]; i <= mr[0][1]; ++i)
    for (int j = mr[1][0]; j <= mr[1][1]; ++j)
      gerr = std::max(gerr, (fc.gradient_at(0, f.index(i, j)) -
                             f.gradient_at(0, f.index(i, j)))
                                .cwiseAbs()
                                .maxCoeff());
  CHECK(gerr < 5.0 * f.h * f.h);
}

TEST_CASE("constant profile gives constant field with zero gradient") {
  const auto prof =
      solve_profile(make_phi(PhiKind::Laplacian), allen_cahn(), 20.0, 128,
                    {1.0}, {1.0}, {.seed = SeedPolicy::Linear});
  const auto f = planar_field(prof, unit2(0.3), {-5, -5, 0}, {5, 5, 0}, 0.25);
  for (std::int64_t id = 0; id < f.total(); ++id) {
    CHECK(std::abs(f.value[0][id] - 1.0) < 1e-12);
    CHECK(f.gradient_at(0, id).norm() < 1e-12);
  }
}

TEST_CASE("box projecting outside the profile domain is rejected") {
  const auto prof = tanh_profile(128);
  CHECK_THROWS_AS(
      planar_field(prof, unit2(M_PI / 4), {-18, -18, 0}, {18, 18, 0}, 0.5),
      DomainTooSmall);
  Eigen::VectorXd bad(2);
  bad << 1.0, 1.0;  // not unit
  CHECK_THROWS_AS(planar_field(prof, bad, {-5, -5, 0}, {5, 5, 0}, 0.5),
                  ValidationError);
}

TEST_CASE("perturb: amplitude 0 is the identity, fixed seed is bitwise stable") {
  const auto prof = tanh_profile(256);
  const auto f = planar_field(prof, unit2(0.5), {-6, -6, 0}, {6, 6, 0}, 0.25);
  const auto f0 = perturb(f, 0.0, 42);
  for (std::int64_t id = 0; id < f.total(); ++id)
    CHECK(f0.value[0][id] == f.value[0][id]);
  const auto p1 = perturb(f, 0.1, 42);
  const auto p2 = perturb(f, 0.1, 42);
  bool identical = true;
  for (std::int64_t id = 0; id < f.total(); ++id)
    identical = identical && p1.value[0][id] == p2.value[0][id] &&
                p1.grad[0][0][id] == p2.grad[0][0][id];
  CHECK(identical);
  CHECK(p1.provenance == Provenance::Perturbed);
  const auto p3 = perturb(f, 0.1, 43);
  bool differs = false;
  for (std::int64_t id = 0; id < f.total() && !differs; ++id)
    differs = p1.value[0][id] != p3.value[0][id];
  CHECK(differs);
}

TEST_CASE("perturbation breaks the PDE residual detectably") {
  const auto prof = tanh_profile();
  const auto f =
      planar_field(prof, unit2(M_PI / 6), {-8, -8, 0}, {8, 8, 0}, 0.125);
  const Eigen::VectorXd r0 = box_residual(f);
  const auto p = perturb(f, 0.1, 7);
  const Eigen::VectorXd r1 = box_residual(p);
  CHECK(r0.lpNorm<Eigen::Infinity>() < 5e-2);
  CHECK(r1.lpNorm<Eigen::Infinity>() >= 1e-3);
  CHECK(r1.lpNorm<Eigen::Infinity>() > 5.0 * r0.lpNorm<Eigen::Infinity>());
}

TEST_CASE("planar fields of all three families satisfy the discrete PDE") {
  for (auto phi : {make_phi(PhiKind::Laplacian), make_phi(PhiKind::MeanCurvature),
                   make_phi(PhiKind::PLaplacian, 3.0, 0.0)}) {
    const auto prof = solve_profile(phi, allen_cahn(), 20.0, 1024, {-1.0}, {1.0});
    const auto f =
        planar_field(prof, unit2(M_PI / 6), {-8, -8, 0}, {8, 8, 0}, 0.125);
    const Eigen::VectorXd r = box_residual(f);
    CHECK(r.lpNorm<Eigen::Infinity>() <
          50.0 * (f.h * f.h + prof.residual_norm));
  }
}

TEST_CASE("solve_box reproduces planar Dirichlet data") {
  const auto prof = tanh_profile();
  const auto a = unit2(M_PI / 6);
  const double h = 0.2;
  const auto exact = planar_field(prof, a, {-8, -8, 0}, {8, 8, 0}, h);
  const auto sol = solve_box(make_phi(PhiKind::Laplacian), allen_cahn(), 2,
                             {-8, -8, 0}, {8, 8, 0}, h, planar_trace(prof, a));
  CHECK(sol.residual_norm <= 1e-8);
  double diff = 0;
  for (std::int64_t id = 0; id < sol.total(); ++id)
    diff = std::max(diff, std::abs(sol.value[0][id] - exact.value[0][id]));
  CHECK(diff <= 10.0 * h * h);
}

TEST_CASE("solve_box with equilibrium data returns the constant field") {
  auto bc = [](const Eigen::VectorXd&) {
    return Eigen::VectorXd::Constant(1, 1.0);
  };
  const auto sol = solve_box(make_phi(PhiKind::MeanCurvature), allen_cahn(), 2,
                             {-4, -4, 0}, {4, 4, 0}, 0.25, bc);
  for (std::int64_t id = 0; id < sol.total(); ++id)
    CHECK(std::abs(sol.value[0][id] - 1.0) < 1e-9);
}

TEST_CASE("3D planar field satisfies the discrete PDE") {
  const auto prof = tanh_profile(512);
  Eigen::VectorXd a(3);
  a << std::sqrt(0.5), 0.5, 0.5;
  const auto f = planar_field(prof, a, {-4, -4, -4}, {4, 4, 4}, 0.25);
  CHECK(f.n == 3);
  const Eigen::VectorXd r = box_residual(f);
  CHECK(r.lpNorm<Eigen::Infinity>() < 50.0 * (f.h * f.h + prof.residual_norm));
}

TEST_CASE("binary round trip preserves geometry and payload") {
  const auto prof = tanh_profile(256);
  const auto f = planar_field(prof, unit2(1.0), {-6, -6, 0}, {6, 6, 0}, 0.25);
  write_field("test_field_io", f);
  const auto g = read_field("test_field_io");
  CHECK(g.n == f.n);
  CHECK(g.m == f.m);
  CHECK(g.dims == f.dims);
  CHECK(g.h == f.h);
  bool same = true;
  for (std::int64_t id = 0; id < f.total(); ++id) {
    same = same && g.value[0][id] == f.value[0][id];
    for (int ax = 0; ax < f.n; ++ax)
      same = same && g.grad[0][ax][id] == f.grad[0][ax][id];
  }
  CHECK(same);
  std::remove("test_field_io.qfb");
  std::remove("test_field_io.json");
}
