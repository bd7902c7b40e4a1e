#ifndef QSL_PROFILE_SOLVER_HPP
#define QSL_PROFILE_SOLVER_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "qsl/errors.hpp"
#include "qsl/profile.hpp"

namespace qsl {

enum class SeedPolicy { Tanh, Linear, Custom };

struct ProfileSolveOptions {
  int stencil_width = 6;          // interior order of the conservative scheme
  double tol = 1e-10;             // residual infinity-norm target
  int max_iterations = 200;
  SeedPolicy seed = SeedPolicy::Tanh;
  std::function<Eigen::VectorXd(double)> custom_seed;
  bool allow_regularization = true;
  double regularization_epsilon = 0.0;  // 0 = auto (1e-8 profile, 1e-10 radial)
  double dt0 = 0.1;                      // pseudo-transient initial step
  double dt_max = 1e4;
};

namespace detail {

/// Pseudo-transient damped Newton on a sparse system. The shift I/dt keeps
/// iterates away from near-null directions (heteroclinic translation) and
/// doubles as globalization; dt grows on success, shrinks on rejection.
inline void ptc_newton(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& residual,
    const std::function<Eigen::SparseMatrix<double>(const Eigen::VectorXd&)>&
        jacobian,
    Eigen::VectorXd& x, double tol, int max_iterations, double dt0,
    double dt_max, double* out_res, int* out_iters) {
  double dt = dt0;
  Eigen::VectorXd r = residual(x);
  double rn = r.lpNorm<Eigen::Infinity>();
  int it = 0;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  for (; it < max_iterations && rn > tol; ++it) {
    Eigen::SparseMatrix<double> J = jacobian(x);
    bool accepted = false;
    for (int attempt = 0; attempt < 28; ++attempt) {
      Eigen::SparseMatrix<double> A = J;
      Eigen::VectorXd diag_shift =
          Eigen::VectorXd::Constant(J.rows(), 1.0 / dt);
      for (int i = 0; i < A.rows(); ++i) A.coeffRef(i, i) += 1.0 / dt;
      A.makeCompressed();
      lu.compute(A);
      if (lu.info() != Eigen::Success) {
        dt *= 0.25;
        if (dt < 1e-12)
          throw SingularJacobian("Newton matrix not factorizable");
        continue;
      }
      Eigen::VectorXd dx = lu.solve(-r);
      Eigen::VectorXd x2 = x + dx;
      Eigen::VectorXd r2 = residual(x2);
      const double rn2 = r2.lpNorm<Eigen::Infinity>();
      if (std::isfinite(rn2) && rn2 < rn) {
        x = std::move(x2);
        r = std::move(r2);
        rn = rn2;
        dt = std::min(dt * 2.0, dt_max);
        accepted = true;
        break;
      }
      dt *= 0.25;
      if (dt < 1e-12) break;
    }
    if (!accepted) break;
  }
  if (out_res) *out_res = rn;
  if (out_iters) *out_iters = it;
  if (rn > tol) throw NonConvergence(it, rn);
}

}  // namespace detail

/// Solves -(Phi'(|u_i'|^2) u_i')' = H_i(u) on [-L, L] with per-component
/// Dirichlet data, as a conservative flux-difference scheme (both the face
/// gradient and the flux divergence use `stencil_width`-point stencils).
/// Degenerate p-Laplacian models are solved by epsilon-continuation down to
/// `regularization_epsilon`; the profile records the epsilon actually used.
inline Profile1D solve_profile(const PhiModel& phi_in, const Nonlinearity& h,
                               double L, int N,
                               const std::vector<double>& bc_lo,
                               const std::vector<double>& bc_hi,
                               const ProfileSolveOptions& opts = {}) {
  if (!(L > 0)) throw ValidationError("domain", "L must be positive");
  if (N < 64) throw ValidationError("N", "need at least 64 intervals");
  const int m = h.m;
  if (static_cast<int>(bc_lo.size()) != m ||
      static_cast<int>(bc_hi.size()) != m)
    throw ValidationError("bc", "boundary data must have one pair per component");
  for (int c = 0; c < m; ++c)
    if (!std::isfinite(bc_lo[c]) || !std::isfinite(bc_hi[c]))
      throw ValidationError("bc", "boundary data must be finite");

  const double h_grid = 2.0 * L / N;
  const StaggeredStencils st(N, h_grid, opts.stencil_width);

  // epsilon-continuation schedule for degenerate models
  std::vector<double> eps_schedule;
  PhiModel phi = phi_in;
  if (phi_in.kind == PhiKind::PLaplacian && phi_in.degenerate_at_zero() &&
      opts.allow_regularization) {
    const double eps_target = opts.regularization_epsilon > 0
                                  ? opts.regularization_epsilon
                                  : 1e-8;
    double e = 1.0;
    while (e > eps_target * 1.0001) {
      eps_schedule.push_back(e);
      e *= 1e-2;
    }
    eps_schedule.push_back(eps_target);
    phi = make_phi(PhiKind::PLaplacian, phi_in.p, eps_schedule.back());
  } else {
    eps_schedule.push_back(phi_in.epsilon);
  }

  // seed
  const int np = N + 1;
  Eigen::VectorXd x(m * (N - 1));
  auto node_value = [&](int c, double t) {
    switch (opts.seed) {
      case SeedPolicy::Tanh: {
        const double w = 0.5 * (1.0 + std::tanh(t / std::sqrt(2.0)));
        return bc_lo[c] + (bc_hi[c] - bc_lo[c]) * w;
      }
      case SeedPolicy::Custom:
        return opts.custom_seed(t)[c];
      default:
        return bc_lo[c] + (bc_hi[c] - bc_lo[c]) * (t + L) / (2.0 * L);
    }
  };
  for (int k = 1; k < N; ++k)
    for (int c = 0; c < m; ++c)
      x[(k - 1) * m + c] = node_value(c, -L + h_grid * k);

  // full node array (with boundary values) for a given unknown vector
  auto fill_nodes = [&](const Eigen::VectorXd& xv,
                        std::vector<Eigen::VectorXd>& uc) {
    uc.assign(m, Eigen::VectorXd(np));
    for (int c = 0; c < m; ++c) {
      uc[c][0] = bc_lo[c];
      uc[c][N] = bc_hi[c];
      for (int k = 1; k < N; ++k) uc[c][k] = xv[(k - 1) * m + c];
    }
  };

  double res_norm = 0.0;
  int iters_total = 0;
  const PhiModel* phi_cur = &phi;
  PhiModel phi_stage;

  auto residual = [&](const Eigen::VectorXd& xv) {
    std::vector<Eigen::VectorXd> uc;
    fill_nodes(xv, uc);
    Eigen::VectorXd r(m * (N - 1));
    std::vector<Eigen::VectorXd> flux(m, Eigen::VectorXd(N));
    for (int c = 0; c < m; ++c)
      for (int f = 0; f < N; ++f) {
        const auto& row = st.grad[f];
        double g = 0.0;
        for (std::size_t i = 0; i < row.w.size(); ++i)
          g += row.w[i] * uc[c][row.start + i];
        flux[c][f] = phi_cur->dphi(g * g) * g;
      }
    Eigen::VectorXd uval(m);
    for (int k = 1; k < N; ++k) {
      for (int c = 0; c < m; ++c) uval[c] = uc[c][k];
      const Eigen::VectorXd Hv = h.H(uval);
      const auto& row = st.div[k - 1];
      for (int c = 0; c < m; ++c) {
        double dv = 0.0;
        for (std::size_t i = 0; i < row.w.size(); ++i)
          dv += row.w[i] * flux[c][row.start + i];
        r[(k - 1) * m + c] = -dv - Hv[c];
      }
    }
    return r;
  };

  auto jacobian = [&](const Eigen::VectorXd& xv) {
    std::vector<Eigen::VectorXd> uc;
    fill_nodes(xv, uc);
    std::vector<Eigen::VectorXd> dflux(m, Eigen::VectorXd(N));
    for (int c = 0; c < m; ++c)
      for (int f = 0; f < N; ++f) {
        const auto& row = st.grad[f];
        double g = 0.0;
        for (std::size_t i = 0; i < row.w.size(); ++i)
          g += row.w[i] * uc[c][row.start + i];
        const double s = g * g;
        dflux[c][f] = phi_cur->dphi(s) + 2.0 * s * phi_cur->ddphi(s);
      }
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(m) * (N - 1) * 16);
    Eigen::VectorXd uval(m);
    for (int k = 1; k < N; ++k) {
      const auto& drow = st.div[k - 1];
      for (int c = 0; c < m; ++c) {
        const int rix = (k - 1) * m + c;
        for (std::size_t fi = 0; fi < drow.w.size(); ++fi) {
          const int f = drow.start + static_cast<int>(fi);
          const auto& grow = st.grad[f];
          for (std::size_t ni = 0; ni < grow.w.size(); ++ni) {
            const int node = grow.start + static_cast<int>(ni);
            if (node >= 1 && node <= N - 1)
              trip.emplace_back(rix, (node - 1) * m + c,
                                -drow.w[fi] * dflux[c][f] * grow.w[ni]);
          }
        }
      }
      for (int c = 0; c < m; ++c) uval[c] = uc[c][k];
      const Eigen::MatrixXd Jh = h.jacobian(uval);
      for (int c = 0; c < m; ++c)
        for (int d = 0; d < m; ++d)
          trip.emplace_back((k - 1) * m + c, (k - 1) * m + d, -Jh(c, d));
    }
    Eigen::SparseMatrix<double> J(m * (N - 1), m * (N - 1));
    J.setFromTriplets(trip.begin(), trip.end());
    return J;
  };

  for (std::size_t stage = 0; stage < eps_schedule.size(); ++stage) {
    if (eps_schedule.size() > 1) {
      phi_stage = make_phi(PhiKind::PLaplacian, phi_in.p, eps_schedule[stage]);
      phi_cur = &phi_stage;
    } else {
      phi_cur = &phi;
    }
    const double stage_tol =
        (stage + 1 == eps_schedule.size()) ? opts.tol : 1e-8;
    int it = 0;
    detail::ptc_newton(residual, jacobian, x, stage_tol, opts.max_iterations,
                       opts.dt0, opts.dt_max, &res_norm, &it);
    iters_total += it;
  }

  Profile1D prof;
  prof.t0 = -L;
  prof.t1 = L;
  prof.m = m;
  prof.phi = *phi_cur;
  prof.h = h;
  prof.bc_lo = bc_lo;
  prof.bc_hi = bc_hi;
  prof.residual_norm = res_norm;
  prof.newton_iterations = iters_total;
  prof.epsilon_applied = eps_schedule.back();
  fill_nodes(x, prof.u);
  prof.du.resize(m);
  for (int c = 0; c < m; ++c)
    prof.du[c] = derivative_on_nodes(prof.u[c], h_grid, 7);
  return prof;
}

/// Solution of the radial system on [r_min, R] in ambient dimension n.
struct RadialSolution {
  Profile1D profile;  // variable r
  int dim = 3;
  double p = 2.0;
  double r_min = 0.0;
};

/// Solves the radial form of the system,
///   -(r^(n-1) Phi'(|u_i'|^2) u_i')' / r^(n-1) = H_i(u),
/// which for the p-Laplacian is
///   -|u_i'|^(p-2) ((p-1) u_i'' + (n-1)/r u_i') = H_i(u),
/// by a finite-volume scheme with exact shell areas/volumes. The inner
/// boundary condition is u'(r_min) = 0 (vanishing flux; for r_min = 0 this
/// is the symmetric-origin cell), the outer is Dirichlet at R.
inline RadialSolution solve_radial(const PhiModel& phi_in,
                                   const Nonlinearity& h, int n, double r_min,
                                   double R, const std::vector<double>& bc_R,
                                   int N,
                                   const ProfileSolveOptions& opts_in = {}) {
  if (n < 2) throw ValidationError("n", "radial solver needs dimension >= 2");
  if (!(R > r_min) || r_min < 0.0)
    throw ValidationError("domain", "require 0 <= r_min < R");
  if (N < 64) throw ValidationError("N", "need at least 64 intervals");
  const int m = h.m;
  if (static_cast<int>(bc_R.size()) != m)
    throw ValidationError("bc", "need one Dirichlet value per component");

  ProfileSolveOptions opts = opts_in;
  std::vector<double> eps_schedule;
  if (phi_in.kind == PhiKind::PLaplacian && phi_in.degenerate_at_zero()) {
    if (!opts.allow_regularization)
      throw DegenerateGradient(
          "degenerate p-Laplacian radial solve requires regularization");
    const double eps_target = opts.regularization_epsilon > 0
                                  ? opts.regularization_epsilon
                                  : 1e-10;
    double e = 1.0;
    while (e > eps_target * 1.0001) {
      eps_schedule.push_back(e);
      e *= 1e-2;
    }
    eps_schedule.push_back(eps_target);
  } else {
    eps_schedule.push_back(phi_in.epsilon);
  }
  PhiModel phi = eps_schedule.size() > 1
                     ? make_phi(PhiKind::PLaplacian, phi_in.p,
                                eps_schedule.front())
                     : phi_in;
  const double eps_applied = eps_schedule.back();

  const double hr = (R - r_min) / N;
  const int nu = N;  // unknown nodes 0..N-1 (node N Dirichlet)
  auto rnode = [&](int k) { return r_min + hr * k; };
  auto rface = [&](int f) { return r_min + hr * (f + 0.5); };
  // shell area r^(n-1) at faces, cell volumes (r+^n - r-^n)/n
  std::vector<double> area(N), vol(N);
  for (int f = 0; f < N; ++f) area[f] = std::pow(rface(f), n - 1);
  for (int k = 0; k < N; ++k) {
    const double rp = rface(k);
    const double rm = k == 0 ? r_min : rface(k - 1);
    vol[k] = (std::pow(rp, n) - std::pow(rm, n)) / n;
  }

  Eigen::VectorXd x(m * nu);
  for (int k = 0; k < nu; ++k)
    for (int c = 0; c < m; ++c) x[k * m + c] = bc_R[c];

  auto value = [&](const Eigen::VectorXd& xv, int c, int k) {
    return k == N ? bc_R[c] : xv[k * m + c];
  };

  auto residual = [&](const Eigen::VectorXd& xv) {
    Eigen::VectorXd r(m * nu);
    Eigen::VectorXd uval(m);
    for (int k = 0; k < nu; ++k) {
      for (int c = 0; c < m; ++c) uval[c] = value(xv, c, k);
      const Eigen::VectorXd Hv = h.H(uval);
      for (int c = 0; c < m; ++c) {
        const double gp = (value(xv, c, k + 1) - value(xv, c, k)) / hr;
        const double Fp = phi.dphi(gp * gp) * gp;
        double Fm = 0.0, Am = 0.0;
        if (k > 0) {
          const double gm = (value(xv, c, k) - value(xv, c, k - 1)) / hr;
          Fm = phi.dphi(gm * gm) * gm;
          Am = area[k - 1];
        }
        r[k * m + c] = -(area[k] * Fp - Am * Fm) / vol[k] - Hv[c];
      }
    }
    return r;
  };

  auto jacobian = [&](const Eigen::VectorXd& xv) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(m) * nu * (3 + m));
    Eigen::VectorXd uval(m);
    for (int k = 0; k < nu; ++k) {
      for (int c = 0; c < m; ++c) uval[c] = value(xv, c, k);
      const Eigen::MatrixXd Jh = h.jacobian(uval);
      for (int c = 0; c < m; ++c) {
        const int rix = k * m + c;
        const double gp = (value(xv, c, k + 1) - value(xv, c, k)) / hr;
        const double cp = phi.dphi(gp * gp) + 2.0 * gp * gp * phi.ddphi(gp * gp);
        // d/du_k and d/du_{k+1} of -(A+ F+)/V
        trip.emplace_back(rix, rix, area[k] * cp / (hr * vol[k]));
        if (k + 1 < N)
          trip.emplace_back(rix, (k + 1) * m + c,
                            -area[k] * cp / (hr * vol[k]));
        if (k > 0) {
          const double gm = (value(xv, c, k) - value(xv, c, k - 1)) / hr;
          const double cm =
              phi.dphi(gm * gm) + 2.0 * gm * gm * phi.ddphi(gm * gm);
          trip.emplace_back(rix, rix, area[k - 1] * cm / (hr * vol[k]));
          trip.emplace_back(rix, (k - 1) * m + c,
                            -area[k - 1] * cm / (hr * vol[k]));
        }
        for (int d = 0; d < m; ++d)
          trip.emplace_back(rix, k * m + d, -Jh(c, d));
      }
    }
    Eigen::SparseMatrix<double> J(m * nu, m * nu);
    J.setFromTriplets(trip.begin(), trip.end());
    return J;
  };

  double res_norm = 0.0;
  int iters = 0;
  const double tol = opts.tol > 0 ? std::min(opts.tol, 1e-8) : 1e-8;
  for (std::size_t stage = 0; stage < eps_schedule.size(); ++stage) {
    if (eps_schedule.size() > 1)
      phi = make_phi(PhiKind::PLaplacian, phi_in.p, eps_schedule[stage]);
    const double stage_tol =
        (stage + 1 == eps_schedule.size()) ? tol : 1e-7;
    int it = 0;
    detail::ptc_newton(residual, jacobian, x, stage_tol, opts.max_iterations,
                       opts.dt0, opts.dt_max, &res_norm, &it);
    iters += it;
  }

  RadialSolution rad;
  rad.dim = n;
  rad.p = phi_in.kind == PhiKind::PLaplacian ? phi_in.p : 2.0;
  rad.r_min = r_min;
  Profile1D& prof = rad.profile;
  prof.t0 = r_min;
  prof.t1 = R;
  prof.m = m;
  prof.phi = phi;
  prof.h = h;
  prof.bc_lo.assign(m, 0.0);
  prof.bc_hi = bc_R;
  prof.residual_norm = res_norm;
  prof.newton_iterations = iters;
  prof.epsilon_applied = eps_applied;
  prof.u.assign(m, Eigen::VectorXd(N + 1));
  for (int c = 0; c < m; ++c) {
    for (int k = 0; k < N; ++k) prof.u[c][k] = x[k * m + c];
    prof.u[c][N] = bc_R[c];
  }
  prof.du.resize(m);
  for (int c = 0; c < m; ++c)
    prof.du[c] = derivative_on_nodes(prof.u[c], hr, 5);
  return rad;
}

}  // namespace qsl

#endif  // QSL_PROFILE_SOLVER_HPP
