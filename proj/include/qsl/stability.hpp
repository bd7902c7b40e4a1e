#ifndef QSL_STABILITY_HPP
#define QSL_STABILITY_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "qsl/grid_field.hpp"
#include "qsl/grid_solver.hpp"
#include "qsl/profile_solver.hpp"
#include "qsl/report.hpp"

namespace qsl {

/// Candidate stability witness: sign-coherent phi = (phi_i) solving the
/// linearized system, with the discrete residual of
///   -div(A(grad u_i) grad phi_i) = sum_j dH_i/du_j phi_j
/// and the coupling positivity margin min over nodes and coupled pairs of
/// dH_i/du_j phi_i phi_j.
struct StabilityCertificate {
  std::vector<Eigen::VectorXd> phi;  // one nodal array per component
  std::vector<int> signs;
  double residual_norm = 0.0;
  double coupling_margin = 0.0;
  int axis = -1;
  std::string source;  // "monotone-derivative" or "eigenfunction"
};

/// Certificate from monotonicity: phi_i = d u_i / d x_axis. Throws
/// NotMonotone when a component's derivative changes sign (beyond `floor`)
/// inside the margin window.
inline StabilityCertificate monotone_certificate(const GridField& f,
                                                 int axis,
                                                 double floor_frac = 1e-8) {
  const auto mr = f.margin_range();
  StabilityCertificate cert;
  cert.axis = axis;
  cert.source = "monotone-derivative";
  cert.phi.resize(f.m);
  cert.signs.assign(f.m, 0);
  for (int c = 0; c < f.m; ++c) cert.phi[c] = f.grad[c][axis];

  double gscale = 0.0;
  for (int c = 0; c < f.m; ++c)
    gscale = std::max(gscale, cert.phi[c].cwiseAbs().maxCoeff());
  const double floor = floor_frac * gscale;
  for (int c = 0; c < f.m; ++c) {
    bool pos = false, neg = false;
    for (int i = mr[0][0]; i <= mr[0][1]; ++i)
      for (int j = mr[1][0]; j <= mr[1][1]; ++j)
        for (int k = mr[2][0]; k <= mr[2][1]; ++k) {
          const double v = cert.phi[c][f.index(i, j, k)];
          if (v > floor) pos = true;
          if (v < -floor) neg = true;
        }
    if (pos && neg)
      throw NotMonotone("component " + std::to_string(c) +
                        " derivative changes sign along axis " +
                        std::to_string(axis));
    if (!pos && !neg)
      throw NotMonotone("component " + std::to_string(c) +
                        " derivative vanishes along axis " +
                        std::to_string(axis));
    cert.signs[c] = pos ? 1 : -1;
  }

  // discrete residual of the linearized system, two nodes inside the margin
  // (the divergence of A grad phi uses nested central differences)
  std::vector<std::array<Eigen::VectorXd, 3>> w(f.m);
  for (int c = 0; c < f.m; ++c) {
    std::array<Eigen::VectorXd, 3> dphi_ax;
    for (int a = 0; a < f.n; ++a)
      dphi_ax[a] = grid_derivative(f, cert.phi[c], a);
    for (int a = 0; a < f.n; ++a) w[c][a] = Eigen::VectorXd(f.total());
    for (std::int64_t id = 0; id < f.total(); ++id) {
      const Eigen::VectorXd g = f.gradient_at(c, id);
      const double s2 = g.squaredNorm();
      const double d1 = f.phi.dphi(s2), d2 = f.phi.ddphi(s2);
      Eigen::VectorXd gp(f.n);
      for (int a = 0; a < f.n; ++a) gp[a] = dphi_ax[a][id];
      const Eigen::VectorXd Av = 2.0 * d2 * g.dot(gp) * g + d1 * gp;
      for (int a = 0; a < f.n; ++a) w[c][a][id] = Av[a];
    }
  }
  double rmax = 0.0, cmargin = 1e300;
  for (int i = mr[0][0] + 2; i <= mr[0][1] - 2; ++i)
    for (int j = mr[1][0] + 2; j <= mr[1][1] - 2; ++j)
      for (int k = (f.n == 3 ? mr[2][0] + 2 : 0);
           k <= (f.n == 3 ? mr[2][1] - 2 : 0); ++k) {
        const std::int64_t id = f.index(i, j, k);
        const Eigen::MatrixXd Jh = f.hnl.jacobian(f.values_at(id));
        for (int c = 0; c < f.m; ++c) {
          double div = 0;
          const std::array<std::int64_t, 3> stride{
              std::int64_t(f.dims[1]) * f.dims[2], f.dims[2], 1};
          for (int a = 0; a < f.n; ++a)
            div += (w[c][a][id + stride[a]] - w[c][a][id - stride[a]]) /
                   (2.0 * f.h);
          double rhs = 0;
          for (int d = 0; d < f.m; ++d) rhs += Jh(c, d) * cert.phi[d][id];
          rmax = std::max(rmax, std::abs(-div - rhs));
          for (int d = 0; d < f.m; ++d)
            if (d != c)
              cmargin = std::min(cmargin,
                                 Jh(c, d) * cert.phi[c][id] * cert.phi[d][id]);
        }
      }
  cert.residual_norm = rmax;
  cert.coupling_margin = f.m >= 2 ? cmargin : 0.0;
  return cert;
}

/// A tuple of test functions, one nodal array per component.
using TestTuple = std::vector<Eigen::VectorXd>;

/// Smooth compactly supported test tuples: random Gaussian bumps and
/// localized spikes under a window vanishing at the margin boundary, plus
/// the geometric substitution zeta_i = |grad u_i| * window.
inline std::vector<TestTuple> make_test_tuples(const GridField& f, int count,
                                               std::uint64_t seed) {
  Rng rng(seed);
  const auto mr = f.margin_range();
  std::array<double, 3> wlo{}, whi{};
  for (int a = 0; a < f.n; ++a) {
    wlo[a] = f.coord(a, mr[a][0]);
    whi[a] = f.coord(a, mr[a][1]);
  }
  Eigen::VectorXd window(f.total());
  for (int i = 0; i < f.dims[0]; ++i)
    for (int j = 0; j < f.dims[1]; ++j)
      for (int k = 0; k < (f.n == 3 ? f.dims[2] : 1); ++k) {
        Eigen::VectorXd x = f.point(i, j, k);
        double w = 1.0;
        for (int a = 0; a < f.n; ++a) {
          const double s = (x[a] - wlo[a]) / (whi[a] - wlo[a]);
          w *= (s <= 0 || s >= 1) ? 0.0 : 16.0 * s * s * (1 - s) * (1 - s);
        }
        window[f.index(i, j, k)] = w;
      }

  std::vector<TestTuple> out;
  for (int t = 0; t < count; ++t) {
    TestTuple tup(f.m, Eigen::VectorXd::Zero(f.total()));
    const int kind = t % 5;
    if (kind == 4) {
      for (int c = 0; c < f.m; ++c)
        for (std::int64_t id = 0; id < f.total(); ++id)
          tup[c][id] = f.gradient_at(c, id).norm() * window[id];
    } else {
      const int nb = kind == 3 ? 1 : 3;
      const double wscale = kind == 3 ? 0.05 : 0.18;
      for (int c = 0; c < f.m; ++c) {
        struct B {
          Eigen::VectorXd x0;
          double s, a;
        };
        std::vector<B> bumps;
        for (int b = 0; b < nb; ++b) {
          B bp;
          bp.x0 = Eigen::VectorXd(f.n);
          for (int a = 0; a < f.n; ++a)
            bp.x0[a] = rng.uniform(wlo[a] + 0.2 * (whi[a] - wlo[a]),
                                   whi[a] - 0.2 * (whi[a] - wlo[a]));
          bp.s = rng.uniform(0.6, 1.4) * wscale * (whi[0] - wlo[0]);
          bp.a = rng.normal();
          bumps.push_back(bp);
        }
        for (int i = 0; i < f.dims[0]; ++i)
          for (int j = 0; j < f.dims[1]; ++j)
            for (int k = 0; k < (f.n == 3 ? f.dims[2] : 1); ++k) {
              const std::int64_t id = f.index(i, j, k);
              if (window[id] == 0) continue;
              Eigen::VectorXd x = f.point(i, j, k);
              double v = 0;
              for (const auto& bp : bumps)
                v += bp.a * std::exp(-(x - bp.x0).squaredNorm() /
                                     (2 * bp.s * bp.s));
              tup[c][id] = v * window[id];
            }
      }
    }
    out.push_back(std::move(tup));
  }
  return out;
}

namespace detail {

/// Coupling matrix of the stability form at a point: signed dH_i/du_i on the
/// diagonal, sqrt(dH_i/du_j * dH_j/du_i) off it. Throws when an off-diagonal
/// product is negative beyond tolerance.
inline Eigen::MatrixXd stability_coupling(const Eigen::MatrixXd& Jh) {
  const int m = static_cast<int>(Jh.rows());
  Eigen::MatrixXd C(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      if (i == j) {
        C(i, j) = Jh(i, j);
      } else {
        const double prod = Jh(i, j) * Jh(j, i);
        if (prod < -1e-12)
          throw NegativeCouplingProduct(
              "dH_i/du_j * dH_j/du_i < 0 on the sampled range");
        C(i, j) = std::sqrt(std::max(prod, 0.0));
      }
    }
  return C;
}

}  // namespace detail

/// Gap of the stability inequality per test tuple:
///   gap(zeta) = sum_i int A(grad u_i) grad zeta_i . grad zeta_i
///             - sum_ij int sqrt(dH_i/du_j dH_j/du_i) zeta_i zeta_j,
/// nonnegative over compactly supported tuples for stable solutions.
struct QuadraticGapResult {
  std::vector<double> gaps;
  double scale = 0.0;
  CheckResult check;
};

inline QuadraticGapResult stability_quadratic_gap(
    const GridField& f, const PhiModel& phi, const Nonlinearity& h,
    const std::vector<TestTuple>& tests, double tol_factor = 1e-8) {
  QuadraticGapResult out;
  const double cellv = std::pow(f.h, f.n);
  // precompute coupling matrices
  std::vector<Eigen::MatrixXd> C(f.total());
  for (std::int64_t id = 0; id < f.total(); ++id)
    C[id] = detail::stability_coupling(h.jacobian(f.values_at(id)));

  double scale = 1e-300;
  for (const auto& tup : tests) {
    double rhs = 0, lhs = 0;
    std::vector<std::array<Eigen::VectorXd, 3>> dz(f.m);
    for (int c = 0; c < f.m; ++c)
      for (int a = 0; a < f.n; ++a)
        dz[c][a] = grid_derivative(f, tup[c], a);
    for (std::int64_t id = 0; id < f.total(); ++id) {
      for (int c = 0; c < f.m; ++c) {
        const Eigen::VectorXd g = f.gradient_at(c, id);
        const double s2 = g.squaredNorm();
        Eigen::VectorXd zg(f.n);
        for (int a = 0; a < f.n; ++a) zg[a] = dz[c][a][id];
        const double gd = g.dot(zg);
        rhs += cellv * (2.0 * phi.ddphi(s2) * gd * gd +
                        phi.dphi(s2) * zg.squaredNorm());
      }
      for (int i = 0; i < f.m; ++i)
        for (int j = 0; j < f.m; ++j)
          lhs += cellv * C[id](i, j) * tup[i][id] * tup[j][id];
    }
    out.gaps.push_back(rhs - lhs);
    scale = std::max({scale, std::abs(rhs), std::abs(lhs)});
  }
  out.scale = scale;
  double worst = 1e300;
  for (double g : out.gaps) worst = std::min(worst, g);
  out.check.name = "stability_gap";
  out.check.kind = "series";
  out.check.series = out.gaps;
  out.check.value = worst;
  out.check.tolerance = tol_factor * scale;
  out.check.pass = worst >= -out.check.tolerance;
  out.check.verifies =
      "stability inequality: coupling-weighted L2 products bounded by the "
      "A-weighted Dirichlet form";
  return out;
}

/// Terms of the level-set (geometric Poincare) inequality in 2D.
struct PoincareResult {
  std::vector<double> gaps;
  double max_curvature_term = 0.0;
  double max_tangential_term = 0.0;
  long excluded_nodes = 0;
  CheckResult check;
};

/// For each test tuple eta, evaluates
///   LHS = sum_{i != j} int [ sqrt(dH_i/du_j dH_j/du_i)|g_i||g_j| eta_i eta_j
///                            - dH_i/du_j g_i.g_j eta_i^2 ]
///       + sum_i int Phi' |g_i|^2 K_i^2 eta_i^2
///       + sum_i int (2 Phi''|g_i|^2 + Phi') |grad_T |g_i||^2 eta_i^2
///   RHS = sum_i int 2|g_i|^2 Phi'' |g_i . grad eta_i|^2
///       + Phi' |g_i|^2 |grad eta_i|^2,
/// restricted to nodes with |g_i| above the floor (K_i is the level-curve
/// curvature div(g_i/|g_i|)).
inline PoincareResult geometric_poincare_gap(const GridField& f,
                                             const PhiModel& phi,
                                             const Nonlinearity& h,
                                             const std::vector<TestTuple>& tests,
                                             double floor_frac = 1e-8,
                                             double tol_factor = 1e-8) {
  if (f.n != 2)
    throw ValidationError("field", "geometric Poincare check is 2D only");
  PoincareResult out;
  const double cellv = f.h * f.h;
  const auto mr = f.margin_range();

  // per component: |g|, grad|g|, curvature, tangential gradient of |g|
  std::vector<Eigen::VectorXd> gnorm(f.m), curv(f.m), tang2(f.m);
  std::vector<std::array<Eigen::VectorXd, 3>> dgnorm(f.m);
  double gscale = 0;
  for (int c = 0; c < f.m; ++c) {
    gnorm[c] = Eigen::VectorXd(f.total());
    for (std::int64_t id = 0; id < f.total(); ++id)
      gnorm[c][id] = f.gradient_at(c, id).norm();
    gscale = std::max(gscale, gnorm[c].maxCoeff());
  }
  const double floor = floor_frac * gscale;
  std::vector<Eigen::VectorXd> mask(f.m, Eigen::VectorXd::Zero(f.total()));
  for (int c = 0; c < f.m; ++c) {
    for (int a = 0; a < f.n; ++a)
      dgnorm[c][a] = grid_derivative(f, gnorm[c], a);
    // unit gradient field (guarded), then curvature = div(unit)
    std::array<Eigen::VectorXd, 3> unit;
    for (int a = 0; a < f.n; ++a) unit[a] = Eigen::VectorXd::Zero(f.total());
    for (std::int64_t id = 0; id < f.total(); ++id) {
      const double gn = gnorm[c][id];
      if (gn >= floor) {
        for (int a = 0; a < f.n; ++a)
          unit[a][id] = f.grad[c][a][id] / gn;
        mask[c][id] = 1.0;
      }
    }
    std::array<Eigen::VectorXd, 3> dunit;
    for (int a = 0; a < f.n; ++a) dunit[a] = grid_derivative(f, unit[a], a);
    curv[c] = Eigen::VectorXd::Zero(f.total());
    tang2[c] = Eigen::VectorXd::Zero(f.total());
    for (std::int64_t id = 0; id < f.total(); ++id) {
      if (mask[c][id] == 0.0) continue;
      double div = 0;
      for (int a = 0; a < f.n; ++a) div += dunit[a][id];
      curv[c][id] = div;
      Eigen::VectorXd dg(f.n), g = f.gradient_at(c, id);
      for (int a = 0; a < f.n; ++a) dg[a] = dgnorm[c][a][id];
      const double gn = gnorm[c][id];
      tang2[c][id] =
          std::max(0.0, dg.squaredNorm() - std::pow(g.dot(dg) / gn, 2));
    }
  }

  // interior mask: curvature stencils need neighbors above floor too
  auto usable = [&](int c, int i, int j) {
    if (i < mr[0][0] + 2 || i > mr[0][1] - 2 || j < mr[1][0] + 2 ||
        j > mr[1][1] - 2)
      return false;
    for (int di = -1; di <= 1; ++di)
      for (int dj = -1; dj <= 1; ++dj)
        if (mask[c][f.index(i + di, j + dj)] == 0.0) return false;
    return true;
  };

  long excluded = 0;
  double scale = 1e-300, worst = 1e300;
  for (const auto& tup : tests) {
    std::vector<std::array<Eigen::VectorXd, 3>> de(f.m);
    for (int c = 0; c < f.m; ++c)
      for (int a = 0; a < f.n; ++a)
        de[c][a] = grid_derivative(f, tup[c], a);
    double lhs_coupling = 0, lhs_curv = 0, lhs_tang = 0, rhs = 0;
    for (int i = mr[0][0]; i <= mr[0][1]; ++i)
      for (int j = mr[1][0]; j <= mr[1][1]; ++j) {
        const std::int64_t id = f.index(i, j);
        const Eigen::MatrixXd Jh = f.hnl.jacobian(f.values_at(id));
        for (int c = 0; c < f.m; ++c) {
          if (!usable(c, i, j)) {
            if (gnorm[c][id] < floor) ++excluded;
            continue;
          }
          const Eigen::VectorXd g = f.gradient_at(c, id);
          const double s2 = g.squaredNorm();
          const double d1 = phi.dphi(s2), d2 = phi.ddphi(s2);
          lhs_curv += cellv * d1 * s2 * curv[c][id] * curv[c][id] *
                      tup[c][id] * tup[c][id];
          lhs_tang += cellv * (2.0 * d2 * s2 + d1) * tang2[c][id] *
                      tup[c][id] * tup[c][id];
          Eigen::VectorXd eg(f.n);
          for (int a = 0; a < f.n; ++a) eg[a] = de[c][a][id];
          const double gd = g.dot(eg);
          rhs += cellv * (2.0 * s2 * d2 * gd * gd + d1 * s2 * eg.squaredNorm());
          for (int d = 0; d < f.m; ++d) {
            if (d == c || !usable(d, i, j)) continue;
            const double prod = Jh(c, d) * Jh(d, c);
            if (prod < -1e-12)
              throw NegativeCouplingProduct("coupling product negative");
            lhs_coupling +=
                cellv * (std::sqrt(std::max(prod, 0.0)) * gnorm[c][id] *
                             gnorm[d][id] * tup[c][id] * tup[d][id] -
                         Jh(c, d) * g.dot(f.gradient_at(d, id)) * tup[c][id] *
                             tup[c][id]);
          }
        }
      }
    const double lhs = lhs_coupling + lhs_curv + lhs_tang;
    out.gaps.push_back(rhs - lhs);
    out.max_curvature_term = std::max(out.max_curvature_term, lhs_curv);
    out.max_tangential_term = std::max(out.max_tangential_term, lhs_tang);
    scale = std::max({scale, std::abs(rhs), std::abs(lhs)});
    worst = std::min(worst, rhs - lhs);
  }
  out.excluded_nodes = excluded;
  out.check.name = "geometric_poincare";
  out.check.kind = "series";
  out.check.series = out.gaps;
  out.check.value = worst;
  out.check.tolerance = tol_factor * scale + 10 * f.h * f.h;
  out.check.pass = worst >= -out.check.tolerance;
  out.check.verifies =
      "level-set Poincare inequality: coupling, curvature and tangential "
      "terms bounded by the weighted gradient of the test tuple";
  return out;
}

/// Quotients sigma_i = (grad u_i . eta) / (d u_i / d x_axis) on nodes where
/// the denominator is above the floor; constancy certifies that the field is
/// one-dimensional. Also evaluates the discrete residual of the quotient
/// divergence identity div(phi_i^2 A grad sigma_i) + coupling = 0.
struct SigmaQuotient {
  int axis = 0;
  Eigen::VectorXd eta;
  double floor = 0.0;
  std::vector<double> variation;   // per component max - min
  std::vector<double> sigma_mean;  // per component
  long excluded_nodes = 0;
  double residual_norm = 0.0;
  CheckResult check;
};

inline SigmaQuotient sigma_constancy(const GridField& f, int axis,
                                     const Eigen::VectorXd& eta,
                                     double floor_frac = 1e-8,
                                     double tol = 1e-6) {
  if (std::abs(eta[axis]) > 1e-14)
    throw ValidationError("eta", "eta must have zero component along axis");
  SigmaQuotient out;
  out.axis = axis;
  out.eta = eta;
  const auto mr = f.margin_range();
  double gscale = 0;
  for (int c = 0; c < f.m; ++c)
    gscale = std::max(gscale, f.grad[c][axis].cwiseAbs().maxCoeff());
  out.floor = floor_frac * gscale;

  std::vector<Eigen::VectorXd> sigma(f.m, Eigen::VectorXd::Zero(f.total()));
  std::vector<Eigen::VectorXd> defined(f.m, Eigen::VectorXd::Zero(f.total()));
  for (int c = 0; c < f.m; ++c) {
    double smin = 1e300, smax = -1e300, ssum = 0;
    long cnt = 0;
    for (int i = mr[0][0]; i <= mr[0][1]; ++i)
      for (int j = mr[1][0]; j <= mr[1][1]; ++j)
        for (int k = (f.n == 3 ? mr[2][0] : 0);
             k <= (f.n == 3 ? mr[2][1] : 0); ++k) {
          const std::int64_t id = f.index(i, j, k);
          const double ph = f.grad[c][axis][id];
          if (std::abs(ph) < out.floor) {
            ++out.excluded_nodes;
            continue;
          }
          double num = 0;
          for (int a = 0; a < f.n; ++a) num += f.grad[c][a][id] * eta[a];
          const double s = num / ph;
          sigma[c][id] = s;
          defined[c][id] = 1.0;
          smin = std::min(smin, s);
          smax = std::max(smax, s);
          ssum += s;
          ++cnt;
        }
    if (cnt == 0)
      throw NotMonotone("denominator below floor everywhere for component " +
                        std::to_string(c));
    out.variation.push_back(smax - smin);
    out.sigma_mean.push_back(ssum / cnt);
  }

  // residual of div(phi^2 A grad sigma) + sum_j dH_i/du_j phi_i phi_j
  // (sigma_j - sigma_i) sigma_i at nodes whose full stencil is defined
  double rmax = 0;
  std::vector<std::array<Eigen::VectorXd, 3>> w(f.m);
  for (int c = 0; c < f.m; ++c) {
    std::array<Eigen::VectorXd, 3> ds;
    for (int a = 0; a < f.n; ++a) ds[a] = grid_derivative(f, sigma[c], a);
    for (int a = 0; a < f.n; ++a) w[c][a] = Eigen::VectorXd::Zero(f.total());
    for (std::int64_t id = 0; id < f.total(); ++id) {
      if (defined[c][id] == 0.0) continue;
      const Eigen::VectorXd g = f.gradient_at(c, id);
      const double s2 = g.squaredNorm();
      const double d1 = f.phi.dphi(s2), d2 = f.phi.ddphi(s2);
      Eigen::VectorXd sg(f.n);
      for (int a = 0; a < f.n; ++a) sg[a] = ds[a][id];
      const double ph = f.grad[c][axis][id];
      const Eigen::VectorXd Av =
          ph * ph * (2.0 * d2 * g.dot(sg) * g + d1 * sg);
      for (int a = 0; a < f.n; ++a) w[c][a][id] = Av[a];
    }
  }
  const std::array<std::int64_t, 3> stride{std::int64_t(f.dims[1]) * f.dims[2],
                                           f.dims[2], 1};
  for (int i = mr[0][0] + 2; i <= mr[0][1] - 2; ++i)
    for (int j = mr[1][0] + 2; j <= mr[1][1] - 2; ++j)
      for (int k = (f.n == 3 ? mr[2][0] + 2 : 0);
           k <= (f.n == 3 ? mr[2][1] - 2 : 0); ++k) {
        const std::int64_t id = f.index(i, j, k);
        bool ok = true;
        for (int c = 0; c < f.m && ok; ++c) {
          for (int a = 0; a < f.n && ok; ++a)
            if (defined[c][id + stride[a]] == 0.0 ||
                defined[c][id - stride[a]] == 0.0)
              ok = false;
          if (defined[c][id] == 0.0) ok = false;
        }
        if (!ok) continue;
        const Eigen::MatrixXd Jh = f.hnl.jacobian(f.values_at(id));
        for (int c = 0; c < f.m; ++c) {
          double div = 0;
          for (int a = 0; a < f.n; ++a)
            div += (w[c][a][id + stride[a]] - w[c][a][id - stride[a]]) /
                   (2.0 * f.h);
          double coup = 0;
          const double ph_c = f.grad[c][axis][id];
          for (int d = 0; d < f.m; ++d)
            coup += Jh(c, d) * ph_c * f.grad[d][axis][id] *
                    (sigma[d][id] - sigma[c][id]) * sigma[c][id];
          rmax = std::max(rmax, std::abs(div + coup));
        }
      }
  out.residual_norm = rmax;

  double worst = 0;
  for (double v : out.variation) worst = std::max(worst, v);
  out.check.name = "sigma_constancy";
  out.check.kind = "series";
  out.check.series = out.variation;
  out.check.value = worst;
  out.check.tolerance = tol;
  out.check.pass = worst <= tol;
  out.check.verifies =
      "constancy of the directional-derivative quotients sigma_i certifies "
      "one-dimensional symmetry";
  return out;
}

/// Angle statistics between grad u_i and grad u_j against the coupling-sign
/// law: angle = 0 for positive coupling, pi for negative.
struct AngleResult {
  double theta_star = 0.0;
  double max_deviation = 0.0;
  double mean_angle = 0.0;
  long used_nodes = 0;
  long excluded_nodes = 0;
  CheckResult check;
};

inline AngleResult gradient_angle(const GridField& f, int ci, int cj,
                                  const Nonlinearity& h,
                                  double floor_frac = 1e-8, double tol = 1e-3) {
  if (f.m < 2) throw ValidationError("field", "gradient_angle needs m >= 2");
  const auto mr = f.margin_range();
  double gscale = 0;
  for (int c : {ci, cj})
    for (int a = 0; a < f.n; ++a)
      gscale = std::max(gscale, f.grad[c][a].cwiseAbs().maxCoeff());
  const double floor = floor_frac * gscale;

  AngleResult out;
  int sign = 0;
  double dev = 0, sum = 0;
  for (int i = mr[0][0]; i <= mr[0][1]; ++i)
    for (int j = mr[1][0]; j <= mr[1][1]; ++j)
      for (int k = (f.n == 3 ? mr[2][0] : 0); k <= (f.n == 3 ? mr[2][1] : 0);
           ++k) {
        const std::int64_t id = f.index(i, j, k);
        const Eigen::VectorXd gi = f.gradient_at(ci, id);
        const Eigen::VectorXd gj = f.gradient_at(cj, id);
        if (gi.norm() < floor || gj.norm() < floor) {
          ++out.excluded_nodes;
          continue;
        }
        const double coup = h.jacobian(f.values_at(id))(ci, cj);
        if (std::abs(coup) < 1e-12) {
          ++out.excluded_nodes;
          continue;
        }
        const int s = coup > 0 ? 1 : -1;
        if (sign == 0) sign = s;
        if (s != sign)
          throw CouplingSignIndeterminate(
              "coupling sign changes on the sampled range");
        const double c =
            std::clamp(gi.dot(gj) / (gi.norm() * gj.norm()), -1.0, 1.0);
        const double th = std::acos(c);
        const double ts = sign > 0 ? 0.0 : M_PI;
        dev = std::max(dev, std::abs(th - ts));
        sum += th;
        ++out.used_nodes;
      }
  if (sign == 0)
    throw CouplingSignIndeterminate("coupling vanishes on the sampled range");
  if (out.used_nodes == 0)
    throw GradientFloorViolation("no nodes above the gradient floor");
  out.theta_star = sign > 0 ? 0.0 : M_PI;
  out.max_deviation = dev;
  out.mean_angle = sum / out.used_nodes;
  out.check.name = "gradient_angle";
  out.check.value = dev;
  out.check.tolerance = tol;
  out.check.pass = dev <= tol;
  out.check.verifies =
      "gradient-angle law: angle between component gradients equals "
      "arccos(sign of the coupling)";
  return out;
}

/// Radial stability inequality gap per test function, with quadrature weight
/// r^(n-1) and the full surface measure of the unit sphere:
///   (n-1) sum_i int |u_i'|^p / r^2 phi^2 <= (p-1) sum_i int |u_i'|^p phi'^2
///     + sum_ij int (dH_i/du_j - sqrt(dH_i/du_j dH_j/du_i)) u_i' u_j' phi^2.
struct RadialGapResult {
  std::vector<double> gaps;
  double chain_lhs = 0.0;   // int_r^R ds / (s^(n-1) sum |u'|^p)
  double chain_rhs = 0.0;   // C_{n,m,p} r^(-2 sqrt((n-1)/(p-1)))
  bool chain_checked = false;
  CheckResult check;
};

/// The decaying test function used to plumb the radial inequality: 1 on
/// [0,1], t^(-q) with q = sqrt((n-1)/(p-1)) on [1,r], then proportional to
/// int_t^R dz/(z^(n-1) sum|u'|^p) on [r,R], 0 beyond.
inline Eigen::VectorXd radial_paper_test(const RadialSolution& rad, double r,
                                         double R) {
  const Profile1D& pr = rad.profile;
  const int np = pr.nodes();
  const double h = pr.spacing();
  const double q = std::sqrt((rad.dim - 1.0) / (rad.p - 1.0));
  // cumulative D(t) = int_t^R dz/(z^(n-1) sum|u'|^p), trapezoid
  Eigen::VectorXd integrand(np);
  for (int k = 0; k < np; ++k) {
    const double z = pr.t(k);
    double sp = 0;
    for (int c = 0; c < pr.m; ++c)
      sp += std::pow(std::abs(pr.du[c][k]), rad.p);
    integrand[k] =
        (z > 1e-12 && sp > 1e-300) ? 1.0 / (std::pow(z, rad.dim - 1) * sp) : 0.0;
  }
  Eigen::VectorXd D = Eigen::VectorXd::Zero(np);
  for (int k = np - 2; k >= 0; --k) {
    const double z1 = pr.t(k + 1);
    if (z1 > R) {
      D[k] = D[k + 1];
      continue;
    }
    D[k] = D[k + 1] + 0.5 * h * (integrand[k] + integrand[k + 1]);
  }
  auto Dat = [&](double t) {
    const int k = std::clamp(int((t - pr.t0) / h), 0, np - 2);
    const double x = (t - pr.t(k)) / h;
    return (1 - x) * D[k] + x * D[k + 1];
  };
  const double Dr = Dat(r);
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(np);
  for (int k = 0; k < np; ++k) {
    const double t = pr.t(k);
    if (t <= 1.0)
      phi[k] = 1.0;
    else if (t <= r)
      phi[k] = std::pow(t, -q);
    else if (t <= R && Dr > 0)
      phi[k] = std::pow(r, -q) * Dat(t) / Dr;
  }
  return phi;
}

inline RadialGapResult radial_stability_gap(
    const RadialSolution& rad, const Nonlinearity& h,
    const std::vector<Eigen::VectorXd>& tests, double tol_factor = 1e-8) {
  const Profile1D& pr = rad.profile;
  const int np = pr.nodes();
  const double hr = pr.spacing();
  const int n = rad.dim;
  const double p = rad.p;
  const double omega =
      2.0 * std::pow(M_PI, n / 2.0) / std::tgamma(n / 2.0);

  Eigen::VectorXd up(np);  // sum_i |u_i'|^p per node (per component below)
  RadialGapResult out;
  double scale = 1e-300, worst = 1e300;
  for (const auto& phi_t : tests) {
    if (phi_t.size() != np)
      throw ValidationError("tests", "test function size mismatch");
    const Eigen::VectorXd dphi = derivative_on_nodes(phi_t, hr, 5);
    double lhs = 0, rhs1 = 0, tail = 0;
    for (int k = 0; k < np; ++k) {
      const double rr = pr.t(k);
      const double wk = (k == 0 || k == np - 1 ? 0.5 : 1.0) * hr *
                        std::pow(rr, n - 1) * omega;
      if (rr <= 1e-12) continue;
      double spp = 0;
      for (int c = 0; c < pr.m; ++c)
        spp += std::pow(std::abs(pr.du[c][k]), p);
      lhs += wk * (n - 1.0) * spp / (rr * rr) * phi_t[k] * phi_t[k];
      rhs1 += wk * (p - 1.0) * spp * dphi[k] * dphi[k];
      const Eigen::MatrixXd Jh = h.jacobian(pr.values_at(k));
      for (int i = 0; i < pr.m; ++i)
        for (int j = 0; j < pr.m; ++j) {
          const double prod = Jh(i, j) * Jh(j, i);
          const double sq = std::sqrt(std::max(prod, 0.0));
          tail += wk * (Jh(i, j) - sq) * pr.du[i][k] * pr.du[j][k] *
                  phi_t[k] * phi_t[k];
        }
    }
    const double gap = rhs1 + tail - lhs;
    out.gaps.push_back(gap);
    scale = std::max({scale, lhs, std::abs(rhs1 + tail)});
    worst = std::min(worst, gap);
  }
  out.check.name = "radial_stability_gap";
  out.check.kind = "series";
  out.check.series = out.gaps;
  out.check.value = worst;
  out.check.tolerance = tol_factor * scale + 1e-12;
  out.check.pass = worst >= -out.check.tolerance;
  out.check.verifies =
      "radial stability inequality with weight r^(n-1) and Hardy-type "
      "left-hand side";
  return out;
}

/// Chain bound from the radial inequality evaluated on the decaying test
/// function: int_r^R ds/(s^(n-1) sum|u'|^p) <= C_{n,m,p} r^(-2q) with
/// C = (p-1) / ((n-1) int_0^1 sum|u'|^p t^(n-3) dt), q = sqrt((n-1)/(p-1)).
inline RadialGapResult radial_chain_bound(const RadialSolution& rad,
                                          const Nonlinearity& h, double r,
                                          double R) {
  RadialGapResult out =
      radial_stability_gap(rad, h, {radial_paper_test(rad, r, R)});
  const Profile1D& pr = rad.profile;
  const int np = pr.nodes();
  const double hr = pr.spacing();
  const int n = rad.dim;
  const double p = rad.p;
  double denom = 0, chain_lhs = 0;
  for (int k = 0; k < np; ++k) {
    const double t = pr.t(k);
    double sp = 0;
    for (int c = 0; c < pr.m; ++c)
      sp += std::pow(std::abs(pr.du[c][k]), p);
    const double w = (k == 0 || k == np - 1 ? 0.5 : 1.0) * hr;
    if (t > 1e-12 && t <= 1.0) denom += w * sp * std::pow(t, n - 3.0);
    if (t >= r && t <= R && sp > 1e-300)
      chain_lhs += w / (std::pow(t, n - 1.0) * sp);
  }
  const double q = std::sqrt((n - 1.0) / (p - 1.0));
  out.chain_lhs = chain_lhs;
  out.chain_rhs = denom > 0
                      ? (p - 1.0) / ((n - 1.0) * denom) * std::pow(r, -2.0 * q)
                      : std::numeric_limits<double>::infinity();
  out.chain_checked = true;
  return out;
}

/// Shift-inverted power iteration for the smallest eigenvalue of the pencil
/// (Q, M) with Q symmetric sparse and M diagonal positive.
struct EigenResult {
  double lambda = 0.0;
  Eigen::VectorXd vector;
  int iterations = 0;
};

namespace detail {

/// Smallest eigenvalue of the pencil (Q, M), Q symmetric sparse, M diagonal
/// positive. LDLT inertia bisection brackets lambda_min (the negative count
/// of D equals the number of pencil eigenvalues below the shift), then
/// shift-inverted iteration from just below the bracket polishes the pair.
inline EigenResult smallest_pencil_eigenvalue(
    const Eigen::SparseMatrix<double>& Q, const Eigen::VectorXd& Mdiag,
    std::uint64_t seed = 7) {
  const auto nn = Q.rows();
  if (nn == 0) throw LinearAlgebraFailure("empty eigenproblem");
  Eigen::VectorXd rowabs = Eigen::VectorXd::Zero(nn);
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(nn);
  for (int k = 0; k < Q.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(Q, k); it; ++it) {
      if (it.row() == it.col())
        diag[it.row()] += it.value();
      else
        rowabs[it.row()] += std::abs(it.value());
    }
  double lo = 1e300, hi = -1e300;
  for (Eigen::Index i = 0; i < nn; ++i) {
    lo = std::min(lo, (diag[i] - rowabs[i]) / Mdiag[i]);
    hi = std::max(hi, (diag[i] + rowabs[i]) / Mdiag[i]);
  }
  const double span = hi - lo;

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  auto shifted = [&](double sigma) {
    Eigen::SparseMatrix<double> A = Q;
    for (Eigen::Index i = 0; i < nn; ++i)
      A.coeffRef(i, i) -= sigma * Mdiag[i];
    A.makeCompressed();
    return A;
  };
  auto count_below = [&](double sigma) -> long {
    ldlt.compute(shifted(sigma));
    if (ldlt.info() != Eigen::Success) return -1;  // shift too close
    long neg = 0;
    const Eigen::VectorXd D = ldlt.vectorD();
    for (Eigen::Index i = 0; i < nn; ++i)
      if (D[i] < 0) ++neg;
    return neg;
  };

  EigenResult out;
  double a = lo - 1e-12 * span - 1e-300, b = hi;
  for (int it = 0; it < 60 && (b - a) > 1e-14 * std::max(1.0, std::abs(a));
       ++it) {
    double mid = 0.5 * (a + b);
    long cnt = count_below(mid);
    ++out.iterations;
    if (cnt < 0) {  // factorization hit an eigenvalue; nudge the shift
      mid += 1e-12 * std::max(1.0, std::abs(mid)) * (it % 2 ? 1 : -1);
      cnt = count_below(mid);
      if (cnt < 0) break;
    }
    if (cnt == 0)
      a = mid;
    else
      b = mid;
  }

  // eigenvector: inverse iteration from just below the bracket
  const double sigma = a - 1e-10 * std::max(1.0, std::abs(a));
  ldlt.compute(shifted(sigma));
  Rng rng(seed);
  Eigen::VectorXd v(nn);
  for (Eigen::Index i = 0; i < nn; ++i) v[i] = rng.normal();
  v /= v.norm();
  double lambda = 0.5 * (a + b);
  if (ldlt.info() == Eigen::Success) {
    double prev = 1e300;
    for (int it = 0; it < 50; ++it) {
      Eigen::VectorXd w = ldlt.solve((Mdiag.array() * v.array()).matrix());
      const double wn = w.norm();
      if (!(wn > 0) || !std::isfinite(wn)) break;
      w /= wn;
      v = w;
      const double qf = v.dot(Q * v);
      const double mf = v.dot((Mdiag.array() * v.array()).matrix().eval());
      lambda = qf / mf;
      if (std::abs(lambda - prev) < 1e-14 * std::max(1.0, std::abs(lambda)))
        break;
      prev = lambda;
    }
  }
  // keep the bisection value if the polish drifted above the bracket
  if (lambda > b + 1e-9 * std::max(1.0, std::abs(b)) || !std::isfinite(lambda))
    lambda = 0.5 * (a + b);
  out.lambda = lambda;
  out.vector = v;
  return out;
}

}  // namespace detail

/// Smallest eigenvalue of the stability quadratic form of a profile,
///   Q(zeta) = sum_i int (Phi' + 2 u_i'^2 Phi'') zeta_i'^2
///           - sum_ij int C_ij zeta_i zeta_j,   M = identity mass,
/// assembled with the same conservative stencils as the solver (symmetrized)
/// so the translation zero mode of heteroclinics is preserved.
inline EigenResult smallest_eigenvalue(const Profile1D& pr,
                                       int stencil_width = 6) {
  const int np = pr.nodes();
  const int N = np - 1;
  const int m = pr.m;
  const double h = pr.spacing();
  const StaggeredStencils st(N, h, stencil_width);
  std::vector<Eigen::Triplet<double>> trip;
  for (int c = 0; c < m; ++c) {
    // face coefficients from the solution
    Eigen::VectorXd coef(N);
    for (int f = 0; f < N; ++f) {
      const auto& row = st.grad[f];
      double g = 0;
      for (std::size_t i = 0; i < row.w.size(); ++i)
        g += row.w[i] * pr.u[c][row.start + i];
      const double s = g * g;
      coef[f] = pr.phi.dphi(s) + 2.0 * s * pr.phi.ddphi(s);
    }
    for (int k = 1; k < N; ++k) {
      const auto& drow = st.div[k - 1];
      for (std::size_t fi = 0; fi < drow.w.size(); ++fi) {
        const int f = drow.start + static_cast<int>(fi);
        const auto& grow = st.grad[f];
        for (std::size_t ni = 0; ni < grow.w.size(); ++ni) {
          const int node = grow.start + static_cast<int>(ni);
          if (node >= 1 && node <= N - 1)
            trip.emplace_back((k - 1) * m + c, (node - 1) * m + c,
                              -drow.w[fi] * coef[f] * grow.w[ni]);
        }
      }
    }
  }
  for (int k = 1; k < N; ++k) {
    const Eigen::MatrixXd C =
        detail::stability_coupling(pr.h.jacobian(pr.values_at(k)));
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        trip.emplace_back((k - 1) * m + i, (k - 1) * m + j, -C(i, j));
  }
  Eigen::SparseMatrix<double> K(m * (N - 1), m * (N - 1));
  K.setFromTriplets(trip.begin(), trip.end());
  Eigen::SparseMatrix<double> Q = 0.5 * (Eigen::SparseMatrix<double>(K.transpose()) + K);
  const Eigen::VectorXd M = Eigen::VectorXd::Ones(m * (N - 1));
  return detail::smallest_pencil_eigenvalue(Q, M);
}

/// Smallest eigenvalue for a grid field. Planar fields reduce to the
/// generating profile (the transverse eigenproblem carries the stability
/// content; box truncation would shift the translation mode by (pi/L)^2).
/// Other fields use the full Dirichlet form built from the solver's faces.
inline EigenResult smallest_eigenvalue(const GridField& f) {
  if (f.provenance == Provenance::PlanarFromProfile && f.source_profile)
    return smallest_eigenvalue(*f.source_profile);
  const auto faces = detail::build_faces(f);
  const double face_w = std::pow(f.h, f.n) / f.n;
  const double node_w = std::pow(f.h, f.n);
  const int m = f.m;
  std::vector<std::int64_t> unknown_of(f.total(), -1);
  std::vector<std::int64_t> node_of;
  for (int i = 1; i < f.dims[0] - 1; ++i)
    for (int j = 1; j < f.dims[1] - 1; ++j)
      for (int k = (f.n == 3 ? 1 : 0); k <= (f.n == 3 ? f.dims[2] - 2 : 0);
           ++k) {
        unknown_of[f.index(i, j, k)] = static_cast<std::int64_t>(node_of.size());
        node_of.push_back(f.index(i, j, k));
      }
  const std::int64_t nu = static_cast<std::int64_t>(node_of.size());
  std::vector<Eigen::Triplet<double>> trip;
  for (const auto& fc : faces)
    for (int c = 0; c < m; ++c) {
      double g[3] = {0, 0, 0};
      for (const auto& e : fc.entries)
        for (int a = 0; a < f.n; ++a) g[a] += e.w[a] * f.value[c][e.node];
      double s2 = 0;
      for (int a = 0; a < f.n; ++a) s2 += g[a] * g[a];
      const double d1 = f.phi.dphi(s2), d2 = f.phi.ddphi(s2);
      for (const auto& ea : fc.entries) {
        const std::int64_t qa = unknown_of[ea.node];
        if (qa < 0) continue;
        double ga = 0;
        for (int a = 0; a < f.n; ++a) ga += g[a] * ea.w[a];
        for (const auto& eb : fc.entries) {
          const std::int64_t qb = unknown_of[eb.node];
          if (qb < 0) continue;
          double gb = 0, dot = 0;
          for (int a = 0; a < f.n; ++a) {
            gb += g[a] * eb.w[a];
            dot += ea.w[a] * eb.w[a];
          }
          trip.emplace_back(qa * m + c, qb * m + c,
                            face_w * (2.0 * d2 * ga * gb + d1 * dot));
        }
      }
    }
  for (std::int64_t q = 0; q < nu; ++q) {
    const Eigen::MatrixXd C =
        detail::stability_coupling(f.hnl.jacobian(f.values_at(node_of[q])));
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        trip.emplace_back(q * m + i, q * m + j, -node_w * C(i, j));
  }
  Eigen::SparseMatrix<double> Q(nu * m, nu * m);
  Q.setFromTriplets(trip.begin(), trip.end());
  const Eigen::VectorXd M = Eigen::VectorXd::Constant(nu * m, node_w);
  return detail::smallest_pencil_eigenvalue(Q, M);
}

/// Smallest eigenvalue of the radial stability form with weight r^(n-1):
///   Q(zeta) = sum_i int (Phi' + 2 u'^2 Phi'') zeta_i'^2 r^(n-1)
///           - sum_ij int C_ij zeta_i zeta_j r^(n-1).
inline EigenResult smallest_eigenvalue(const RadialSolution& rad) {
  const Profile1D& pr = rad.profile;
  const int np = pr.nodes();
  const int N = np - 1;
  const int m = pr.m;
  const double h = pr.spacing();
  std::vector<Eigen::Triplet<double>> trip;
  // 2-point faces with shell-area weights (outer node Dirichlet; inner free)
  auto unknown = [&](int k) { return k < N ? k : -1; };
  for (int c = 0; c < m; ++c)
    for (int fidx = 0; fidx < N; ++fidx) {
      const double rf = pr.t0 + h * (fidx + 0.5);
      const double g = (pr.u[c][fidx + 1] - pr.u[c][fidx]) / h;
      const double s = g * g;
      const double coef = (pr.phi.dphi(s) + 2.0 * s * pr.phi.ddphi(s)) *
                          std::pow(rf, rad.dim - 1) * h;
      const int ka = unknown(fidx), kb = unknown(fidx + 1);
      const double wa = -1.0 / h, wb = 1.0 / h;
      if (ka >= 0) trip.emplace_back(ka * m + c, ka * m + c, coef * wa * wa);
      if (kb >= 0) trip.emplace_back(kb * m + c, kb * m + c, coef * wb * wb);
      if (ka >= 0 && kb >= 0) {
        trip.emplace_back(ka * m + c, kb * m + c, coef * wa * wb);
        trip.emplace_back(kb * m + c, ka * m + c, coef * wa * wb);
      }
    }
  Eigen::VectorXd M(N * m);
  for (int k = 0; k < N; ++k) {
    const double r = pr.t(k);
    const double w = std::max(std::pow(r, rad.dim - 1) * h, 1e-14);
    const Eigen::MatrixXd C =
        detail::stability_coupling(pr.h.jacobian(pr.values_at(k)));
    for (int i = 0; i < m; ++i) {
      M[k * m + i] = w;
      for (int j = 0; j < m; ++j)
        trip.emplace_back(k * m + i, k * m + j, -w * C(i, j));
    }
  }
  Eigen::SparseMatrix<double> Q(N * m, N * m);
  Q.setFromTriplets(trip.begin(), trip.end());
  return detail::smallest_pencil_eigenvalue(Q, M);
}

}  // namespace qsl

#endif  // QSL_STABILITY_HPP
