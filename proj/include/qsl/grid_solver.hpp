#ifndef QSL_GRID_SOLVER_HPP
#define QSL_GRID_SOLVER_HPP

#include <array>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "qsl/grid_field.hpp"
#include "qsl/profile_solver.hpp"

namespace qsl {

using BoundaryTrace = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Dirichlet trace of the planar extension of a profile.
inline BoundaryTrace planar_trace(const Profile1D& prof,
                                  const Eigen::VectorXd& direction) {
  return [prof, direction](const Eigen::VectorXd& x) {
    const double s = direction.dot(x);
    Eigen::VectorXd v(prof.m);
    for (int c = 0; c < prof.m; ++c) v[c] = prof.eval(c, s);
    return v;
  };
}

/// Planar trace bent by a transverse wave: u*(a.x + amp sin(freq b.x)) with
/// b orthogonal to a. A genuinely non-one-dimensional Dirichlet datum.
inline BoundaryTrace wavy_trace(const Profile1D& prof,
                                const Eigen::VectorXd& direction, double amp,
                                double freq) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(direction.size());
  b[0] = -direction[1];
  b[1] = direction[0];  // rotate within the first two axes
  return [prof, direction, b, amp, freq](const Eigen::VectorXd& x) {
    const double s = direction.dot(x) + amp * std::sin(freq * b.dot(x));
    Eigen::VectorXd v(prof.m);
    for (int c = 0; c < prof.m; ++c)
      v[c] = prof.eval(c, std::clamp(s, prof.t0, prof.t1));
    return v;
  };
}

struct BoxSolveOptions {
  double tol = 1e-8;
  int max_iterations = 120;
  double dt0 = 0.5;
  double dt_max = 1e4;
};

namespace detail {

/// Face stencil entry: flattened node id with an n-vector weight; the face
/// gradient is g = sum_e w_e u[node_e].
struct FaceEntry {
  std::int64_t node;
  std::array<double, 3> w;
};

struct Face {
  std::vector<FaceEntry> entries;
};

/// Enumerates all faces of the grid with midpoint gradients: exact
/// difference along the face normal, averaged central differences (one-sided
/// at walls) along the tangential axes.
inline std::vector<Face> build_faces(const GridField& g) {
  std::vector<Face> faces;
  const std::array<std::int64_t, 3> stride{
      std::int64_t(g.dims[1]) * g.dims[2], g.dims[2], 1};
  std::array<int, 3> iv{0, 0, 0};
  for (int axis = 0; axis < g.n; ++axis) {
    std::array<int, 3> cnt = g.dims;
    cnt[axis] -= 1;
    for (iv[0] = 0; iv[0] < cnt[0]; ++iv[0])
      for (iv[1] = 0; iv[1] < cnt[1]; ++iv[1])
        for (iv[2] = 0; iv[2] < (g.n == 3 ? cnt[2] : 1); ++iv[2]) {
          Face f;
          const std::int64_t a = g.index(iv[0], iv[1], iv[2]);
          const std::int64_t b = a + stride[axis];
          auto add = [&](std::int64_t node, int ax, double w) {
            for (auto& e : f.entries)
              if (e.node == node) {
                e.w[ax] += w;
                return;
              }
            FaceEntry e{node, {0, 0, 0}};
            e.w[ax] = w;
            f.entries.push_back(e);
          };
          add(b, axis, 1.0 / g.h);
          add(a, axis, -1.0 / g.h);
          for (int t = 0; t < g.n; ++t) {
            if (t == axis) continue;
            const int pos = iv[t];
            for (std::int64_t base : {a, b}) {
              if (pos > 0 && pos < g.dims[t] - 1) {
                add(base + stride[t], t, 0.25 / g.h);
                add(base - stride[t], t, -0.25 / g.h);
              } else if (pos == 0) {
                add(base + stride[t], t, 0.5 / g.h);
                add(base, t, -0.5 / g.h);
              } else {
                add(base, t, 0.5 / g.h);
                add(base - stride[t], t, -0.5 / g.h);
              }
            }
          }
          faces.push_back(std::move(f));
        }
  }
  return faces;
}

}  // namespace detail

/// Newton solve of -div(Phi'(|grad u_i|^2) grad u_i) = H_i(u) on a box with
/// Dirichlet data. The residual is the exact gradient of the discrete energy
///   E_h = sum_faces (h^n / n) Phi(|g_face|^2)/2 - sum_nodes h^n Htilde-part,
/// so the Newton matrix is the (symmetric) discrete Hessian; the same
/// assembly backs the stability eigenproblem.
inline GridField solve_box(const PhiModel& phi, const Nonlinearity& hnl,
                           int n, const std::array<double, 3>& lo,
                           const std::array<double, 3>& hi, double h,
                           const BoundaryTrace& bc,
                           const std::optional<GridField>& seed = std::nullopt,
                           const BoxSolveOptions& opts = {}) {
  GridField f = make_grid_geometry(n, lo, hi, h);
  for (int a = 0; a < n; ++a)
    if (f.dims[a] < 32)
      throw ValidationError("box", "need at least 32 nodes per axis");
  f.m = hnl.m;
  f.phi = phi;
  f.hnl = hnl;
  f.provenance = Provenance::NewtonSolved;
  const int m = hnl.m;
  const std::int64_t total = f.total();

  // unknown numbering: interior nodes only
  std::vector<std::int64_t> unknown_of(total, -1);
  std::vector<std::int64_t> node_of;
  for (int i = 0; i < f.dims[0]; ++i)
    for (int j = 0; j < f.dims[1]; ++j)
      for (int k = 0; k < (n == 3 ? f.dims[2] : 1); ++k) {
        const bool interior = i > 0 && i < f.dims[0] - 1 && j > 0 &&
                              j < f.dims[1] - 1 &&
                              (n == 2 || (k > 0 && k < f.dims[2] - 1));
        if (interior) {
          unknown_of[f.index(i, j, k)] = static_cast<std::int64_t>(node_of.size());
          node_of.push_back(f.index(i, j, k));
        }
      }
  const std::int64_t nu = static_cast<std::int64_t>(node_of.size());

  // boundary + seed values
  f.value.assign(m, Eigen::VectorXd::Zero(total));
  for (int i = 0; i < f.dims[0]; ++i)
    for (int j = 0; j < f.dims[1]; ++j)
      for (int k = 0; k < (n == 3 ? f.dims[2] : 1); ++k) {
        const std::int64_t id = f.index(i, j, k);
        if (unknown_of[id] >= 0) continue;
        const Eigen::VectorXd v = bc(f.point(i, j, k));
        if (static_cast<int>(v.size()) != m)
          throw ValidationError("bc", "trace must return m components");
        for (int c = 0; c < m; ++c) f.value[c][id] = v[c];
      }

  const auto faces = detail::build_faces(f);
  const double face_w = std::pow(h, n) / n;  // measure carried by each face
  const double node_w = std::pow(h, n);

  Eigen::VectorXd x(nu * m);
  if (seed) {
    const GridField& s = *seed;
    if (s.n != n || s.m != m || s.dims != f.dims)
      throw ValidationError("seed", "seed grid does not match the solve grid");
    for (std::int64_t q = 0; q < nu; ++q)
      for (int c = 0; c < m; ++c) x[q * m + c] = s.value[c][node_of[q]];
  }

  auto scatter = [&](const Eigen::VectorXd& xv) {
    for (std::int64_t q = 0; q < nu; ++q)
      for (int c = 0; c < m; ++c) f.value[c][node_of[q]] = xv[q * m + c];
  };

  auto residual = [&](const Eigen::VectorXd& xv) {
    scatter(xv);
    Eigen::VectorXd r = Eigen::VectorXd::Zero(nu * m);
    for (const auto& fc : faces) {
      for (int c = 0; c < m; ++c) {
        double g[3] = {0, 0, 0};
        for (const auto& e : fc.entries)
          for (int a = 0; a < n; ++a) g[a] += e.w[a] * f.value[c][e.node];
        double s2 = 0;
        for (int a = 0; a < n; ++a) s2 += g[a] * g[a];
        const double coef = face_w * phi.dphi(s2);
        for (const auto& e : fc.entries) {
          const std::int64_t q = unknown_of[e.node];
          if (q < 0) continue;
          double gw = 0;
          for (int a = 0; a < n; ++a) gw += g[a] * e.w[a];
          r[q * m + c] += coef * gw;
        }
      }
    }
    for (std::int64_t q = 0; q < nu; ++q) {
      const Eigen::VectorXd Hv = hnl.H(f.values_at(node_of[q]));
      for (int c = 0; c < m; ++c) r[q * m + c] -= node_w * Hv[c];
    }
    return r;
  };

  auto jacobian = [&](const Eigen::VectorXd& xv) {
    scatter(xv);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(faces.size() * 36 * m);
    for (const auto& fc : faces) {
      for (int c = 0; c < m; ++c) {
        double g[3] = {0, 0, 0};
        for (const auto& e : fc.entries)
          for (int a = 0; a < n; ++a) g[a] += e.w[a] * f.value[c][e.node];
        double s2 = 0;
        for (int a = 0; a < n; ++a) s2 += g[a] * g[a];
        const double d1 = phi.dphi(s2), d2 = phi.ddphi(s2);
        for (const auto& ea : fc.entries) {
          const std::int64_t qa = unknown_of[ea.node];
          if (qa < 0) continue;
          double ga = 0, wa[3];
          for (int a = 0; a < n; ++a) {
            wa[a] = ea.w[a];
            ga += g[a] * wa[a];
          }
          for (const auto& eb : fc.entries) {
            const std::int64_t qb = unknown_of[eb.node];
            if (qb < 0) continue;
            double gb = 0, dot = 0;
            for (int a = 0; a < n; ++a) {
              gb += g[a] * eb.w[a];
              dot += wa[a] * eb.w[a];
            }
            trip.emplace_back(qa * m + c, qb * m + c,
                              face_w * (2.0 * d2 * ga * gb + d1 * dot));
          }
        }
      }
    }
    for (std::int64_t q = 0; q < nu; ++q) {
      const Eigen::MatrixXd Jh = hnl.jacobian(f.values_at(node_of[q]));
      for (int c = 0; c < m; ++c)
        for (int d = 0; d < m; ++d)
          trip.emplace_back(q * m + c, q * m + d, -node_w * Jh(c, d));
    }
    Eigen::SparseMatrix<double> J(nu * m, nu * m);
    J.setFromTriplets(trip.begin(), trip.end());
    return J;
  };

  if (!seed) {
    // harmonic seed: one linear solve with Phi(s)=s coefficients, H = 0
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nu * m);
    for (const auto& fc : faces) {
      for (const auto& ea : fc.entries) {
        const std::int64_t qa = unknown_of[ea.node];
        if (qa < 0) continue;
        for (const auto& eb : fc.entries) {
          double dot = 0;
          for (int a = 0; a < n; ++a) dot += ea.w[a] * eb.w[a];
          if (dot == 0) continue;
          const std::int64_t qb = unknown_of[eb.node];
          if (qb >= 0) {
            for (int c = 0; c < m; ++c)
              trip.emplace_back(qa * m + c, qb * m + c, face_w * dot);
          } else {
            for (int c = 0; c < m; ++c)
              rhs[qa * m + c] -= face_w * dot * f.value[c][eb.node];
          }
        }
      }
    }
    Eigen::SparseMatrix<double> A(nu * m, nu * m);
    A.setFromTriplets(trip.begin(), trip.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(A);
    if (ldlt.info() != Eigen::Success)
      throw SingularJacobian("harmonic seed factorization failed");
    x = ldlt.solve(rhs);
  }

  double res = 0;
  int iters = 0;
  detail::ptc_newton(residual, jacobian, x, opts.tol, opts.max_iterations,
                     opts.dt0, opts.dt_max, &res, &iters);
  scatter(x);
  f.residual_norm = res;
  rebuild_gradients(f);
  return f;
}

/// Discrete PDE residual of a field evaluated with the same face scheme as
/// solve_box, restricted to the interior margin window (the variational
/// rows adjacent to the boundary are adjoint closures, not pointwise
/// consistent, so they are excluded). r = -div_h(Phi' grad) - H per volume.
inline Eigen::VectorXd box_residual(const GridField& f) {
  const auto faces = detail::build_faces(f);
  const double face_w = std::pow(f.h, f.n) / f.n;
  const double node_w = std::pow(f.h, f.n);
  const int m = f.m;
  Eigen::VectorXd r = Eigen::VectorXd::Zero(f.total() * m);
  for (const auto& fc : faces)
    for (int c = 0; c < m; ++c) {
      double g[3] = {0, 0, 0};
      for (const auto& e : fc.entries)
        for (int a = 0; a < f.n; ++a) g[a] += e.w[a] * f.value[c][e.node];
      double s2 = 0;
      for (int a = 0; a < f.n; ++a) s2 += g[a] * g[a];
      const double coef = face_w * f.phi.dphi(s2);
      for (const auto& e : fc.entries) {
        double gw = 0;
        for (int a = 0; a < f.n; ++a) gw += g[a] * e.w[a];
        r[e.node * m + c] += coef * gw;
      }
    }
  for (std::int64_t id = 0; id < f.total(); ++id) {
    const Eigen::VectorXd Hv = f.hnl.H(f.values_at(id));
    for (int c = 0; c < m; ++c) r[id * m + c] -= node_w * Hv[c];
  }
  const auto mr = f.margin_range();
  for (int i = 0; i < f.dims[0]; ++i)
    for (int j = 0; j < f.dims[1]; ++j)
      for (int k = 0; k < (f.n == 3 ? f.dims[2] : 1); ++k) {
        const std::array<int, 3> pos{i, j, k};
        bool inside = true;
        for (int a = 0; a < f.n; ++a)
          inside = inside && pos[a] >= mr[a][0] && pos[a] <= mr[a][1];
        if (!inside)
          for (int c = 0; c < m; ++c) r[f.index(i, j, k) * m + c] = 0.0;
      }
  return r / node_w;
}

}  // namespace qsl

#endif  // QSL_GRID_SOLVER_HPP
