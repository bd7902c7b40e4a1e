#ifndef QSL_PROFILE_HPP
#define QSL_PROFILE_HPP

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qsl/errors.hpp"
#include "qsl/nonlinearity.hpp"
#include "qsl/numerics.hpp"
#include "qsl/phi_model.hpp"

namespace qsl {

/// Sampled one-variable solution of the system
///   -(Phi'(|u_i'|^2) u_i')' = H_i(u)
/// on a uniform grid, with reconstructed derivatives and solve metadata.
/// Immutable after construction; concurrent reads are safe.
struct Profile1D {
  double t0 = -1.0, t1 = 1.0;
  int m = 1;
  std::vector<Eigen::VectorXd> u;   // per component, N+1 values
  std::vector<Eigen::VectorXd> du;  // per component, high-order reconstruction
  PhiModel phi;
  Nonlinearity h;
  std::vector<double> bc_lo, bc_hi;
  double residual_norm = 0.0;
  int newton_iterations = 0;
  double epsilon_applied = 0.0;  // regularization actually used by the solve

  int nodes() const { return static_cast<int>(u.empty() ? 0 : u[0].size()); }
  double spacing() const { return (t1 - t0) / (nodes() - 1); }
  double t(int k) const { return t0 + spacing() * k; }

  Eigen::VectorXd values_at(int k) const {
    Eigen::VectorXd v(m);
    for (int c = 0; c < m; ++c) v[c] = u[c][k];
    return v;
  }
  Eigen::VectorXd derivs_at(int k) const {
    Eigen::VectorXd v(m);
    for (int c = 0; c < m; ++c) v[c] = du[c][k];
    return v;
  }

  /// Cubic Hermite interpolation of component values / derivatives.
  double eval(int comp, double s) const {
    return CubicHermite{t0, spacing(), &u[comp], &du[comp]}.value(s);
  }
  double eval_deriv(int comp, double s) const {
    return CubicHermite{t0, spacing(), &u[comp], &du[comp]}.deriv(s);
  }
};

/// Quasilinear first integral along the profile,
///   E(t) = sum_i [ Phi(|u_i'|^2)/2 - Phi'(|u_i'|^2) u_i'^2 ] - Htilde(u),
/// constant in t for exact solutions (for Phi(s)=s this is the classical
/// -sum u_i'^2/2 - Htilde). Returns E(t_k) - E(t_0) per node.
inline Eigen::VectorXd first_integral_deficit(const Profile1D& prof) {
  if (!prof.h.has_antiderivative()) throw MissingAntiderivative();
  const int np = prof.nodes();
  Eigen::VectorXd E(np);
  for (int k = 0; k < np; ++k) {
    double e = 0.0;
    for (int c = 0; c < prof.m; ++c) {
      const double s = prof.du[c][k] * prof.du[c][k];
      e += 0.5 * prof.phi.phi(s) - prof.phi.dphi(s) * s;
    }
    e -= prof.h.htilde(prof.values_at(k));
    E[k] = e;
  }
  return (E.array() - E[0]).matrix();
}

/// CSV with columns t, u_1..u_m, du_1..du_m at 17 significant digits.
inline void write_profile_csv(const std::string& path, const Profile1D& prof) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path);
  out << "t";
  for (int c = 0; c < prof.m; ++c) out << ",u_" << (c + 1);
  for (int c = 0; c < prof.m; ++c) out << ",du_" << (c + 1);
  out << "\n";
  char buf[40];
  for (int k = 0; k < prof.nodes(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", prof.t(k));
    out << buf;
    for (int c = 0; c < prof.m; ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", prof.u[c][k]);
      out << "," << buf;
    }
    for (int c = 0; c < prof.m; ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", prof.du[c][k]);
      out << "," << buf;
    }
    out << "\n";
  }
}

}  // namespace qsl

#endif  // QSL_PROFILE_HPP
