#ifndef QSL_PHI_MODEL_HPP
#define QSL_PHI_MODEL_HPP

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "qsl/errors.hpp"
#include "qsl/numerics.hpp"

namespace qsl {

enum class PhiKind { Laplacian, MeanCurvature, PLaplacian, Custom };

inline const char* to_string(PhiKind k) {
  switch (k) {
    case PhiKind::Laplacian: return "laplacian";
    case PhiKind::MeanCurvature: return "mean_curvature";
    case PhiKind::PLaplacian: return "plaplacian";
    default: return "custom";
  }
}

/// Scalar function Phi defining the divergence-form operator
/// div(Phi'(|grad u|^2) grad u), together with its first two derivatives.
///
/// Standing assumptions (checked by validate()): Phi(0)=0 and, for s>0,
/// Phi(s) > 0, Phi'(s) > 0 and Phi'(s) + 2 s Phi''(s) > 0.
struct PhiModel {
  PhiKind kind = PhiKind::Laplacian;
  double p = 2.0;        // PLaplacian exponent
  double epsilon = 0.0;  // PLaplacian regularization
  std::string name = "laplacian";
  std::function<double(double)> phi, dphi, ddphi;

  double operator()(double s) const { return phi(s); }

  /// Coefficient of the linearized operator along the gradient direction,
  /// Phi'(s) + 2 s Phi''(s). Positive for admissible models.
  double a_parallel(double s) const { return dphi(s) + 2.0 * s * ddphi(s); }

  /// True when Phi'(0) is not a positive finite number (degenerate or
  /// singular p-Laplacian with epsilon = 0).
  bool degenerate_at_zero() const {
    if (kind == PhiKind::PLaplacian && epsilon == 0.0 && p != 2.0) return true;
    const double d0 = dphi(0.0);
    return !(std::isfinite(d0) && d0 > 0.0);
  }

  /// Checks the standing positivity assumptions and derivative consistency
  /// against central differences on a log-spaced grid. Throws on violation.
  void validate(int grid_points = 200, double rel_tol = 1e-6) const {
    if (std::abs(phi(0.0)) > 1e-14)
      throw HypothesisViolated("Phi(0) must vanish for " + name);
    for (double s : logspace(1e-8, 1e8, grid_points)) {
      if (!(phi(s) > 0.0) || !(dphi(s) > 0.0) || !(a_parallel(s) > 0.0))
        throw HypothesisViolated("Phi positivity fails at s=" +
                                 std::to_string(s) + " for " + name);
      // two step sizes: one for power-law curvature (scales with s), one for
      // models analytic at 0; consistency with either certifies Phi'
      const double scale1 = std::abs(dphi(s)) + 1e-300;
      bool consistent = false;
      for (const double d : {1e-4 * s, 1e-6 * (1.0 + s)}) {
        // centered when the stencil stays in s > 0, one-sided otherwise
        const double fd1 =
            s - d > 0
                ? (phi(s + d) - phi(s - d)) / (2 * d)
                : (-3.0 * phi(s) + 4.0 * phi(s + d) - phi(s + 2 * d)) / (2 * d);
        if (std::abs(fd1 - dphi(s)) / scale1 <= rel_tol) {
          consistent = true;
          break;
        }
      }
      if (!consistent)
        throw HypothesisViolated("Phi' inconsistent with Phi at s=" +
                                 std::to_string(s) + " for " + name);
    }
  }
};

/// Built-in operator families.
///   Laplacian:      Phi(s) = s
///   MeanCurvature:  Phi(s) = 2(sqrt(1+s) - 1)
///   PLaplacian:     Phi(s) = (2/p)((eps+s)^(p/2) - eps^(p/2)), p > 1, eps >= 0
inline PhiModel make_phi(PhiKind kind, double p = 2.0, double eps = 0.0) {
  PhiModel mod;
  mod.kind = kind;
  switch (kind) {
    case PhiKind::Laplacian:
      mod.name = "laplacian";
      mod.phi = [](double s) { return s; };
      mod.dphi = [](double) { return 1.0; };
      mod.ddphi = [](double) { return 0.0; };
      break;
    case PhiKind::MeanCurvature:
      mod.name = "mean_curvature";
      mod.phi = [](double s) { return 2.0 * (std::sqrt(1.0 + s) - 1.0); };
      mod.dphi = [](double s) { return 1.0 / std::sqrt(1.0 + s); };
      mod.ddphi = [](double s) { return -0.5 * std::pow(1.0 + s, -1.5); };
      break;
    case PhiKind::PLaplacian: {
      if (!(p > 1.0)) throw ValidationError("p", "p-Laplacian requires p > 1");
      if (eps < 0.0) throw ValidationError("epsilon", "requires epsilon >= 0");
      mod.p = p;
      mod.epsilon = eps;
      mod.name = "plaplacian(p=" + std::to_string(p) + ")";
      const double epp = std::pow(eps, p / 2.0);
      mod.phi = [p, eps, epp](double s) {
        return (2.0 / p) * (std::pow(eps + s, p / 2.0) - epp);
      };
      mod.dphi = [p, eps](double s) {
        return std::pow(eps + s, (p - 2.0) / 2.0);
      };
      mod.ddphi = [p, eps](double s) {
        return 0.5 * (p - 2.0) * std::pow(eps + s, (p - 4.0) / 2.0);
      };
      break;
    }
    default:
      throw ValidationError("kind", "use make_custom_phi for custom models");
  }
  return mod;
}

inline PhiModel make_custom_phi(std::string name,
                                std::function<double(double)> phi,
                                std::function<double(double)> dphi,
                                std::function<double(double)> ddphi) {
  PhiModel mod;
  mod.kind = PhiKind::Custom;
  mod.name = std::move(name);
  mod.phi = std::move(phi);
  mod.dphi = std::move(dphi);
  mod.ddphi = std::move(ddphi);
  return mod;
}

/// Linearization coefficient matrix A(eta) with entries
/// a_ij = 2 Phi''(|eta|^2) eta_i eta_j + Phi'(|eta|^2) delta_ij.
/// Symmetric positive definite under the standing assumptions (eta != 0
/// where the model is degenerate).
struct DiffusionMatrix {
  Eigen::MatrixXd a;

  double quadratic_form(const Eigen::VectorXd& zeta) const {
    return zeta.dot(a * zeta);
  }
  double smallest_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    if (es.info() != Eigen::Success)
      throw LinearAlgebraFailure("eigensolve of A(eta) failed");
    return es.eigenvalues().minCoeff();
  }
};

inline DiffusionMatrix diffusion_matrix(const PhiModel& phi,
                                        const Eigen::VectorXd& eta) {
  if (!eta.allFinite())
    throw DegenerateGradient("eta must be finite");
  const double s = eta.squaredNorm();
  if (s == 0.0 && phi.degenerate_at_zero())
    throw DegenerateGradient("A(0) undefined for degenerate model " + phi.name);
  const double d1 = phi.dphi(s), d2 = phi.ddphi(s);
  if (!std::isfinite(d1) || !std::isfinite(d2))
    throw DegenerateGradient("Phi derivatives undefined at |eta|^2 = " +
                             std::to_string(s));
  DiffusionMatrix out;
  out.a = 2.0 * d2 * (eta * eta.transpose());
  out.a.diagonal().array() += d1;
  out.a = 0.5 * (out.a + out.a.transpose()).eval();  // exact symmetry
  return out;
}

/// Ratio whose least admissible upper bound defines alpha*: the rescaled
/// ball energy I_alpha is nondecreasing precisely when
/// alpha * Phi(s) >= 2 s Phi'(s) for all s > 0.
inline double alpha_ratio(const PhiModel& phi, double s) {
  return 2.0 * s * phi.dphi(s) / phi.phi(s);
}

/// Least admissible alpha over the grid: max of 2 s Phi'(s) / Phi(s),
/// including the one-sided s -> 0+ limit (2, by l'Hopital) whenever
/// Phi'(0) is finite and positive. Closed forms: 2 (Laplacian),
/// 2 (mean curvature), p (p-Laplacian with epsilon = 0).
inline double alpha_star(const PhiModel& phi, const std::vector<double>& s_grid) {
  if (s_grid.empty())
    throw ValidationError("s_grid", "alpha_star needs a nonempty grid");
  double sup = -std::numeric_limits<double>::infinity();
  for (double s : s_grid) {
    if (!(s > 0.0))
      throw ValidationError("s_grid", "alpha_star grid must be positive");
    sup = std::max(sup, alpha_ratio(phi, s));
  }
  const double d0 = phi.dphi(0.0);
  if (std::isfinite(d0) && d0 > 0.0) sup = std::max(sup, 2.0);
  return sup;
}

inline std::vector<double> default_alpha_grid(int points = 200000) {
  return logspace(1e-8, 1e8, points);
}

inline double alpha_star(const PhiModel& phi) {
  return alpha_star(phi, default_alpha_grid());
}

/// Empirical check of the structural growth conditions on Phi' and on the
/// quadratic form of A(eta).
///
/// Condition A compares against (eps + |eta|)^(-1) with the test vector
/// extended to (zeta, eta.zeta), which is orthogonal to (-eta, 1).
/// Condition B compares against (eps + |eta|)^(p-2).
struct ConditionReport {
  char condition = 'B';   // 'A' or 'B'
  double p = 2.0;         // exponent used for the bound
  double epsilon = 0.0;   // shift used for the bound
  double c1 = 0.0;        // empirical min ratio
  double c2 = 0.0;        // empirical max ratio
  bool satisfied = false; // all ratios finite and positive
  int samples = 0;
};

inline ConditionReport check_conditions_AB(const PhiModel& phi,
                                           int sample_count,
                                           std::uint64_t seed = 1,
                                           int dim = 3) {
  if (sample_count < 100)
    throw ValidationError("sample_count", "need at least 100 samples");
  ConditionReport rep;
  switch (phi.kind) {
    case PhiKind::MeanCurvature:
      rep.condition = 'A';
      rep.p = 1.0;
      rep.epsilon = 1.0;
      break;
    case PhiKind::Laplacian:
      rep.condition = 'B';
      rep.p = 2.0;
      rep.epsilon = 0.0;
      break;
    default:
      rep.condition = 'B';
      rep.p = phi.p;
      rep.epsilon = std::sqrt(phi.epsilon);
      break;
  }
  Rng rng(seed);
  double cmin = std::numeric_limits<double>::infinity();
  double cmax = -std::numeric_limits<double>::infinity();
  bool ok = true;
  for (int k = 0; k < sample_count; ++k) {
    const double mag = std::pow(10.0, rng.uniform(-4.0, 4.0));
    Eigen::VectorXd eta(dim), zeta(dim);
    for (int i = 0; i < dim; ++i) {
      eta[i] = rng.normal();
      zeta[i] = rng.normal();
    }
    if (eta.norm() == 0.0) continue;
    eta *= mag / eta.norm();
    const double s = eta.squaredNorm();
    if (phi.degenerate_at_zero() && s == 0.0) continue;
    const double bound = rep.condition == 'A'
                             ? 1.0 / (rep.epsilon + eta.norm())
                             : std::pow(rep.epsilon + eta.norm(), rep.p - 2.0);
    // ratio for the Phi' bound
    const double r1 = phi.dphi(s) / bound;
    // ratio for the quadratic form bound
    const auto A = diffusion_matrix(phi, eta);
    const double form = A.quadratic_form(zeta);
    double zn2 = zeta.squaredNorm();
    if (rep.condition == 'A') zn2 += std::pow(eta.dot(zeta), 2);  // |zeta'|^2
    const double r2 = form / (bound * zn2);
    for (double r : {r1, r2}) {
      if (!(r > 0.0) || !std::isfinite(r)) ok = false;
      cmin = std::min(cmin, r);
      cmax = std::max(cmax, r);
    }
    ++rep.samples;
  }
  rep.c1 = cmin;
  rep.c2 = cmax;
  rep.satisfied = ok && cmin > 0.0 && std::isfinite(cmax);
  return rep;
}

}  // namespace qsl

#endif  // QSL_PHI_MODEL_HPP
