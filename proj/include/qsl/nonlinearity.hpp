#ifndef QSL_NONLINEARITY_HPP
#define QSL_NONLINEARITY_HPP

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qsl/errors.hpp"
#include "qsl/numerics.hpp"

namespace qsl {

/// Right-hand side H = (H_i) of the system, its Jacobian and (optionally)
/// an antiderivative Htilde with grad Htilde = H. Built-ins normalize the
/// antiderivative so that sup Htilde = 0; `shift` records the constant added.
struct Nonlinearity {
  int m = 1;
  std::string name = "custom";
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> H;
  /// jac(u)(i,j) = dH_i/du_j
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> jacobian;
  std::optional<std::function<double(const Eigen::VectorXd&)>> antiderivative;
  double shift = 0.0;

  bool has_antiderivative() const { return antiderivative.has_value(); }
  double htilde(const Eigen::VectorXd& u) const {
    if (!antiderivative) throw MissingAntiderivative();
    return (*antiderivative)(u);
  }
};

/// Per-component direction signs and the coupling-sign matrix they must
/// be consistent with.
struct SignPattern {
  std::vector<int> direction_signs;             // eps_i in {+1,-1}
  Eigen::MatrixXi coupling_signs;               // sign of dH_i/du_j (0 = none)
};

struct SymmetryReport {
  bool symmetric = false;
  double max_asymmetry = 0.0;
};

/// True iff max over samples of |dH_i/du_j - dH_j/du_i| <= tol.
inline SymmetryReport is_symmetric(const Nonlinearity& h,
                                   const std::vector<Eigen::VectorXd>& samples,
                                   double tol) {
  if (samples.empty())
    throw ValidationError("u_samples", "need at least one sample");
  double worst = 0.0;
  for (const auto& u : samples) {
    const Eigen::MatrixXd J = h.jacobian(u);
    worst = std::max(worst, (J - J.transpose()).cwiseAbs().maxCoeff());
  }
  return {worst <= tol, worst};
}

enum class Orientability { Orientable, NotOrientable, Indeterminate };

/// Checks eps_i eps_j sign(dH_j/du_i) = +1 for every coupled pair i<j,
/// sampling the coupling signs over the given u-box. Returns Indeterminate
/// if a sampled coupling sign changes inside the box.
inline Orientability is_orientable(const Nonlinearity& h,
                                   const Eigen::VectorXd& box_lo,
                                   const Eigen::VectorXd& box_hi,
                                   const SignPattern& pattern,
                                   int samples_per_axis = 7) {
  const int m = h.m;
  Eigen::MatrixXi sign = Eigen::MatrixXi::Zero(m, m);
  bool first = true;
  std::vector<int> idx(m, 0);
  const int q = samples_per_axis;
  const long total = static_cast<long>(std::pow(double(q), m));
  for (long s = 0; s < total; ++s) {
    long rem = s;
    Eigen::VectorXd u(m);
    for (int c = 0; c < m; ++c) {
      const int k = rem % q;
      rem /= q;
      u[c] = box_lo[c] + (box_hi[c] - box_lo[c]) * (q == 1 ? 0.5 : double(k) / (q - 1));
    }
    const Eigen::MatrixXd J = h.jacobian(u);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        if (i == j) continue;  // only couplings constrain orientability
        const double v = J(i, j);
        const int sg = v > 1e-12 ? 1 : (v < -1e-12 ? -1 : 0);
        if (sg != 0 && sign(i, j) != 0 && sg != sign(i, j))
          return Orientability::Indeterminate;
        if (sign(i, j) == 0) sign(i, j) = sg;
      }
    first = false;
  }
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) {
      if (sign(i, j) == 0) continue;  // decoupled pair: no constraint
      if (pattern.direction_signs[i] * pattern.direction_signs[j] *
              sign(i, j) != 1)
        return Orientability::NotOrientable;
    }
  return Orientability::Orientable;
}

/// Scalar double-well H(u) = u - u^3 with Htilde = -(1-u^2)^2/4.
inline Nonlinearity allen_cahn() {
  Nonlinearity h;
  h.m = 1;
  h.name = "allen_cahn";
  h.H = [](const Eigen::VectorXd& u) {
    Eigen::VectorXd out(1);
    out[0] = u[0] - u[0] * u[0] * u[0];
    return out;
  };
  h.jacobian = [](const Eigen::VectorXd& u) {
    Eigen::MatrixXd J(1, 1);
    J(0, 0) = 1.0 - 3.0 * u[0] * u[0];
    return J;
  };
  h.antiderivative = [](const Eigen::VectorXd& u) {
    const double w = 1.0 - u[0] * u[0];
    return -0.25 * w * w;
  };
  return h;
}

/// m-component H_i(u) = u_i (1 - |u|^2) with Htilde = -(1-|u|^2)^2/4.
inline Nonlinearity ginzburg_landau(int m) {
  Nonlinearity h;
  h.m = m;
  h.name = "ginzburg_landau(m=" + std::to_string(m) + ")";
  h.H = [](const Eigen::VectorXd& u) {
    return (u * (1.0 - u.squaredNorm())).eval();
  };
  h.jacobian = [m](const Eigen::VectorXd& u) {
    Eigen::MatrixXd J = -2.0 * (u * u.transpose());
    J.diagonal().array() += 1.0 - u.squaredNorm();
    return J;
  };
  h.antiderivative = [](const Eigen::VectorXd& u) {
    const double w = 1.0 - u.squaredNorm();
    return -0.25 * w * w;
  };
  return h;
}

/// Two-component double wells with tunable quartic coupling, beta > -1:
///   H_i(u) = u_i (1 - u_i^2 - beta u_j^2),  dH_i/du_j = -2 beta u_i u_j.
/// At beta = 3 the diagonal change of variables (u1 +/- u2)/sqrt(2)
/// decouples the system, giving the exact segregated wall
///   u = ((1 - T)/2, (1 + T)/2),  T = tanh(t/sqrt(2)).
inline Nonlinearity coupled_pair(double beta) {
  if (!(beta > -1.0))
    throw ValidationError("beta", "coupled_pair requires beta > -1");
  Nonlinearity h;
  h.m = 2;
  h.name = "coupled_pair(beta=" + std::to_string(beta) + ")";
  // sup of the raw antiderivative: -1/4 at the axis vacua for beta >= 1,
  // -beta/(2(1+beta)) at the symmetric wells for beta < 1.
  const double sup_raw =
      beta >= 1.0 ? -0.25 : -beta / (2.0 * (1.0 + beta));
  h.shift = -sup_raw;
  h.H = [beta](const Eigen::VectorXd& u) {
    Eigen::VectorXd out(2);
    out[0] = u[0] * (1.0 - u[0] * u[0] - beta * u[1] * u[1]);
    out[1] = u[1] * (1.0 - u[1] * u[1] - beta * u[0] * u[0]);
    return out;
  };
  h.jacobian = [beta](const Eigen::VectorXd& u) {
    Eigen::MatrixXd J(2, 2);
    J(0, 0) = 1.0 - 3.0 * u[0] * u[0] - beta * u[1] * u[1];
    J(1, 1) = 1.0 - 3.0 * u[1] * u[1] - beta * u[0] * u[0];
    J(0, 1) = -2.0 * beta * u[0] * u[1];
    J(1, 0) = J(0, 1);
    return J;
  };
  const double shift = h.shift;
  h.antiderivative = [beta, shift](const Eigen::VectorXd& u) {
    const double w0 = 1.0 - u[0] * u[0];
    const double w1 = 1.0 - u[1] * u[1];
    return -0.25 * w0 * w0 - 0.25 * w1 * w1 -
           0.5 * beta * u[0] * u[0] * u[1] * u[1] + shift;
  };
  return h;
}

/// Catalog of the built-in nonlinearities at reference parameters.
inline std::vector<Nonlinearity> builtin_nonlinearities() {
  return {allen_cahn(), ginzburg_landau(2), coupled_pair(3.0)};
}

/// Finite-difference consistency of the Jacobian and (when present) of the
/// antiderivative gradient against H, at the given points.
struct ConsistencyReport {
  double max_jacobian_error = 0.0;
  double max_gradient_error = 0.0;
};

inline ConsistencyReport check_consistency(
    const Nonlinearity& h, const std::vector<Eigen::VectorXd>& points) {
  ConsistencyReport rep;
  const double d = 1e-5;
  for (const auto& u : points) {
    const Eigen::MatrixXd J = h.jacobian(u);
    const double scale = std::max(1.0, J.cwiseAbs().maxCoeff());
    for (int j = 0; j < h.m; ++j) {
      Eigen::VectorXd up = u, um = u;
      up[j] += d;
      um[j] -= d;
      const Eigen::VectorXd fd = (h.H(up) - h.H(um)) / (2 * d);
      rep.max_jacobian_error = std::max(
          rep.max_jacobian_error, (fd - J.col(j)).cwiseAbs().maxCoeff() / scale);
      if (h.has_antiderivative()) {
        const double g = (h.htilde(up) - h.htilde(um)) / (2 * d);
        rep.max_gradient_error =
            std::max(rep.max_gradient_error,
                     std::abs(g - h.H(u)[j]) / std::max(1.0, std::abs(g)));
      }
    }
  }
  return rep;
}

}  // namespace qsl

#endif  // QSL_NONLINEARITY_HPP
