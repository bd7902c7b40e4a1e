#ifndef QSL_QUADRATURE_HPP
#define QSL_QUADRATURE_HPP

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "qsl/grid_field.hpp"

namespace qsl {

/// Node-indicator ball quadrature with partial-volume weights: cells cut by
/// the sphere are subsampled. Weight of node id is (cell fraction inside) *
/// h^n; sum(w_id f_id) approximates the integral over B_r(center).
struct BallQuadrature {
  std::vector<std::pair<std::int64_t, double>> weights;

  double integrate(const Eigen::VectorXd& nodal) const {
    double s = 0;
    for (const auto& [id, w] : weights) s += w * nodal[id];
    return s;
  }
  double integrate(const std::function<double(std::int64_t)>& f) const {
    double s = 0;
    for (const auto& [id, w] : weights) s += w * f(id);
    return s;
  }
};

inline BallQuadrature ball_quadrature(const GridField& g,
                                      const Eigen::VectorXd& center, double r,
                                      int subsamples = 4) {
  BallQuadrature q;
  const double cellv = std::pow(g.h, g.n);
  const double diag = 0.5 * g.h * std::sqrt(double(g.n));
  std::vector<double> offs(subsamples);
  for (int i = 0; i < subsamples; ++i)
    offs[i] = ((i + 0.5) / subsamples - 0.5) * g.h;
  for (int i = 0; i < g.dims[0]; ++i)
    for (int j = 0; j < g.dims[1]; ++j)
      for (int k = 0; k < (g.n == 3 ? g.dims[2] : 1); ++k) {
        Eigen::VectorXd x = g.point(i, j, k);
        const double d = (x - center).norm();
        if (d > r + diag) continue;
        if (d < r - diag) {
          q.weights.emplace_back(g.index(i, j, k), cellv);
          continue;
        }
        long inside = 0, totalsub = 0;
        if (g.n == 2) {
          for (double ox : offs)
            for (double oy : offs) {
              const double dx = x[0] + ox - center[0];
              const double dy = x[1] + oy - center[1];
              ++totalsub;
              if (dx * dx + dy * dy <= r * r) ++inside;
            }
        } else {
          for (double ox : offs)
            for (double oy : offs)
              for (double oz : offs) {
                const double dx = x[0] + ox - center[0];
                const double dy = x[1] + oy - center[1];
                const double dz = x[2] + oz - center[2];
                ++totalsub;
                if (dx * dx + dy * dy + dz * dz <= r * r) ++inside;
              }
        }
        if (inside > 0)
          q.weights.emplace_back(g.index(i, j, k),
                                 cellv * double(inside) / double(totalsub));
      }
  return q;
}

/// Sphere-integral quadrature: angular product rule (uniform angle in 2D,
/// Gauss-Legendre x uniform azimuth in 3D), with the integrand interpolated
/// multilinearly and a trapezoid average over the radial shell
/// [r - h/2, r + h/2] to smooth interpolation noise.
struct SphereQuadrature {
  struct Point {
    Eigen::VectorXd x;    // evaluation point
    Eigen::VectorXd nu;   // outward unit normal
    double w;             // quadrature weight (includes surface measure)
  };
  std::vector<Point> points;

  double integrate(const std::function<double(const Point&)>& f) const {
    double s = 0;
    for (const auto& p : points) s += p.w * f(p);
    return s;
  }
};

namespace detail {

/// Gauss-Legendre nodes/weights on [-1,1] by Newton on Legendre polynomials.
inline void gauss_legendre(int n, std::vector<double>& xs,
                           std::vector<double>& ws) {
  xs.resize(n);
  ws.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      const double dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    const double dp = n * (x * p1 - p0) / (x * x - 1.0);
    xs[i] = x;
    ws[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
}

}  // namespace detail

inline SphereQuadrature sphere_quadrature(const GridField& g,
                                          const Eigen::VectorXd& center,
                                          double r, int angular = 0) {
  SphereQuadrature q;
  const std::array<std::pair<double, double>, 3> shell{
      {{r - 0.5 * g.h, 0.25}, {r, 0.5}, {r + 0.5 * g.h, 0.25}}};
  if (g.n == 2) {
    const int nth =
        angular > 0 ? angular
                    : std::max(64, static_cast<int>(8.0 * r / g.h));
    for (const auto& [rr, wr] : shell) {
      if (rr <= 0) continue;
      for (int t = 0; t < nth; ++t) {
        const double th = (t + 0.5) * 2.0 * M_PI / nth;
        SphereQuadrature::Point p;
        p.nu = Eigen::VectorXd(2);
        p.nu << std::cos(th), std::sin(th);
        p.x = center + rr * p.nu;
        p.w = wr * 2.0 * M_PI * r / nth;  // measure of the nominal sphere
        q.points.push_back(std::move(p));
      }
    }
  } else {
    const int nmu = angular > 0 ? angular
                                : std::max(24, static_cast<int>(4.0 * r / g.h));
    const int nph = 2 * nmu;
    std::vector<double> mu, wmu;
    detail::gauss_legendre(nmu, mu, wmu);
    for (const auto& [rr, wr] : shell) {
      if (rr <= 0) continue;
      for (int i = 0; i < nmu; ++i) {
        const double st = std::sqrt(1.0 - mu[i] * mu[i]);
        for (int j = 0; j < nph; ++j) {
          const double ph = (j + 0.5) * 2.0 * M_PI / nph;
          SphereQuadrature::Point p;
          p.nu = Eigen::VectorXd(3);
          p.nu << st * std::cos(ph), st * std::sin(ph), mu[i];
          p.x = center + rr * p.nu;
          p.w = wr * wmu[i] * (2.0 * M_PI / nph) * r * r;
          q.points.push_back(std::move(p));
        }
      }
    }
  }
  return q;
}

/// Interior-margin trapezoid weights over a cross-section slab (all axes
/// except `axis`), restricted to the margin window of the field.
struct CrossSection {
  int axis;                       // the distinguished direction
  std::vector<int> slice_index;   // node indices along `axis` inside margin
  std::vector<double> positions;  // coordinates of those slices
  // integration over the remaining axes:
  std::vector<std::pair<std::int64_t, double>> weights;  // offsets at slice 0
  std::int64_t axis_stride = 0;
  double measure = 0.0;  // cross-sectional measure of the window
};

inline CrossSection cross_section(const GridField& g, int axis) {
  if (axis < 0 || axis >= g.n)
    throw ValidationError("axis", "axis out of range");
  CrossSection cs;
  cs.axis = axis;
  const auto mr = g.margin_range();
  const std::array<std::int64_t, 3> stride{
      std::int64_t(g.dims[1]) * g.dims[2], g.dims[2], 1};
  cs.axis_stride = stride[axis];
  for (int s = mr[axis][0]; s <= mr[axis][1]; ++s) {
    cs.slice_index.push_back(s);
    cs.positions.push_back(g.coord(axis, s));
  }
  // tensor trapezoid over the other axes within margin
  std::vector<int> other;
  for (int a = 0; a < g.n; ++a)
    if (a != axis) other.push_back(a);
  const int s0 = cs.slice_index.front();
  std::array<int, 3> iv{0, 0, 0};
  iv[axis] = s0;
  if (other.size() == 1) {
    const int a = other[0];
    for (int i = mr[a][0]; i <= mr[a][1]; ++i) {
      iv[a] = i;
      double w = g.h;
      if (i == mr[a][0] || i == mr[a][1]) w *= 0.5;
      cs.weights.emplace_back(g.index(iv[0], iv[1], iv[2]), w);
      cs.measure += w;
    }
  } else {
    const int a = other[0], b = other[1];
    for (int i = mr[a][0]; i <= mr[a][1]; ++i)
      for (int j = mr[b][0]; j <= mr[b][1]; ++j) {
        iv[a] = i;
        iv[b] = j;
        double w = g.h * g.h;
        if (i == mr[a][0] || i == mr[a][1]) w *= 0.5;
        if (j == mr[b][0] || j == mr[b][1]) w *= 0.5;
        cs.weights.emplace_back(g.index(iv[0], iv[1], iv[2]), w);
        cs.measure += w;
      }
  }
  return cs;
}

}  // namespace qsl

#endif  // QSL_QUADRATURE_HPP
