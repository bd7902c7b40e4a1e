#ifndef QSL_NUMERICS_HPP
#define QSL_NUMERICS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qsl/errors.hpp"

namespace qsl {

/// Finite-difference weights for the m-th derivative at x0 given nodes xs
/// (Fornberg's recursion). Works for arbitrary, possibly one-sided, stencils.
inline std::vector<double> fd_weights(double x0, const std::vector<double>& xs,
                                      int m) {
  const int n = static_cast<int>(xs.size());
  std::vector<std::vector<double>> c(n, std::vector<double>(m + 1, 0.0));
  double c1 = 1.0;
  double c4 = xs[0] - x0;
  c[0][0] = 1.0;
  for (int i = 1; i < n; ++i) {
    const int mn = std::min(i, m);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = xs[i] - x0;
    for (int j = 0; j < i; ++j) {
      const double c3 = xs[i] - xs[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k)
          c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (int k = mn; k >= 1; --k)
        c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) w[i] = c[i][m];
  return w;
}

/// One stencil row: first covered index plus weights for consecutive entries.
struct StencilRow {
  int start = 0;
  std::vector<double> w;
};

/// Stencil tables for a staggered 1D grid with N+1 nodes and N faces.
/// Face f sits midway between nodes f and f+1. `width` controls the order
/// (width-point stencils, one-sided near the ends).
struct StaggeredStencils {
  int n_nodes = 0;  // N+1
  int n_faces = 0;  // N
  std::vector<StencilRow> grad;  // derivative at face from nodes
  std::vector<StencilRow> div;   // derivative at interior node k=1..N-1 from faces

  StaggeredStencils() = default;
  StaggeredStencils(int N, double h, int width) {
    n_nodes = N + 1;
    n_faces = N;
    if (N + 1 < width) width = (N + 1) - ((N + 1) % 2 == 0 ? 2 : 1);
    width = std::max(width, 2);
    grad.resize(n_faces);
    for (int f = 0; f < n_faces; ++f) {
      int lo = std::clamp(f - width / 2 + 1, 0, N + 1 - width);
      std::vector<double> xs(width);
      for (int i = 0; i < width; ++i) xs[i] = (lo + i - (f + 0.5)) * h;
      grad[f] = {lo, fd_weights(0.0, xs, 1)};
    }
    div.resize(N - 1);
    const int fw = std::min(width, N);
    for (int k = 1; k < N; ++k) {
      int lo = std::clamp(k - fw / 2, 0, N - fw);
      std::vector<double> xs(fw);
      for (int i = 0; i < fw; ++i) xs[i] = (lo + i + 0.5 - k) * h;
      div[k - 1] = {lo, fd_weights(0.0, xs, 1)};
    }
  }
};

/// First derivative at every node of a uniformly sampled function,
/// width-point stencils (order width-1), one-sided near the ends.
inline Eigen::VectorXd derivative_on_nodes(const Eigen::VectorXd& u, double h,
                                           int width = 7) {
  const int np = static_cast<int>(u.size());
  if (np < 2) return Eigen::VectorXd::Zero(np);
  width = std::min(width, np);
  Eigen::VectorXd d(np);
  for (int k = 0; k < np; ++k) {
    int lo = std::clamp(k - width / 2, 0, np - width);
    std::vector<double> xs(width);
    for (int i = 0; i < width; ++i) xs[i] = (lo + i - k) * h;
    auto w = fd_weights(0.0, xs, 1);
    double s = 0.0;
    for (int i = 0; i < width; ++i) s += w[i] * u[lo + i];
    d[k] = s;
  }
  return d;
}

/// Cubic Hermite interpolation on a uniform grid from values and derivatives.
struct CubicHermite {
  double t0 = 0.0, h = 1.0;
  const Eigen::VectorXd* v = nullptr;
  const Eigen::VectorXd* d = nullptr;

  double value(double s) const {
    auto [k, x] = locate(s);
    const double h00 = (1 + 2 * x) * (1 - x) * (1 - x);
    const double h10 = x * (1 - x) * (1 - x);
    const double h01 = x * x * (3 - 2 * x);
    const double h11 = x * x * (x - 1);
    return h00 * (*v)[k] + h * h10 * (*d)[k] + h01 * (*v)[k + 1] +
           h * h11 * (*d)[k + 1];
  }
  double deriv(double s) const {
    auto [k, x] = locate(s);
    const double g00 = 6 * x * (x - 1);
    const double g10 = (1 - x) * (1 - 3 * x);
    const double g01 = -6 * x * (x - 1);
    const double g11 = x * (3 * x - 2);
    return (g00 * (*v)[k] + g01 * (*v)[k + 1]) / h + g10 * (*d)[k] +
           g11 * (*d)[k + 1];
  }

 private:
  std::pair<int, double> locate(double s) const {
    const int np = static_cast<int>(v->size());
    double x = (s - t0) / h;
    int k = static_cast<int>(std::floor(x));
    k = std::clamp(k, 0, np - 2);
    return {k, x - k};
  }
};

/// Deterministic RNG: xoshiro-free, just mt19937_64 with explicit
/// Box-Muller normals so streams do not depend on the standard library's
/// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

  double uniform() {  // in (0,1)
    state_ = splitmix(state_);
    return (static_cast<double>(state_ >> 11) + 0.5) * 0x1.0p-53;
  }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform(), u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(th);
    have_spare_ = true;
    return r * std::cos(th);
  }
  std::uint64_t integer() {
    state_ = splitmix(state_);
    return state_;
  }

 private:
  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

inline std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i)
    v[i] = a + (b - a) * (n == 1 ? 0.0 : double(i) / (n - 1));
  return v;
}

inline std::vector<double> logspace(double a, double b, int n) {
  auto v = linspace(std::log10(a), std::log10(b), n);
  for (auto& x : v) x = std::pow(10.0, x);
  return v;
}

/// Least-squares slope of y against x.
inline double ls_slope(const std::vector<double>& x,
                       const std::vector<double>& y) {
  const int n = static_cast<int>(x.size());
  if (n < 2) throw InsufficientRange("need at least two points for a fit");
  double mx = 0, my = 0;
  for (int i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0) throw InsufficientRange("degenerate abscissae in fit");
  return sxy / sxx;
}

/// Composite trapezoid weight vector for a uniform grid of np points.
inline Eigen::VectorXd trapezoid_weights(int np, double h) {
  Eigen::VectorXd w = Eigen::VectorXd::Constant(np, h);
  if (np >= 2) {
    w[0] = 0.5 * h;
    w[np - 1] = 0.5 * h;
  }
  return w;
}

}  // namespace qsl

#endif  // QSL_NUMERICS_HPP
