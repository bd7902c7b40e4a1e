#ifndef QSL_GRID_FIELD_HPP
#define QSL_GRID_FIELD_HPP

#include <array>
#include <memory>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include <nlohmann/json.hpp>

#include "qsl/errors.hpp"
#include "qsl/profile.hpp"

namespace qsl {

enum class Provenance { PlanarFromProfile, NewtonSolved, Perturbed, Synthetic };

inline const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::PlanarFromProfile: return "planar-from-profile";
    case Provenance::NewtonSolved: return "newton-solved";
    case Provenance::Perturbed: return "perturbed";
    default: return "synthetic";
  }
}

/// m-component field sampled node-centered on a uniform box grid in
/// dimension n (2 or 3), with per-axis gradient arrays. Immutable by
/// convention once built.
struct GridField {
  int n = 2, m = 1;
  std::array<int, 3> dims{1, 1, 1};
  std::array<double, 3> lo{0, 0, 0}, hi{0, 0, 0};
  double h = 0.1;
  std::vector<Eigen::VectorXd> value;                // [m]
  std::vector<std::array<Eigen::VectorXd, 3>> grad;  // [m][axis]
  Provenance provenance = Provenance::Synthetic;
  PhiModel phi;
  Nonlinearity hnl;
  Eigen::VectorXd direction;  // planar fields only
  std::shared_ptr<const Profile1D> source_profile;  // planar fields only
  double residual_norm = 0.0;
  double margin_fraction = 0.1;  // diagnostics stay this far inside

  std::int64_t total() const {
    return std::int64_t(dims[0]) * dims[1] * dims[2];
  }
  std::int64_t index(int i, int j, int k = 0) const {
    return (std::int64_t(i) * dims[1] + j) * dims[2] + k;
  }
  double coord(int axis, int i) const { return lo[axis] + h * i; }
  Eigen::VectorXd point(int i, int j, int k = 0) const {
    Eigen::VectorXd x(n);
    x[0] = coord(0, i);
    x[1] = coord(1, j);
    if (n == 3) x[2] = coord(2, k);
    return x;
  }
  Eigen::VectorXd values_at(std::int64_t id) const {
    Eigen::VectorXd v(m);
    for (int c = 0; c < m; ++c) v[c] = value[c][id];
    return v;
  }
  Eigen::VectorXd gradient_at(int c, std::int64_t id) const {
    Eigen::VectorXd g(n);
    for (int a = 0; a < n; ++a) g[a] = grad[c][a][id];
    return g;
  }

  /// First/last node index kept by the interior margin along each axis.
  std::array<std::array<int, 2>, 3> margin_range() const {
    std::array<std::array<int, 2>, 3> r{};
    for (int a = 0; a < 3; ++a) {
      const int w = a < n ? static_cast<int>(
                                std::ceil(margin_fraction * (dims[a] - 1)))
                          : 0;
      r[a] = {w, dims[a] - 1 - w};
    }
    return r;
  }

  /// Multilinear interpolation of one component's value at a point.
  double interp_value(int c, const Eigen::VectorXd& x) const {
    return interp(value[c], x);
  }
  /// Multilinear interpolation of one gradient entry at a point.
  double interp_grad(int c, int axis, const Eigen::VectorXd& x) const {
    return interp(grad[c][axis], x);
  }

 private:
  double interp(const Eigen::VectorXd& a, const Eigen::VectorXd& x) const {
    std::array<int, 3> i0{0, 0, 0};
    std::array<double, 3> t{0, 0, 0};
    for (int ax = 0; ax < n; ++ax) {
      double s = (x[ax] - lo[ax]) / h;
      int k = static_cast<int>(std::floor(s));
      k = std::clamp(k, 0, dims[ax] - 2);
      i0[ax] = k;
      t[ax] = s - k;
    }
    double out = 0.0;
    const int corners = 1 << n;
    for (int cbit = 0; cbit < corners; ++cbit) {
      double w = 1.0;
      std::array<int, 3> ii = i0;
      for (int ax = 0; ax < n; ++ax) {
        const int b = (cbit >> ax) & 1;
        w *= b ? t[ax] : 1.0 - t[ax];
        ii[ax] += b;
      }
      out += w * a[index(ii[0], ii[1], ii[2])];
    }
    return out;
  }
};

/// Derivative of a nodal array along one axis: central differences in the
/// interior, one-sided second-order at the boundary.
inline Eigen::VectorXd grid_derivative(const GridField& f,
                                       const Eigen::VectorXd& a, int axis) {
  const std::array<std::int64_t, 3> stride{std::int64_t(f.dims[1]) * f.dims[2],
                                           f.dims[2], 1};
  Eigen::VectorXd out(f.total());
  const std::int64_t s = stride[axis];
  for (int i = 0; i < f.dims[0]; ++i)
    for (int j = 0; j < f.dims[1]; ++j)
      for (int k = 0; k < f.dims[2]; ++k) {
        const std::int64_t id = f.index(i, j, k);
        const std::array<int, 3> pos{i, j, k};
        double g;
        if (pos[axis] == 0)
          g = (-3.0 * a[id] + 4.0 * a[id + s] - a[id + 2 * s]) / (2.0 * f.h);
        else if (pos[axis] == f.dims[axis] - 1)
          g = (3.0 * a[id] - 4.0 * a[id - s] + a[id - 2 * s]) / (2.0 * f.h);
        else
          g = (a[id + s] - a[id - s]) / (2.0 * f.h);
        out[id] = g;
      }
  return out;
}

/// Recomputes gradient arrays from values.
inline void rebuild_gradients(GridField& f) {
  f.grad.assign(f.m, {});
  for (int c = 0; c < f.m; ++c)
    for (int a = 0; a < f.n; ++a)
      f.grad[c][a] = grid_derivative(f, f.value[c], a);
}

/// Builds the geometry of a field: node counts snap the upper corner to the
/// grid so that spacing is exactly h along every axis.
inline GridField make_grid_geometry(int n, const std::array<double, 3>& lo,
                                    const std::array<double, 3>& hi,
                                    double h) {
  if (n != 2 && n != 3)
    throw ValidationError("n", "grid fields support n in {2,3}");
  if (!(h > 0)) throw ValidationError("h", "spacing must be positive");
  GridField f;
  f.n = n;
  f.h = h;
  f.lo = lo;
  for (int a = 0; a < 3; ++a) {
    if (a < n) {
      const int cells = static_cast<int>(std::round((hi[a] - lo[a]) / h));
      if (cells < 4)
        throw ValidationError("box", "need at least 4 cells per axis");
      f.dims[a] = cells + 1;
      f.hi[a] = lo[a] + cells * h;
    } else {
      f.dims[a] = 1;
      f.lo[a] = 0;
      f.hi[a] = 0;
    }
  }
  return f;
}

/// Exact one-dimensional extension u(x) = u*(a.x) of a profile, sampled with
/// cubic Hermite interpolation; gradients are a * u*'(a.x) by the chain rule.
inline GridField planar_field(const Profile1D& prof,
                              const Eigen::VectorXd& direction,
                              const std::array<double, 3>& lo,
                              const std::array<double, 3>& hi, double h) {
  const int n = static_cast<int>(direction.size());
  if (std::abs(direction.norm() - 1.0) > 1e-12)
    throw ValidationError("direction", "must be a unit vector");
  GridField f = make_grid_geometry(n, lo, hi, h);
  // projection range of the box corners onto the direction
  double smin = 0, smax = 0;
  for (int cbit = 0; cbit < (1 << n); ++cbit) {
    double s = 0;
    for (int a = 0; a < n; ++a)
      s += direction[a] * (((cbit >> a) & 1) ? f.hi[a] : f.lo[a]);
    smin = cbit == 0 ? s : std::min(smin, s);
    smax = cbit == 0 ? s : std::max(smax, s);
  }
  if (smin < prof.t0 - 1e-12 || smax > prof.t1 + 1e-12)
    throw DomainTooSmall("box projects onto [" + std::to_string(smin) + "," +
                         std::to_string(smax) + "] outside profile domain");
  f.m = prof.m;
  f.phi = prof.phi;
  f.hnl = prof.h;
  f.direction = direction;
  f.source_profile = std::make_shared<Profile1D>(prof);
  f.provenance = Provenance::PlanarFromProfile;
  f.residual_norm = prof.residual_norm;
  f.value.assign(f.m, Eigen::VectorXd(f.total()));
  f.grad.assign(f.m, {});
  for (int c = 0; c < f.m; ++c)
    for (int a = 0; a < f.n; ++a) f.grad[c][a] = Eigen::VectorXd(f.total());
  for (int i = 0; i < f.dims[0]; ++i)
    for (int j = 0; j < f.dims[1]; ++j)
      for (int k = 0; k < f.dims[2]; ++k) {
        const std::int64_t id = f.index(i, j, k);
        double s = direction[0] * f.coord(0, i) + direction[1] * f.coord(1, j);
        if (n == 3) s += direction[2] * f.coord(2, k);
        for (int c = 0; c < f.m; ++c) {
          f.value[c][id] = prof.eval(c, s);
          const double d = prof.eval_deriv(c, s);
          for (int a = 0; a < n; ++a) f.grad[c][a][id] = direction[a] * d;
        }
      }
  return f;
}

/// Adds smooth, compactly supported, seeded noise (sum of Gaussian bumps
/// under a polynomial window vanishing at the boundary). Gradients are
/// updated analytically so perturbed fields stay differentiation-consistent.
inline GridField perturb(const GridField& in, double amplitude,
                         std::uint64_t seed) {
  if (amplitude < 0) throw ValidationError("amplitude", "must be >= 0");
  GridField f = in;
  f.provenance = Provenance::Perturbed;
  if (amplitude == 0) return f;
  Rng rng(seed);
  struct Bump {
    Eigen::VectorXd center;
    double width, amp;
    int comp;
  };
  std::vector<Bump> bumps;
  const int nb = 6;
  for (int b = 0; b < nb; ++b) {
    Bump bp;
    bp.center = Eigen::VectorXd(in.n);
    for (int a = 0; a < in.n; ++a) {
      const double w = in.hi[a] - in.lo[a];
      bp.center[a] = rng.uniform(in.lo[a] + 0.25 * w, in.hi[a] - 0.25 * w);
    }
    const double wmin = in.hi[0] - in.lo[0];
    bp.width = rng.uniform(0.04, 0.12) * wmin;
    bp.amp = amplitude * rng.uniform(0.5, 1.0) * (rng.uniform() < 0.5 ? -1 : 1);
    bp.comp = static_cast<int>(rng.integer() % in.m);
    bumps.push_back(bp);
  }
  // window: product over axes of q(s), q(0)=q(1)=0, quartic bump
  auto window = [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad_out) {
    double w = 1.0;
    Eigen::VectorXd dlog = Eigen::VectorXd::Zero(in.n);
    for (int a = 0; a < in.n; ++a) {
      const double s = (x[a] - in.lo[a]) / (in.hi[a] - in.lo[a]);
      const double q = 16.0 * s * s * (1 - s) * (1 - s);
      const double dq = 32.0 * s * (1 - s) * (1 - 2 * s) / (in.hi[a] - in.lo[a]);
      w *= q;
      dlog[a] = q != 0 ? dq / q : 0.0;
    }
    if (grad_out) *grad_out = w * dlog;
    return w;
  };
  for (int i = 0; i < f.dims[0]; ++i)
    for (int j = 0; j < f.dims[1]; ++j)
      for (int k = 0; k < f.dims[2]; ++k) {
        const std::int64_t id = f.index(i, j, k);
        Eigen::VectorXd x = f.point(i, j, k);
        Eigen::VectorXd wgrad(in.n);
        const double w = window(x, &wgrad);
        if (w == 0) continue;
        for (const auto& bp : bumps) {
          const Eigen::VectorXd d = x - bp.center;
          const double g = bp.amp * std::exp(-d.squaredNorm() /
                                             (2 * bp.width * bp.width));
          f.value[bp.comp][id] += w * g;
          for (int a = 0; a < in.n; ++a)
            f.grad[bp.comp][a][id] +=
                g * (wgrad[a] - w * d[a] / (bp.width * bp.width));
        }
      }
  return f;
}

namespace detail {

template <class T>
void put(std::ostream& os, T v) {
  static_assert(sizeof(T) == 8);
  os.write(reinterpret_cast<const char*>(&v), 8);
}
template <class T>
T get(std::istream& is) {
  T v;
  is.read(reinterpret_cast<char*>(&v), 8);
  return v;
}

inline void require_little_endian() {
  const std::uint64_t probe = 1;
  if (*reinterpret_cast<const unsigned char*>(&probe) != 1)
    throw Error("field serialization requires a little-endian host");
}

}  // namespace detail

/// Writes `<base>.qfb` (flat little-endian binary: int64 n, m, dims; float64
/// lo, hi, spacing; then component-major C-order value arrays followed by
/// per-axis gradient arrays) and `<base>.json` sidecar metadata.
inline void write_field(const std::string& base, const GridField& f,
                        const nlohmann::ordered_json& extra = {}) {
  detail::require_little_endian();
  std::ofstream os(base + ".qfb", std::ios::binary);
  if (!os) throw Error("cannot open " + base + ".qfb");
  detail::put<std::int64_t>(os, f.n);
  detail::put<std::int64_t>(os, f.m);
  for (int a = 0; a < f.n; ++a) detail::put<std::int64_t>(os, f.dims[a]);
  for (int a = 0; a < f.n; ++a) detail::put<double>(os, f.lo[a]);
  for (int a = 0; a < f.n; ++a) detail::put<double>(os, f.hi[a]);
  detail::put<double>(os, f.h);
  for (int c = 0; c < f.m; ++c)
    os.write(reinterpret_cast<const char*>(f.value[c].data()),
             sizeof(double) * f.total());
  for (int c = 0; c < f.m; ++c)
    for (int a = 0; a < f.n; ++a)
      os.write(reinterpret_cast<const char*>(f.grad[c][a].data()),
               sizeof(double) * f.total());

  nlohmann::ordered_json meta;
  meta["format"] = "qsl-field";
  meta["version"] = 1;
  meta["n"] = f.n;
  meta["m"] = f.m;
  meta["provenance"] = to_string(f.provenance);
  meta["phi"] = {{"kind", to_string(f.phi.kind)},
                 {"p", f.phi.p},
                 {"epsilon", f.phi.epsilon}};
  meta["nonlinearity"] = f.hnl.name;
  meta["residual_norm"] = f.residual_norm;
  meta["margin_fraction"] = f.margin_fraction;
  meta["payload"] = "values[m] then gradients[m][n], C-order float64";
  if (f.direction.size() > 0) {
    std::vector<double> d(f.direction.data(),
                          f.direction.data() + f.direction.size());
    meta["direction"] = d;
  }
  if (!extra.is_null() && !extra.empty()) meta["extra"] = extra;
  std::ofstream js(base + ".json");
  js << meta.dump(2) << "\n";
}

/// Reads a field written by write_field. The Phi model and nonlinearity are
/// not reconstructed (names live in the sidecar); callers supply them when
/// diagnostics need evaluators.
inline GridField read_field(const std::string& base) {
  detail::require_little_endian();
  std::ifstream is(base + ".qfb", std::ios::binary);
  if (!is) throw Error("cannot open " + base + ".qfb");
  GridField f;
  f.n = static_cast<int>(detail::get<std::int64_t>(is));
  f.m = static_cast<int>(detail::get<std::int64_t>(is));
  if (f.n < 2 || f.n > 3 || f.m < 1 || f.m > 16)
    throw Error("corrupt field header in " + base + ".qfb");
  for (int a = 0; a < f.n; ++a)
    f.dims[a] = static_cast<int>(detail::get<std::int64_t>(is));
  for (int a = 0; a < f.n; ++a) f.lo[a] = detail::get<double>(is);
  for (int a = 0; a < f.n; ++a) f.hi[a] = detail::get<double>(is);
  f.h = detail::get<double>(is);
  f.value.assign(f.m, Eigen::VectorXd(f.total()));
  for (int c = 0; c < f.m; ++c)
    is.read(reinterpret_cast<char*>(f.value[c].data()),
            sizeof(double) * f.total());
  f.grad.assign(f.m, {});
  for (int c = 0; c < f.m; ++c)
    for (int a = 0; a < f.n; ++a) {
      f.grad[c][a] = Eigen::VectorXd(f.total());
      is.read(reinterpret_cast<char*>(f.grad[c][a].data()),
              sizeof(double) * f.total());
    }
  if (!is) throw Error("truncated field payload in " + base + ".qfb");
  return f;
}

}  // namespace qsl

#endif  // QSL_GRID_FIELD_HPP
