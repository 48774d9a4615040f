// Regular-grid fields over the normalized cube [-1,1]^3 and the finite
// difference operators defined on them.
//
// Storage is row-major with x fastest. Each axis is mapped independently to
// [-1,1], so anisotropic grids become a stretched cube and every derivative
// is taken in normalized coordinates.
#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nsf/common.hpp"

namespace nsf {

struct Dims {
  int nx = 0, ny = 0, nz = 0;

  constexpr int operator[](int axis) const { return axis == 0 ? nx : (axis == 1 ? ny : nz); }
  constexpr std::size_t count() const {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * static_cast<std::size_t>(nz);
  }
  constexpr bool valid() const { return nx > 0 && ny > 0 && nz > 0; }
  constexpr std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * static_cast<std::size_t>(ny) + static_cast<std::size_t>(j)) *
               static_cast<std::size_t>(nx) +
           static_cast<std::size_t>(i);
  }
  friend constexpr bool operator==(const Dims&, const Dims&) = default;
};

inline constexpr Dims cube(int n) { return {n, n, n}; }

/// Normalized coordinate of sample `i` on an axis with `n` samples. A single
/// sample sits at the centre of the axis.
inline double axis_coord(int i, int n) {
  return n == 1 ? 0.0 : -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1);
}

/// Distance between neighbouring samples in normalized units.
inline double axis_spacing(int n) { return n == 1 ? 2.0 : 2.0 / static_cast<double>(n - 1); }

inline Vec3d voxel_coord(const Dims& d, int i, int j, int k) {
  return {axis_coord(i, d.nx), axis_coord(j, d.ny), axis_coord(k, d.nz)};
}

/// Dense regular grid of values of type V.
template <class V>
class Grid {
 public:
  using value_type = V;

  Grid() = default;
  explicit Grid(Dims dims, V fill = V{}) : dims_(dims), data_(checked_count(dims), fill) {}
  Grid(Dims dims, std::vector<V> data) : dims_(dims), data_(std::move(data)) {
    if (data_.size() != checked_count(dims)) throw ShapeError("grid data length does not match dims");
  }

  const Dims& dims() const { return dims_; }
  std::size_t size() const { return data_.size(); }

  V& at(int i, int j, int k) { return data_[dims_.index(i, j, k)]; }
  const V& at(int i, int j, int k) const { return data_[dims_.index(i, j, k)]; }
  V& operator[](std::size_t n) { return data_[n]; }
  const V& operator[](std::size_t n) const { return data_[n]; }

  std::span<V> data() { return data_; }
  std::span<const V> data() const { return data_; }

  Vec3d coord(std::size_t n) const {
    const std::size_t nx = static_cast<std::size_t>(dims_.nx);
    const std::size_t ny = static_cast<std::size_t>(dims_.ny);
    return voxel_coord(dims_, static_cast<int>(n % nx), static_cast<int>((n / nx) % ny),
                       static_cast<int>(n / (nx * ny)));
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  static std::size_t checked_count(Dims d) {
    if (!d.valid()) throw ShapeError("grid dims must be positive");
    return d.count();
  }

  Dims dims_{};
  std::vector<V> data_;
};

using ScalarField = Grid<float>;
using VectorField = Grid<Vec3f>;
/// Per-voxel J(r, c) = dV_r / dx_c in normalized coordinates.
using JacobianField = Grid<Mat3<float>>;

template <class V>
bool all_finite(const Grid<V>& g) {
  for (const auto& v : g.data()) {
    if constexpr (std::is_floating_point_v<V>) {
      if (!std::isfinite(v)) return false;
    } else {
      if (!all_finite(v)) return false;
    }
  }
  return true;
}

/// Voxels whose vector is long enough to define a direction.
inline std::vector<std::size_t> non_degenerate_voxels(const VectorField& field) {
  std::vector<std::size_t> out;
  out.reserve(field.size());
  for (std::size_t n = 0; n < field.size(); ++n)
    if (norm(field[n].cast<double>()) >= kDegenerateNorm) out.push_back(n);
  return out;
}

namespace detail {

// Continuous sample index for normalized coordinate x; nullopt outside the
// axis. Coordinates within 1e-9 of a lattice point snap onto it so that
// vertex queries reproduce stored values exactly.
inline std::optional<std::pair<int, double>> locate(double x, int n) {
  constexpr double kTol = 1e-9;
  if (!(x >= -1.0 - kTol && x <= 1.0 + kTol)) return std::nullopt;
  if (n == 1) return std::pair{0, 0.0};
  double u = (std::clamp(x, -1.0, 1.0) + 1.0) * 0.5 * static_cast<double>(n - 1);
  const double r = std::round(u);
  if (std::abs(u - r) < kTol) u = r;
  int i0 = std::min(static_cast<int>(std::floor(u)), n - 2);
  return std::pair{i0, u - static_cast<double>(i0)};
}

inline double lerp_value(float v) { return static_cast<double>(v); }
inline Vec3d lerp_value(const Vec3f& v) { return v.cast<double>(); }

template <class V>
auto trilinear(const Grid<V>& g, const Vec3d& x) -> std::optional<decltype(lerp_value(V{}))> {
  using R = decltype(lerp_value(V{}));
  const Dims& d = g.dims();
  const auto lx = locate(x.x, d.nx);
  const auto ly = locate(x.y, d.ny);
  const auto lz = locate(x.z, d.nz);
  if (!lx || !ly || !lz) return std::nullopt;
  const auto [i, tx] = *lx;
  const auto [j, ty] = *ly;
  const auto [k, tz] = *lz;
  const int i1 = std::min(i + 1, d.nx - 1);
  const int j1 = std::min(j + 1, d.ny - 1);
  const int k1 = std::min(k + 1, d.nz - 1);
  auto v = [&](int a, int b, int c) { return lerp_value(g.at(a, b, c)); };
  // Zero weights are skipped so that vertex queries never touch neighbours.
  R acc{};
  auto add = [&](double w, int a, int b, int c) {
    if (w != 0.0) acc += v(a, b, c) * w;
  };
  add((1 - tx) * (1 - ty) * (1 - tz), i, j, k);
  add(tx * (1 - ty) * (1 - tz), i1, j, k);
  add((1 - tx) * ty * (1 - tz), i, j1, k);
  add(tx * ty * (1 - tz), i1, j1, k);
  add((1 - tx) * (1 - ty) * tz, i, j, k1);
  add(tx * (1 - ty) * tz, i1, j, k1);
  add((1 - tx) * ty * tz, i, j1, k1);
  add(tx * ty * tz, i1, j1, k1);
  return acc;
}

}  // namespace detail

/// Trilinear interpolation, or nullopt when x lies outside [-1,1]^3.
inline std::optional<Vec3d> try_sample_trilinear(const VectorField& field, const Vec3d& x) {
  return detail::trilinear(field, x);
}

inline Vec3d sample_trilinear(const VectorField& field, const Vec3d& x) {
  if (auto v = detail::trilinear(field, x)) return *v;
  throw OutOfDomainError("sample point outside [-1,1]^3");
}

inline std::optional<double> try_sample_trilinear(const ScalarField& field, const Vec3d& x) {
  return detail::trilinear(field, x);
}

inline double sample_trilinear(const ScalarField& field, const Vec3d& x) {
  if (auto v = detail::trilinear(field, x)) return *v;
  throw OutOfDomainError("sample point outside [-1,1]^3");
}

namespace detail {

inline void require_stencil(const Dims& d) {
  if (d.nx < 3 || d.ny < 3 || d.nz < 3)
    throw ShapeError("finite differences need at least 3 samples per axis");
}

// d(value)/d(axis) at voxel (i,j,k): central in the interior, one-sided
// first order on the boundary.
template <class V, class Get>
auto axis_derivative(const Dims& d, int axis, int i, int j, int k, Get get) {
  int idx[3] = {i, j, k};
  const int n = d[axis];
  const int c = idx[axis];
  const double h = axis_spacing(n);
  int lo = c - 1, hi = c + 1;
  double span = 2.0 * h;
  if (c == 0) {
    lo = 0;
    span = h;
  } else if (c == n - 1) {
    hi = n - 1;
    span = h;
  }
  int a[3] = {i, j, k}, b[3] = {i, j, k};
  a[axis] = lo;
  b[axis] = hi;
  return (get(b[0], b[1], b[2]) - get(a[0], a[1], a[2])) * (1.0 / span);
}

}  // namespace detail

/// Jacobian by central differences (one-sided on the boundary).
inline JacobianField jacobian_central(const VectorField& field) {
  const Dims& d = field.dims();
  detail::require_stencil(d);
  JacobianField out(d);
  auto get = [&](int a, int b, int c) { return field.at(a, b, c).cast<double>(); };
  for (int k = 0; k < d.nz; ++k)
    for (int j = 0; j < d.ny; ++j)
      for (int i = 0; i < d.nx; ++i) {
        Mat3<float>& J = out.at(i, j, k);
        for (int axis = 0; axis < 3; ++axis) {
          const Vec3d dv = detail::axis_derivative<Vec3d>(d, axis, i, j, k, get);
          for (int r = 0; r < 3; ++r) J(r, axis) = static_cast<float>(dv[static_cast<std::size_t>(r)]);
        }
      }
  return out;
}

inline Vec3d curl_of(const Mat3<float>& J) {
  return {static_cast<double>(J(2, 1)) - J(1, 2), static_cast<double>(J(0, 2)) - J(2, 0),
          static_cast<double>(J(1, 0)) - J(0, 1)};
}

inline VectorField curl(const VectorField& field) {
  const JacobianField J = jacobian_central(field);
  VectorField out(field.dims());
  for (std::size_t n = 0; n < field.size(); ++n) out[n] = curl_of(J[n]).cast<float>();
  return out;
}

struct FrenetFields {
  VectorField normal;    // N = B x V
  VectorField binormal;  // B = (J V) x V
};

/// Principal normal and binormal directions of the flow (unnormalized).
inline FrenetFields frenet_normal(const VectorField& field) {
  const JacobianField J = jacobian_central(field);
  FrenetFields out{VectorField(field.dims()), VectorField(field.dims())};
  for (std::size_t n = 0; n < field.size(); ++n) {
    const Vec3d v = field[n].cast<double>();
    Mat3<double> jd;
    for (std::size_t e = 0; e < 9; ++e) jd.m[e] = J[n].m[e];
    const Vec3d b = cross(jd * v, v);
    out.binormal[n] = b.cast<float>();
    out.normal[n] = cross(b, v).cast<float>();
  }
  return out;
}

/// Central-difference gradient of a sampled scalar field (one-sided on the
/// boundary), in normalized coordinates.
inline Grid<Vec3d> gradient_central(const ScalarField& field) {
  const Dims& d = field.dims();
  detail::require_stencil(d);
  Grid<Vec3d> out(d);
  auto get = [&](int a, int b, int c) { return static_cast<double>(field.at(a, b, c)); };
  for (int k = 0; k < d.nz; ++k)
    for (int j = 0; j < d.ny; ++j)
      for (int i = 0; i < d.nx; ++i) {
        Vec3d g;
        for (int axis = 0; axis < 3; ++axis)
          g[static_cast<std::size_t>(axis)] = detail::axis_derivative<double>(d, axis, i, j, k, get);
        out.at(i, j, k) = g;
      }
  return out;
}

}  // namespace nsf
