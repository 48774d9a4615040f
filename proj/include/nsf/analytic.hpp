// Analytic vector fields sampled onto the voxel lattice of [-1,1]^3.
#pragma once

#include <functional>
#include <map>
#include <string>

#include "nsf/volume.hpp"

namespace nsf {

using ParamMap = std::map<std::string, double>;

namespace analytic {

/// V = omega * (-y, x, 0).
inline Vec3d rigid_rotation(const Vec3d& p, double omega = 1.0) { return {-omega * p.y, omega * p.x, 0.0}; }

/// Arnold-Beltrami-Childress flow. The cube is mapped onto the periodic
/// parameter domain [0, 2pi]^3, so (-1,-1,-1) is the parameter origin.
inline Vec3d abc(const Vec3d& p, double A, double B, double C) {
  const double x = (p.x + 1.0) * std::numbers::pi;
  const double y = (p.y + 1.0) * std::numbers::pi;
  const double z = (p.z + 1.0) * std::numbers::pi;
  return {A * std::sin(z) + C * std::cos(y), B * std::sin(x) + A * std::cos(z), C * std::sin(y) + B * std::cos(x)};
}

/// Hill's spherical vortex of radius `a` with symmetry axis z, in the frame
/// where the far field moves with speed U along +z. Inside the sphere the
/// flow is rotational, outside it is potential flow past a sphere; the sphere
/// itself is a stream surface.
inline Vec3d hill_vortex(const Vec3d& p, double U, double a) {
  const double rho2 = p.x * p.x + p.y * p.y;
  const double r2 = rho2 + p.z * p.z;
  const double a2 = a * a;
  double u_z = 0.0;
  double u_rho_over_rho = 0.0;  // u_rho / rho, finite on the axis
  if (r2 <= a2) {
    u_z = -1.5 * U * (1.0 - (2.0 * rho2 + p.z * p.z) / a2);
    u_rho_over_rho = -1.5 * U * p.z / a2;
  } else {
    const double r = std::sqrt(r2);
    const double a3_r3 = a2 * a / (r2 * r);
    const double a3_r5 = a3_r3 / r2;
    // Stokes stream function psi = U/2 rho^2 (1 - a^3/r^3).
    u_z = U * (1.0 - a3_r3) + 1.5 * U * rho2 * a3_r5;
    u_rho_over_rho = -1.5 * U * p.z * a3_r5;
  }
  return {u_rho_over_rho * p.x, u_rho_over_rho * p.y, u_z};
}

/// Crawfis' procedural tornado, time step `time`. The cube maps onto the
/// generator's native [0,1]^3 domain; components are left unscaled.
inline Vec3d tornado(const Vec3d& p, int time) {
  const double x = 0.5 * (p.x + 1.0);
  const double y = 0.5 * (p.y + 1.0);
  const double z = 0.5 * (p.z + 1.0);
  constexpr double kSmall = 1e-11;
  const double t = static_cast<double>(time);
  const double xc = 0.5 + 0.1 * std::sin(0.04 * t + 10.0 * z);
  const double yc = 0.5 + 0.1 * std::cos(0.03 * t + 3.0 * z);
  const double r = 0.1 + 0.4 * z * z + 0.1 * z * std::sin(8.0 * z);
  const double r2 = 0.2 + 0.1 * z;
  double temp = std::sqrt((y - yc) * (y - yc) + (x - xc) * (x - xc));
  double scale = std::abs(r - temp);
  scale = scale > r2 ? 0.8 - scale : 1.0;
  double z0 = 0.1 * (0.1 - temp * z);
  if (z0 < 0.0) z0 = 0.0;
  temp = std::sqrt(temp * temp + z0 * z0);
  scale = (r + r2 - temp) * scale / (temp + kSmall);
  scale = scale / (1.0 + z);
  return {scale * (y - yc) + 0.1 * (x - xc), scale * -(x - xc) + 0.1 * (y - yc), scale * z0};
}

}  // namespace analytic

namespace detail {

inline double take_param(ParamMap& params, const std::string& key, double fallback) {
  auto it = params.find(key);
  if (it == params.end()) return fallback;
  const double v = it->second;
  params.erase(it);
  return v;
}

}  // namespace detail

/// Names accepted by gen_analytic.
inline const std::vector<std::string>& analytic_names() {
  static const std::vector<std::string> names{"rigid_rotation", "abc", "hill_vortex", "tornado"};
  return names;
}

/// Samples a named analytic field at every voxel of `dims`.
///
/// Parameters (all optional):
///   rigid_rotation: omega (1)
///   abc:            A (sqrt 3), B (sqrt 2), C (1)
///   hill_vortex:    U (1), radius (0.5)
///   tornado:        time (0)
/// Unknown names or parameter keys raise UsageError.
inline VectorField gen_analytic(const std::string& name, Dims dims, ParamMap params = {}) {
  if (!dims.valid()) throw UsageError("dims must be positive");
  std::function<Vec3d(const Vec3d&)> fn;
  if (name == "rigid_rotation") {
    const double omega = detail::take_param(params, "omega", 1.0);
    fn = [=](const Vec3d& p) { return analytic::rigid_rotation(p, omega); };
  } else if (name == "abc") {
    const double A = detail::take_param(params, "A", std::sqrt(3.0));
    const double B = detail::take_param(params, "B", std::sqrt(2.0));
    const double C = detail::take_param(params, "C", 1.0);
    fn = [=](const Vec3d& p) { return analytic::abc(p, A, B, C); };
  } else if (name == "hill_vortex") {
    const double U = detail::take_param(params, "U", 1.0);
    const double a = detail::take_param(params, "radius", 0.5);
    if (!(a > 0.0)) throw UsageError("hill_vortex radius must be positive");
    fn = [=](const Vec3d& p) { return analytic::hill_vortex(p, U, a); };
  } else if (name == "tornado") {
    const int time = static_cast<int>(detail::take_param(params, "time", 0.0));
    fn = [=](const Vec3d& p) { return analytic::tornado(p, time); };
  } else {
    throw UsageError("unknown analytic field '" + name + "'");
  }
  if (!params.empty()) throw UsageError("unknown parameter '" + params.begin()->first + "' for " + name);

  VectorField out(dims);
  for (int k = 0; k < dims.nz; ++k)
    for (int j = 0; j < dims.ny; ++j)
      for (int i = 0; i < dims.nx; ++i) out.at(i, j, k) = fn(voxel_coord(dims, i, j, k)).cast<float>();
  return out;
}

}  // namespace nsf
