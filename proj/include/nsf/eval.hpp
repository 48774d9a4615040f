// Orthogonality error, streamline tracing, constancy of f along streamlines
// and the grid-resampling fidelity study.
//
// Every routine here takes a "model": any object with
//   void evaluate(std::span<const Vec3d> points, std::span<double> values, std::span<Vec3d> grads) const;
// where `grads` may be empty when only values are needed. NetModel adapts a
// StreamNet; FunctionModel adapts closed-form stream functions.
#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <nlohmann/json.hpp>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "nsf/net.hpp"
#include "nsf/volume.hpp"

namespace nsf {

template <class M>
concept Model = requires(const M& m, std::span<const Vec3d> p, std::span<double> v, std::span<Vec3d> g) {
  m.evaluate(p, v, g);
};

template <class T>
class NetModel {
 public:
  explicit NetModel(const StreamNet<T>& net) : net_(&net) {}

  void evaluate(std::span<const Vec3d> points, std::span<double> values, std::span<Vec3d> grads) const {
    std::vector<Vec3<T>> p(points.size());
    for (std::size_t s = 0; s < p.size(); ++s) p[s] = points[s].template cast<T>();
    std::vector<T> v(p.size());
    if (grads.empty()) {
      forward_batch<T>(*net_, p, v);
    } else {
      std::vector<Vec3<T>> g(p.size());
      forward_with_grad_batch<T>(*net_, p, v, g);
      for (std::size_t s = 0; s < p.size(); ++s) grads[s] = g[s].template cast<double>();
    }
    for (std::size_t s = 0; s < p.size(); ++s) values[s] = static_cast<double>(v[s]);
  }

 private:
  const StreamNet<T>* net_;
};

class FunctionModel {
 public:
  FunctionModel(std::function<double(const Vec3d&)> f, std::function<Vec3d(const Vec3d&)> grad = {})
      : f_(std::move(f)), grad_(std::move(grad)) {}

  void evaluate(std::span<const Vec3d> points, std::span<double> values, std::span<Vec3d> grads) const {
    if (!grads.empty() && !grad_) throw UsageError("this model has no gradient");
    for (std::size_t s = 0; s < points.size(); ++s) {
      values[s] = f_(points[s]);
      if (!grads.empty()) grads[s] = grad_(points[s]);
    }
  }

 private:
  std::function<double(const Vec3d&)> f_;
  std::function<Vec3d(const Vec3d&)> grad_;
};

/// |pi/2 - acos(g.v / |g||v|)| in radians, or nullopt when either vector is
/// shorter than kDegenerateNorm.
inline std::optional<double> err_perp_point(const Vec3d& grad, const Vec3d& v) {
  const double ng = norm(grad), nv = norm(v);
  if (!(ng >= kDegenerateNorm) || !(nv >= kDegenerateNorm)) return std::nullopt;
  const double c = std::clamp(dot(grad, v) / (ng * nv), -1.0, 1.0);
  return std::abs(std::numbers::pi / 2 - std::acos(c));
}

struct ErrStats {
  double median = 0.0;  // degrees
  double mean = 0.0;
  double max = 0.0;
  std::size_t masked = 0;
  std::size_t total = 0;

  nlohmann::json to_json() const {
    return {{"median_deg", median}, {"mean_deg", mean}, {"max_deg", max}, {"masked_voxels", masked},
            {"total_voxels", total}};
  }
};

/// Statistics over the unmasked entries (degrees); masked entries are negative.
inline ErrStats err_stats(std::span<const float> degrees) {
  ErrStats st;
  st.total = degrees.size();
  std::vector<double> live;
  live.reserve(degrees.size());
  for (float e : degrees) {
    if (e < 0.0f) {
      ++st.masked;
      continue;
    }
    live.push_back(e);
  }
  if (live.empty()) throw DataError("every voxel is masked (zero gradient or zero vector)");
  double sum = 0.0;
  for (double e : live) {
    sum += e;
    st.max = std::max(st.max, e);
  }
  st.mean = sum / static_cast<double>(live.size());
  st.median = median(std::move(live));
  return st;
}

struct ErrVolume {
  ScalarField degrees;  // -1 at masked voxels
  ErrStats stats;
};

inline ErrVolume err_from_gradients(const Grid<Vec3d>& grads, const VectorField& field) {
  if (grads.dims() != field.dims()) throw ShapeError("gradient and vector field dimensions differ");
  ScalarField deg(field.dims());
  for (std::size_t n = 0; n < field.size(); ++n) {
    const auto e = err_perp_point(grads[n], field[n].cast<double>());
    deg[n] = e ? static_cast<float>(*e * kRadToDeg) : -1.0f;
  }
  ErrStats st = err_stats(deg.data());
  return {std::move(deg), st};
}

/// Err at every voxel with gradients taken from the model itself.
template <Model M>
ErrVolume err_volume(const M& model, const VectorField& field) {
  std::vector<Vec3d> pts(field.size());
  for (std::size_t n = 0; n < pts.size(); ++n) pts[n] = field.coord(n);
  std::vector<double> values(pts.size());
  Grid<Vec3d> grads(field.dims());
  model.evaluate(pts, values, grads.data());
  return err_from_gradients(grads, field);
}

/// Err with gradients from central differences of a sampled scalar grid.
inline ErrVolume err_volume_from_samples(const ScalarField& f, const VectorField& field) {
  return err_from_gradients(gradient_central(f), field);
}

enum class Termination { max_steps, left_domain, stagnation };

inline std::string to_string(Termination t) {
  switch (t) {
    case Termination::max_steps: return "max_steps";
    case Termination::left_domain: return "left_domain";
    case Termination::stagnation: return "stagnation";
  }
  return "unknown";
}

struct Streamline {
  std::vector<Vec3d> points;
  double h = 0.0;
  Termination reason = Termination::max_steps;
};

inline constexpr double kStagnationSpeed = 1e-9;

/// Classical RK4 through the trilinearly interpolated field. Stops after
/// max_steps steps, when a stage leaves [-1,1]^3, or when |V| drops below
/// kStagnationSpeed at the current point.
inline Streamline trace_streamline(const VectorField& field, const Vec3d& seed, double h, int max_steps) {
  if (!(h > 0.0)) throw UsageError("step size must be positive");
  if (max_steps < 0) throw UsageError("max_steps must be non-negative");
  if (!try_sample_trilinear(field, seed)) throw UsageError("streamline seed lies outside [-1,1]^3");
  Streamline line;
  line.h = h;
  line.points.push_back(seed);
  Vec3d p = seed;
  for (int step = 0; step < max_steps; ++step) {
    const auto k1 = try_sample_trilinear(field, p);
    if (norm(*k1) < kStagnationSpeed) {
      line.reason = Termination::stagnation;
      return line;
    }
    const auto k2 = try_sample_trilinear(field, p + *k1 * (h / 2));
    const auto k3 = k2 ? try_sample_trilinear(field, p + *k2 * (h / 2)) : std::nullopt;
    const auto k4 = k3 ? try_sample_trilinear(field, p + *k3 * h) : std::nullopt;
    if (!k4) {
      line.reason = Termination::left_domain;
      return line;
    }
    Vec3d next = p + (*k1 + *k2 * 2.0 + *k3 * 2.0 + *k4) * (h / 6);
    if (!try_sample_trilinear(field, next)) {
      line.reason = Termination::left_domain;
      return line;
    }
    // Points accepted within the lattice tolerance are pulled onto the cube.
    for (std::size_t a = 0; a < 3; ++a) next[a] = std::clamp(next[a], -1.0, 1.0);
    p = next;
    line.points.push_back(p);
  }
  line.reason = Termination::max_steps;
  return line;
}

/// Uniformly random seeds in [-1,1]^3 where |V| is above the stagnation speed.
inline std::vector<Vec3d> random_seeds(const VectorField& field, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Vec3d> out;
  for (std::size_t attempts = 0; out.size() < count; ++attempts) {
    if (attempts > 1000 * (count + 1)) throw DataError("could not place seeds: field is stagnant almost everywhere");
    const Vec3d p{u(rng), u(rng), u(rng)};
    if (norm(sample_trilinear(field, p)) >= kStagnationSpeed) out.push_back(p);
  }
  return out;
}

inline constexpr int kRangeSampleResolution = 64;

/// min/max of the model over a 64^3 lattice of [-1,1]^3.
template <Model M>
std::pair<double, double> global_range(const M& model) {
  const Dims d = cube(kRangeSampleResolution);
  std::vector<Vec3d> pts;
  pts.reserve(d.count());
  for (int k = 0; k < d.nz; ++k)
    for (int j = 0; j < d.ny; ++j)
      for (int i = 0; i < d.nx; ++i) pts.push_back(voxel_coord(d, i, j, k));
  std::vector<double> v(pts.size());
  model.evaluate(pts, v, {});
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return {*lo, *hi};
}

struct ConstancyReport {
  std::vector<double> relative_variation;  // per line: max |f - f(seed)| / range
  double median = 0.0;
  double max = 0.0;
  double range = 0.0;

  nlohmann::json to_json() const {
    return {{"lines", relative_variation.size()},
            {"median_relative_variation", median},
            {"max_relative_variation", max},
            {"global_range", range},
            {"per_line", relative_variation}};
  }
};

template <Model M>
ConstancyReport constancy_check(const M& model, const std::vector<Streamline>& lines) {
  if (lines.empty()) throw UsageError("constancy check needs at least one streamline");
  const auto [lo, hi] = global_range(model);
  ConstancyReport rep;
  rep.range = hi - lo;
  if (!(rep.range >= 1e-9)) throw DataError("model output is constant over the domain");
  for (const auto& line : lines) {
    std::vector<double> v(line.points.size());
    model.evaluate(line.points, v, {});
    double worst = 0.0;
    for (double x : v) worst = std::max(worst, std::abs(x - v.front()));
    rep.relative_variation.push_back(worst / rep.range);
  }
  rep.median = median(rep.relative_variation);
  rep.max = *std::max_element(rep.relative_variation.begin(), rep.relative_variation.end());
  return rep;
}

struct FidelityRow {
  int resolution = 0;
  double mean_abs = 0.0;  // relative to the global f range
  double max_abs = 0.0;
};

/// Compares direct evaluation with trilinear interpolation of an r^3 lattice
/// sample at each probe. Only the lattice corners of the probed cells are
/// evaluated; trilinear interpolation reads nothing else, so the result equals
/// sampling the whole grid.
template <Model M>
std::vector<FidelityRow> resample_fidelity(const M& model, std::span<const int> resolutions,
                                           std::span<const Vec3d> probes) {
  if (resolutions.empty()) throw UsageError("no resolutions given");
  if (probes.empty()) throw UsageError("no probes given");
  const auto [lo, hi] = global_range(model);
  const double range = hi - lo;
  if (!(range >= 1e-9)) throw DataError("model output is constant over the domain");
  std::vector<double> direct(probes.size());
  model.evaluate(probes, direct, {});

  std::vector<FidelityRow> rows;
  for (int r : resolutions) {
    if (r < 2) throw UsageError("resolution must be at least 2");
    const Dims d = cube(r);
    struct Cell {
      int i, j, k;
      double tx, ty, tz;
    };
    std::vector<Cell> cells(probes.size());
    std::unordered_map<std::size_t, std::size_t> slot;
    std::vector<Vec3d> corner_pts;
    for (std::size_t s = 0; s < probes.size(); ++s) {
      int idx[3];
      double t[3];
      for (std::size_t a = 0; a < 3; ++a) {
        const auto loc = detail::locate(probes[s][a], r);
        if (!loc) throw UsageError("probe lies outside [-1,1]^3");
        idx[a] = loc->first;
        t[a] = loc->second;
      }
      cells[s] = {idx[0], idx[1], idx[2], t[0], t[1], t[2]};
      for (int c = 0; c < 8; ++c) {
        const int i = std::min(idx[0] + (c & 1), r - 1), j = std::min(idx[1] + ((c >> 1) & 1), r - 1),
                  k = std::min(idx[2] + ((c >> 2) & 1), r - 1);
        const std::size_t n = d.index(i, j, k);
        if (slot.emplace(n, corner_pts.size()).second) corner_pts.push_back(voxel_coord(d, i, j, k));
      }
    }
    std::vector<double> corner_vals(corner_pts.size());
    model.evaluate(corner_pts, corner_vals, {});

    FidelityRow row{r, 0.0, 0.0};
    for (std::size_t s = 0; s < probes.size(); ++s) {
      const Cell& c = cells[s];
      auto at = [&](int di, int dj, int dk) {
        const int i = std::min(c.i + di, r - 1), j = std::min(c.j + dj, r - 1), k = std::min(c.k + dk, r - 1);
        return corner_vals[slot.at(d.index(i, j, k))];
      };
      const double c00 = at(0, 0, 0) * (1 - c.tx) + at(1, 0, 0) * c.tx;
      const double c10 = at(0, 1, 0) * (1 - c.tx) + at(1, 1, 0) * c.tx;
      const double c01 = at(0, 0, 1) * (1 - c.tx) + at(1, 0, 1) * c.tx;
      const double c11 = at(0, 1, 1) * (1 - c.tx) + at(1, 1, 1) * c.tx;
      const double c0 = c00 * (1 - c.ty) + c10 * c.ty;
      const double c1 = c01 * (1 - c.ty) + c11 * c.ty;
      const double interp = c0 * (1 - c.tz) + c1 * c.tz;
      const double dev = std::abs(interp - direct[s]) / range;
      row.mean_abs += dev;
      row.max_abs = std::max(row.max_abs, dev);
    }
    row.mean_abs /= static_cast<double>(probes.size());
    rows.push_back(row);
  }
  return rows;
}

/// Uniform random probes in [-1,1]^3.
template <Model M>
std::vector<FidelityRow> resample_fidelity(const M& model, std::span<const int> resolutions, std::size_t probe_count,
                                           std::mt19937_64& rng) {
  if (probe_count < 1) throw UsageError("probe_count must be at least 1");
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Vec3d> probes(probe_count);
  for (auto& p : probes) p = {u(rng), u(rng), u(rng)};
  return resample_fidelity(model, resolutions, std::span<const Vec3d>(probes));
}

}  // namespace nsf
