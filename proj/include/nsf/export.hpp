// Sampling a model onto lattices of [-1,1]^3 and writing interchange files.
#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <set>
#include <string>
#include <vector>

#include "nsf/eval.hpp"
#include "nsf/raw_io.hpp"
#include "nsf/vtk.hpp"

namespace nsf {

template <Model M>
ScalarField sample_grid(const M& model, const Dims& dims) {
  if (dims.nx < 2 || dims.ny < 2 || dims.nz < 2) throw UsageError("sampling grid needs at least 2 samples per axis");
  ScalarField out(dims);
  std::vector<Vec3d> pts(out.size());
  for (std::size_t n = 0; n < pts.size(); ++n) pts[n] = out.coord(n);
  std::vector<double> values(pts.size());
  model.evaluate(pts, values, {});
  for (std::size_t n = 0; n < values.size(); ++n) out[n] = static_cast<float>(values[n]);
  return out;
}

enum class ExportOutput { scalar_raw, scalar_vtk, error_raw, error_vtk };

inline std::string to_string(ExportOutput o) {
  switch (o) {
    case ExportOutput::scalar_raw: return "scalar_raw";
    case ExportOutput::scalar_vtk: return "scalar_vtk";
    case ExportOutput::error_raw: return "error_raw";
    case ExportOutput::error_vtk: return "error_vtk";
  }
  return "unknown";
}

inline ExportOutput parse_export_output(const std::string& s) {
  for (auto o : {ExportOutput::scalar_raw, ExportOutput::scalar_vtk, ExportOutput::error_raw, ExportOutput::error_vtk})
    if (to_string(o) == s) return o;
  throw UsageError("unknown export output '" + s + "' (expected scalar_raw, scalar_vtk, error_raw or error_vtk)");
}

inline constexpr int kDefaultExportUpsample = 4;

struct ExportSpec {
  std::vector<Dims> resolutions;  // scalar volumes, one per entry
  std::set<ExportOutput> outputs;
  std::filesystem::path directory = ".";
  std::string stem = "stream";

  /// Four times the training resolution along each axis.
  static std::vector<Dims> default_resolutions(const Dims& training) {
    return {Dims{kDefaultExportUpsample * training.nx, kDefaultExportUpsample * training.ny,
                 kDefaultExportUpsample * training.nz}};
  }

  void validate() const {
    for (const auto& d : resolutions)
      if (d.nx < 2 || d.ny < 2 || d.nz < 2) throw UsageError("export resolution must be at least 2 per axis");
  }
};

inline constexpr int kExportManifestVersion = 1;

inline std::string dims_tag(const Dims& d) {
  if (d.nx == d.ny && d.ny == d.nz) return std::to_string(d.nx);
  return std::to_string(d.nx) + "x" + std::to_string(d.ny) + "x" + std::to_string(d.nz);
}

/// Writes the requested artifacts plus `<stem>_manifest.json` and returns the
/// manifest. Error volumes are evaluated at the vector field's own voxels.
template <Model M>
nlohmann::json export_bundle(const M& model, const VectorField& field, const ExportSpec& spec) {
  spec.validate();
  std::filesystem::create_directories(spec.directory);
  const auto has = [&](ExportOutput o) { return spec.outputs.count(o) > 0; };
  nlohmann::json files = nlohmann::json::array();
  const bool scalars = has(ExportOutput::scalar_raw) || has(ExportOutput::scalar_vtk);
  if (scalars) {
    for (const auto& d : spec.resolutions) {
      const ScalarField f = sample_grid(model, d);
      const auto [lo, hi] = std::minmax_element(f.data().begin(), f.data().end());
      const std::string base = spec.stem + "_f_" + dims_tag(d);
      nlohmann::json entry{{"kind", "scalar"}, {"dims", {d.nx, d.ny, d.nz}}, {"min", *lo}, {"max", *hi}};
      if (has(ExportOutput::scalar_raw)) {
        save_raw(f, spec.directory / (base + ".raw"));
        entry["raw"] = base + ".raw";
        entry["sidecar"] = base + ".json";
      }
      if (has(ExportOutput::scalar_vtk)) {
        write_vtk(f, spec.directory / (base + ".vtk"), "f");
        entry["vtk"] = base + ".vtk";
      }
      files.push_back(entry);
    }
  }
  const auto [lo, hi] = global_range(model);
  const ErrVolume err = err_volume(model, field);
  if (has(ExportOutput::error_raw) || has(ExportOutput::error_vtk)) {
    const Dims& d = field.dims();
    const std::string base = spec.stem + "_err_" + dims_tag(d);
    nlohmann::json entry{{"kind", "error_deg"}, {"dims", {d.nx, d.ny, d.nz}}, {"masked_value", -1.0}};
    if (has(ExportOutput::error_raw)) {
      save_raw(err.degrees, spec.directory / (base + ".raw"));
      entry["raw"] = base + ".raw";
      entry["sidecar"] = base + ".json";
    }
    if (has(ExportOutput::error_vtk)) {
      write_vtk(err.degrees, spec.directory / (base + ".vtk"), "err_deg");
      entry["vtk"] = base + ".vtk";
    }
    files.push_back(entry);
  }
  nlohmann::json outputs = nlohmann::json::array();
  for (auto o : spec.outputs) outputs.push_back(to_string(o));
  nlohmann::json manifest{{"manifest_version", kExportManifestVersion},
                          {"outputs", outputs},
                          {"files", files},
                          {"f_range", {lo, hi}},
                          {"err", err.stats.to_json()}};
  detail::write_json(manifest, spec.directory / (spec.stem + "_manifest.json"));
  return manifest;
}

}  // namespace nsf
