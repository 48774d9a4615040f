// Raw volume interchange: little-endian f32 payload, x fastest, described by a
// JSON sidecar {"dims":[nx,ny,nz],"components":1|3,"dtype":"f32le","order":"x-fastest"}.
#pragma once

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>

#include "nsf/volume.hpp"

namespace nsf {

struct RawMeta {
  Dims dims;
  int components = 3;

  nlohmann::json to_json() const {
    return {{"dims", {dims.nx, dims.ny, dims.nz}}, {"components", components}, {"dtype", "f32le"},
            {"order", "x-fastest"}};
  }

  static RawMeta from_json(const nlohmann::json& j) {
    try {
      RawMeta m;
      const auto& d = j.at("dims");
      if (!d.is_array() || d.size() != 3) throw FormatError("sidecar dims must have 3 entries");
      m.dims = {d[0].get<int>(), d[1].get<int>(), d[2].get<int>()};
      m.components = j.at("components").get<int>();
      if (j.value("dtype", "f32le") != "f32le") throw FormatError("unsupported dtype (expected f32le)");
      if (j.value("order", "x-fastest") != "x-fastest") throw FormatError("unsupported order (expected x-fastest)");
      if (!m.dims.valid()) throw FormatError("sidecar dims must be positive");
      if (m.components != 1 && m.components != 3) throw FormatError("components must be 1 or 3");
      return m;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("malformed sidecar: ") + e.what());
    }
  }
};

/// `volume.raw` -> `volume.json`; other names get `.json` appended.
inline std::filesystem::path sidecar_path(const std::filesystem::path& raw) {
  std::filesystem::path p = raw;
  if (p.extension() == ".raw") return p.replace_extension(".json");
  p += ".json";
  return p;
}

namespace detail {

inline std::uint32_t to_little(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big)
    v = (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
  return v;
}

inline void write_f32le(std::span<const float> values, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  std::vector<std::uint32_t> words(values.size());
  for (std::size_t n = 0; n < values.size(); ++n) words[n] = to_little(std::bit_cast<std::uint32_t>(values[n]));
  os.write(reinterpret_cast<const char*>(words.data()), static_cast<std::streamsize>(words.size() * 4));
  if (!os) throw IoError("write failed for '" + path.string() + "'");
}

inline std::vector<float> read_f32le(const std::filesystem::path& path, std::size_t expected) {
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec) throw IoError("cannot stat '" + path.string() + "'");
  if (size != expected * 4)
    throw FormatError("'" + path.string() + "' has " + std::to_string(size) + " bytes, expected " +
                      std::to_string(expected * 4));
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  std::vector<std::uint32_t> words(expected);
  is.read(reinterpret_cast<char*>(words.data()), static_cast<std::streamsize>(expected * 4));
  if (!is) throw IoError("short read on '" + path.string() + "'");
  std::vector<float> out(expected);
  for (std::size_t n = 0; n < expected; ++n) {
    out[n] = std::bit_cast<float>(to_little(words[n]));
    if (!std::isfinite(out[n])) throw DataError("non-finite value in '" + path.string() + "'");
  }
  return out;
}

inline void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os << j.dump(2) << '\n';
  if (!os) throw IoError("write failed for '" + path.string() + "'");
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

}  // namespace detail

inline RawMeta read_sidecar(const std::filesystem::path& raw) {
  return RawMeta::from_json(detail::read_json(sidecar_path(raw)));
}

inline VectorField load_raw(const std::filesystem::path& path, const RawMeta& meta) {
  if (meta.components != 3) throw FormatError("vector field needs 3 components");
  const std::vector<float> flat = detail::read_f32le(path, meta.dims.count() * 3);
  std::vector<Vec3f> data(meta.dims.count());
  for (std::size_t n = 0; n < data.size(); ++n) data[n] = {flat[3 * n], flat[3 * n + 1], flat[3 * n + 2]};
  return VectorField(meta.dims, std::move(data));
}

inline VectorField load_raw(const std::filesystem::path& path) { return load_raw(path, read_sidecar(path)); }

inline ScalarField load_raw_scalar(const std::filesystem::path& path, const RawMeta& meta) {
  if (meta.components != 1) throw FormatError("scalar field needs 1 component");
  return ScalarField(meta.dims, detail::read_f32le(path, meta.dims.count()));
}

inline ScalarField load_raw_scalar(const std::filesystem::path& path) {
  return load_raw_scalar(path, read_sidecar(path));
}

inline void save_raw(const VectorField& field, const std::filesystem::path& path) {
  std::vector<float> flat;
  flat.reserve(field.size() * 3);
  for (const auto& v : field.data()) {
    flat.push_back(v.x);
    flat.push_back(v.y);
    flat.push_back(v.z);
  }
  detail::write_f32le(flat, path);
  detail::write_json(RawMeta{field.dims(), 3}.to_json(), sidecar_path(path));
}

inline void save_raw(const ScalarField& field, const std::filesystem::path& path) {
  detail::write_f32le(field.data(), path);
  detail::write_json(RawMeta{field.dims(), 1}.to_json(), sidecar_path(path));
}

}  // namespace nsf
