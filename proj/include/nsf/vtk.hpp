// Legacy VTK STRUCTURED_POINTS files with a binary big-endian float payload,
// placed on [-1,1]^3 (ORIGIN -1 -1 -1).
#pragma once

#include <bit>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "nsf/volume.hpp"

namespace nsf {

namespace detail {

inline std::uint32_t to_big(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little)
    v = (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
  return v;
}

/// Shortest round-trip decimal, always with a fractional part ("2.0").
inline std::string vtk_number(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

inline void write_vtk_payload(const std::filesystem::path& path, const Dims& d, const std::string& attribute,
                              const std::string& name, std::span<const float> flat) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os << "# vtk DataFile Version 3.0\n"
     << name << "\n"
     << "BINARY\n"
     << "DATASET STRUCTURED_POINTS\n"
     << "DIMENSIONS " << d.nx << ' ' << d.ny << ' ' << d.nz << '\n'
     << "ORIGIN -1 -1 -1\n"
     << "SPACING " << vtk_number(axis_spacing(d.nx)) << ' ' << vtk_number(axis_spacing(d.ny)) << ' '
     << vtk_number(axis_spacing(d.nz)) << '\n'
     << "POINT_DATA " << d.count() << '\n';
  if (attribute == "SCALARS")
    os << "SCALARS " << name << " float 1\nLOOKUP_TABLE default\n";
  else
    os << "VECTORS " << name << " float\n";
  std::vector<std::uint32_t> words(flat.size());
  for (std::size_t n = 0; n < flat.size(); ++n) words[n] = to_big(std::bit_cast<std::uint32_t>(flat[n]));
  os.write(reinterpret_cast<const char*>(words.data()), static_cast<std::streamsize>(words.size() * 4));
  os << '\n';
  if (!os) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace detail

inline void write_vtk(const ScalarField& field, const std::filesystem::path& path,
                      const std::string& name = "f") {
  detail::write_vtk_payload(path, field.dims(), "SCALARS", name, field.data());
}

inline void write_vtk(const VectorField& field, const std::filesystem::path& path,
                      const std::string& name = "V") {
  std::vector<float> flat;
  flat.reserve(field.size() * 3);
  for (const auto& v : field.data()) {
    flat.push_back(v.x);
    flat.push_back(v.y);
    flat.push_back(v.z);
  }
  detail::write_vtk_payload(path, field.dims(), "VECTORS", name, flat);
}

struct VtkVolume {
  Dims dims;
  int components = 1;
  std::string name;
  std::vector<float> values;  // components interleaved, x fastest
};

/// Reads the files written by write_vtk (binary STRUCTURED_POINTS, one float
/// SCALARS or VECTORS attribute).
inline VtkVolume read_vtk(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  auto next_line = [&]() {
    std::string line;
    if (!std::getline(is, line)) throw FormatError("'" + path.string() + "' ends inside the VTK header");
    return line;
  };
  if (next_line().rfind("# vtk DataFile", 0) != 0) throw FormatError("not a legacy VTK file");
  next_line();
  if (next_line() != "BINARY") throw FormatError("only BINARY VTK files are supported");
  if (next_line() != "DATASET STRUCTURED_POINTS") throw FormatError("only STRUCTURED_POINTS datasets are supported");
  VtkVolume vol;
  std::size_t points = 0;
  for (;;) {
    std::istringstream ls(next_line());
    std::string key;
    ls >> key;
    if (key == "DIMENSIONS") {
      ls >> vol.dims.nx >> vol.dims.ny >> vol.dims.nz;
      if (!ls || !vol.dims.valid()) throw FormatError("bad DIMENSIONS line");
    } else if (key == "ORIGIN" || key == "SPACING") {
      continue;
    } else if (key == "POINT_DATA") {
      ls >> points;
    } else if (key == "SCALARS") {
      std::string type;
      int comps = 1;
      ls >> vol.name >> type;
      if (!(ls >> comps)) comps = 1;
      if (type != "float" || comps != 1) throw FormatError("unsupported SCALARS attribute");
      if (next_line().rfind("LOOKUP_TABLE", 0) != 0) throw FormatError("missing LOOKUP_TABLE line");
      vol.components = 1;
      break;
    } else if (key == "VECTORS") {
      std::string type;
      ls >> vol.name >> type;
      if (type != "float") throw FormatError("unsupported VECTORS attribute");
      vol.components = 3;
      break;
    } else if (!key.empty()) {
      throw FormatError("unexpected VTK header keyword '" + key + "'");
    }
  }
  if (points != vol.dims.count()) throw FormatError("POINT_DATA does not match DIMENSIONS");
  std::vector<std::uint32_t> words(points * static_cast<std::size_t>(vol.components));
  is.read(reinterpret_cast<char*>(words.data()), static_cast<std::streamsize>(words.size() * 4));
  if (!is) throw FormatError("'" + path.string() + "' payload is truncated");
  vol.values.resize(words.size());
  for (std::size_t n = 0; n < words.size(); ++n) vol.values[n] = std::bit_cast<float>(detail::to_big(words[n]));
  return vol;
}

inline ScalarField read_vtk_scalar(const std::filesystem::path& path) {
  VtkVolume v = read_vtk(path);
  if (v.components != 1) throw FormatError("'" + path.string() + "' holds vectors, not scalars");
  return ScalarField(v.dims, std::move(v.values));
}

inline VectorField read_vtk_vector(const std::filesystem::path& path) {
  const VtkVolume v = read_vtk(path);
  if (v.components != 3) throw FormatError("'" + path.string() + "' holds scalars, not vectors");
  std::vector<Vec3f> data(v.dims.count());
  for (std::size_t n = 0; n < data.size(); ++n) data[n] = {v.values[3 * n], v.values[3 * n + 1], v.values[3 * n + 2]};
  return VectorField(v.dims, std::move(data));
}

}  // namespace nsf
