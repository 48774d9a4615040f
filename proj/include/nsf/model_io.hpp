// Binary model container. Layout, all little-endian:
//   "NSFMODEL" | u32 version | u32 scalar bytes (4 or 8) | u32 hidden_layers |
//   u32 width | f64 omega0 | u64 seed | u64 param count | params | u64 FNV-1a of params
// A JSON manifest next to the file records the same header plus provenance.
#pragma once

#include <array>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "nsf/net.hpp"

namespace nsf {

inline constexpr std::array<char, 8> kModelMagic{'N', 'S', 'F', 'M', 'O', 'D', 'E', 'L'};
inline constexpr std::uint32_t kModelVersion = 1;

namespace detail {

template <class U>
void put_le(std::vector<unsigned char>& out, U value) {
  auto bytes = std::bit_cast<std::array<unsigned char, sizeof(U)>>(value);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.insert(out.end(), bytes.begin(), bytes.end());
}

template <class U>
U get_le(const unsigned char* p) {
  std::array<unsigned char, sizeof(U)> bytes;
  std::memcpy(bytes.data(), p, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<U>(bytes);
}

inline std::uint64_t fnv1a(const unsigned char* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline constexpr std::size_t kModelHeaderBytes = 8 + 4 * 4 + 8 + 8 + 8;

}  // namespace detail

template <class T>
std::vector<unsigned char> encode_model(const StreamNet<T>& net) {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  std::vector<unsigned char> out(kModelMagic.begin(), kModelMagic.end());
  const auto& a = net.arch();
  detail::put_le<std::uint32_t>(out, kModelVersion);
  detail::put_le<std::uint32_t>(out, sizeof(T));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(a.hidden_layers));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(a.width));
  detail::put_le<double>(out, a.omega0);
  detail::put_le<std::uint64_t>(out, net.seed());
  detail::put_le<std::uint64_t>(out, net.params().size());
  const std::size_t payload_start = out.size();
  out.reserve(out.size() + net.params().size() * sizeof(T) + 8);
  for (T v : net.params()) detail::put_le<T>(out, v);
  const std::uint64_t sum = detail::fnv1a(out.data() + payload_start, out.size() - payload_start);
  detail::put_le<std::uint64_t>(out, sum);
  return out;
}

/// Decodes a model stored with either scalar width; values are converted to T
/// when the stored width differs.
template <class T>
StreamNet<T> decode_model(std::span<const unsigned char> bytes) {
  if (bytes.size() < detail::kModelHeaderBytes) throw FormatError("model file is truncated (header)");
  if (std::memcmp(bytes.data(), kModelMagic.data(), kModelMagic.size()) != 0)
    throw FormatError("not a model file (bad magic)");
  const unsigned char* p = bytes.data() + kModelMagic.size();
  const auto version = detail::get_le<std::uint32_t>(p);
  if (version != kModelVersion) throw FormatError("unsupported model version " + std::to_string(version));
  const auto scalar_bytes = detail::get_le<std::uint32_t>(p + 4);
  if (scalar_bytes != 4 && scalar_bytes != 8) throw FormatError("unsupported scalar width in model file");
  Architecture arch;
  arch.hidden_layers = static_cast<int>(detail::get_le<std::uint32_t>(p + 8));
  arch.width = static_cast<int>(detail::get_le<std::uint32_t>(p + 12));
  arch.omega0 = detail::get_le<double>(p + 16);
  const auto seed = detail::get_le<std::uint64_t>(p + 24);
  const auto count = detail::get_le<std::uint64_t>(p + 32);
  try {
    arch.validate();
  } catch (const UsageError& e) {
    throw FormatError(std::string("model header has an invalid architecture: ") + e.what());
  }
  if (count != param_count(arch)) throw FormatError("model parameter count does not match its architecture");
  const std::size_t payload = count * scalar_bytes;
  if (bytes.size() != detail::kModelHeaderBytes + payload + 8) throw FormatError("model file is truncated or has trailing bytes");
  const unsigned char* data = bytes.data() + detail::kModelHeaderBytes;
  if (detail::fnv1a(data, payload) != detail::get_le<std::uint64_t>(data + payload))
    throw FormatError("model checksum mismatch");
  std::vector<T> params(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double v = scalar_bytes == 4 ? static_cast<double>(detail::get_le<float>(data + 4 * i))
                                       : detail::get_le<double>(data + 8 * i);
    params[i] = static_cast<T>(v);
    if (!std::isfinite(params[i])) throw FormatError("model contains non-finite parameters");
  }
  return StreamNet<T>(arch, seed, std::move(params));
}

/// `model.nsf` -> `model.json`; other names get `.json` appended.
inline std::filesystem::path model_manifest_path(const std::filesystem::path& model) {
  std::filesystem::path p = model;
  if (p.extension() == ".nsf") return p.replace_extension(".json");
  p += ".json";
  return p;
}

template <class T>
nlohmann::json model_manifest(const StreamNet<T>& net, const nlohmann::json& provenance = nlohmann::json::object()) {
  const auto& a = net.arch();
  return {{"format", "NSFMODEL"},
          {"version", kModelVersion},
          {"dtype", sizeof(T) == 4 ? "f32le" : "f64le"},
          {"hidden_layers", a.hidden_layers},
          {"width", a.width},
          {"omega0", a.omega0},
          {"seed", net.seed()},
          {"param_count", net.params().size()},
          {"file_bytes", detail::kModelHeaderBytes + net.params().size() * sizeof(T) + 8},
          {"provenance", provenance}};
}

/// Writes the model file and its JSON manifest.
template <class T>
void save_model(const StreamNet<T>& net, const std::filesystem::path& path,
                const nlohmann::json& provenance = nlohmann::json::object()) {
  const auto bytes = encode_model(net);
  {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw IoError("failed writing '" + path.string() + "'");
  }
  std::ofstream ms(model_manifest_path(path), std::ios::trunc);
  if (!ms) throw IoError("cannot write model manifest for '" + path.string() + "'");
  ms << model_manifest(net, provenance).dump(2) << '\n';
}

template <class T = float>
StreamNet<T> load_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open model '" + path.string() + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return decode_model<T>(bytes);
}

}  // namespace nsf
