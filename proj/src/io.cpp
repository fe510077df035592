#include "motionforge/io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace motionforge {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string strip_extension(const std::string& path) {
  for (const char* ext : {".json", ".raw"}) {
    const std::string e(ext);
    if (path.size() > e.size() && path.compare(path.size() - e.size(), e.size(), e) == 0)
      return path.substr(0, path.size() - e.size());
  }
  return path;
}

void append_le(std::string& out, float f) {
  std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
  if constexpr (std::endian::native == std::endian::big)
    bits = __builtin_bswap32(bits);
  char bytes[4];
  std::memcpy(bytes, &bits, 4);
  out.append(bytes, 4);
}

float read_le(const char* p) {
  std::uint32_t bits;
  std::memcpy(&bits, p, 4);
  if constexpr (std::endian::native == std::endian::big)
    bits = __builtin_bswap32(bits);
  return std::bit_cast<float>(bits);
}

std::string header_to_json(const VolumeHeader& h, const std::string& payload_name) {
  json j;
  j["dims"] = {h.dims.nx, h.dims.ny, h.dims.nz};
  j["n_echo"] = h.n_echo;
  j["dtype"] = h.dtype;
  j["spacing_mm"] = {h.spacing.x, h.spacing.y, h.spacing.z};
  j["te_ms"] = h.te_ms;
  j["field_T"] = h.field_T;
  j["b0_dir"] = h.b0_dir;
  j["domain"] = to_string(h.domain);
  j["payload"] = payload_name;
  if (!h.meta.empty())
    j["meta"] = h.meta;
  return j.dump(2) + "\n";
}

template <class T>
T field(const json& j, const char* name) {
  if (!j.contains(name))
    throw ValidationError(std::string("volume header: missing field '") + name + "'");
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string("volume header: field '") + name + "' has the wrong type");
  }
}

std::string read_payload(const std::string& path, const VolumeHeader& h) {
  std::string bytes = read_file(payload_path(path));
  if (bytes.size() != h.payload_bytes())
    throw IoError("volume payload " + payload_path(path) + ": expected " + std::to_string(h.payload_bytes()) +
                  " bytes, found " + std::to_string(bytes.size()));
  return bytes;
}

}  // namespace

std::size_t VolumeHeader::payload_bytes() const { return n_echo * dims.size() * (dtype == "c32" ? 8 : 4); }

std::string sidecar_path(const std::string& path) { return strip_extension(path) + ".json"; }
std::string payload_path(const std::string& path) { return strip_extension(path) + ".raw"; }

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad())
    throw IoError("read failed for " + path);
  return ss.str();
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
  }
  const std::string tmp = path + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw IoError("cannot open " + tmp + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out)
      throw IoError("write failed for " + tmp);
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot rename " + tmp + " to " + path);
  }
}

VolumeHeader read_header(const std::string& path) {
  const std::string side = sidecar_path(path);
  if (!fs::exists(side))
    throw IoError("missing sidecar " + side);
  json j;
  try {
    j = json::parse(read_file(side));
  } catch (const json::parse_error& e) {
    throw ValidationError("volume header " + side + ": invalid JSON: " + e.what());
  }
  VolumeHeader h;
  auto dims = field<std::array<int, 3>>(j, "dims");
  h.dims = {dims[0], dims[1], dims[2]};
  if (h.dims.nx <= 0 || h.dims.ny <= 0 || h.dims.nz <= 0)
    throw ValidationError("volume header: field 'dims' must be positive");
  h.n_echo = field<std::size_t>(j, "n_echo");
  if (h.n_echo == 0)
    throw ValidationError("volume header: field 'n_echo' must be >= 1");
  h.dtype = field<std::string>(j, "dtype");
  if (h.dtype != "c32" && h.dtype != "f32")
    throw ValidationError("volume header: unknown dtype '" + h.dtype + "'");
  auto sp = field<std::array<double, 3>>(j, "spacing_mm");
  h.spacing = {sp[0], sp[1], sp[2]};
  if (!(h.spacing.x > 0 && h.spacing.y > 0 && h.spacing.z > 0))
    throw ValidationError("volume header: field 'spacing_mm' must be positive");
  h.te_ms = field<std::vector<double>>(j, "te_ms");
  if (h.te_ms.size() != h.n_echo)
    throw ValidationError("volume header: field 'te_ms' has " + std::to_string(h.te_ms.size()) + " entries for n_echo " +
                          std::to_string(h.n_echo));
  h.field_T = field<double>(j, "field_T");
  h.b0_dir = field<std::array<double, 3>>(j, "b0_dir");
  try {
    h.domain = domain_from_string(field<std::string>(j, "domain"));
  } catch (const ValidationError&) {
    throw ValidationError("volume header: field 'domain' must be \"image\" or \"kspace\"");
  }
  if (j.contains("meta"))
    h.meta = j["meta"];
  return h;
}

void write_volume(const std::string& path, const MultiEchoVolume& v, double field_T, const std::array<double, 3>& b0_dir,
                  const nlohmann::json& meta) {
  v.validate();
  VolumeHeader h;
  h.dims = v.dims();
  h.n_echo = v.n_echo();
  h.dtype = "c32";
  h.spacing = v.spacing();
  h.te_ms = v.te_ms;
  h.field_T = field_T;
  h.b0_dir = b0_dir;
  h.domain = v.domain();
  h.meta = meta;

  std::string payload;
  payload.reserve(h.payload_bytes());
  for (const auto& echo : v.echoes)
    for (const auto& c : echo.data()) {
      append_le(payload, static_cast<float>(c.real()));
      append_le(payload, static_cast<float>(c.imag()));
    }
  write_file_atomic(payload_path(path), payload);
  write_file_atomic(sidecar_path(path), header_to_json(h, fs::path(payload_path(path)).filename().string()));
}

void write_volume(const std::string& path, const RealVolume& v, const nlohmann::json& meta) {
  VolumeHeader h;
  h.dims = v.dims();
  h.n_echo = 1;
  h.dtype = "f32";
  h.spacing = v.spacing();
  h.te_ms = {0.0};
  h.domain = v.domain();
  h.meta = meta;

  std::string payload;
  payload.reserve(h.payload_bytes());
  for (double x : v.data())
    append_le(payload, static_cast<float>(x));
  write_file_atomic(payload_path(path), payload);
  write_file_atomic(sidecar_path(path), header_to_json(h, fs::path(payload_path(path)).filename().string()));
}

MultiEchoVolume read_multi_echo(const std::string& path, VolumeHeader* header) {
  VolumeHeader h = read_header(path);
  if (h.dtype != "c32")
    throw ValidationError("volume " + path + ": dtype is '" + h.dtype + "', expected complex 'c32'");
  const std::string bytes = read_payload(path, h);
  MultiEchoVolume v;
  v.te_ms = h.te_ms;
  const std::size_t n = h.dims.size();
  for (std::size_t e = 0; e < h.n_echo; ++e) {
    ComplexVolume echo(h.dims, h.spacing, h.domain);
    const char* base = bytes.data() + e * n * 8;
    for (std::size_t i = 0; i < n; ++i)
      echo[i] = cplx(read_le(base + 8 * i), read_le(base + 8 * i + 4));
    v.echoes.push_back(std::move(echo));
  }
  v.validate();
  if (header)
    *header = std::move(h);
  return v;
}

RealVolume read_real(const std::string& path, VolumeHeader* header) {
  VolumeHeader h = read_header(path);
  if (h.dtype != "f32")
    throw ValidationError("volume " + path + ": dtype is '" + h.dtype + "', expected real 'f32'");
  if (h.n_echo != 1)
    throw ValidationError("volume " + path + ": field 'n_echo' must be 1 for a real volume");
  const std::string bytes = read_payload(path, h);
  RealVolume v(h.dims, h.spacing, h.domain);
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = read_le(bytes.data() + 4 * i);
  if (header)
    *header = std::move(h);
  return v;
}

}  // namespace motionforge
