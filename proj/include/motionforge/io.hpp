#pragma once

#include "motionforge/volume.hpp"

#include "json.hpp"

#include <string>

namespace motionforge {

/// Sidecar header of the raw+JSON volume format.
struct VolumeHeader {
  Dims dims;
  std::size_t n_echo = 1;
  std::string dtype = "c32";  // "c32" interleaved float32 (re, im) or "f32"
  Spacing spacing;
  std::vector<double> te_ms;
  double field_T = 3.0;
  std::array<double, 3> b0_dir{0.0, 0.0, 1.0};
  Domain domain = Domain::image;
  nlohmann::json meta = nlohmann::json::object();  // free-form provenance (method, parameters)

  std::size_t payload_bytes() const;
};

/// `path` names the volume without extension; `<path>.json` and `<path>.raw`
/// are written. A trailing ".json" or ".raw" on `path` is ignored.
std::string sidecar_path(const std::string& path);
std::string payload_path(const std::string& path);

VolumeHeader read_header(const std::string& path);

void write_volume(const std::string& path, const MultiEchoVolume& v, double field_T = 3.0,
                  const std::array<double, 3>& b0_dir = {0, 0, 1}, const nlohmann::json& meta = nlohmann::json::object());
void write_volume(const std::string& path, const RealVolume& v, const nlohmann::json& meta = nlohmann::json::object());

MultiEchoVolume read_multi_echo(const std::string& path, VolumeHeader* header = nullptr);
RealVolume read_real(const std::string& path, VolumeHeader* header = nullptr);

/// Writes `content` to `path` through a temporary file and rename.
void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

}  // namespace motionforge
