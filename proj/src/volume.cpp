#include "motionforge/volume.hpp"

#include <cmath>

namespace motionforge {

std::string to_string(Domain d) { return d == Domain::image ? "image" : "kspace"; }

Domain domain_from_string(const std::string& s) {
  if (s == "image")
    return Domain::image;
  if (s == "kspace")
    return Domain::kspace;
  throw ValidationError("unknown domain '" + s + "'");
}

void MultiEchoVolume::validate() const {
  if (echoes.empty())
    throw ValidationError("multi-echo volume has no echoes");
  if (te_ms.size() != echoes.size())
    throw ValidationError("te_ms has " + std::to_string(te_ms.size()) + " entries for " +
                          std::to_string(echoes.size()) + " echoes");
  for (std::size_t i = 1; i < echoes.size(); ++i) {
    if (!echoes[i].same_geometry(echoes[0]) || echoes[i].domain() != echoes[0].domain())
      throw ValidationError("echo " + std::to_string(i) + " geometry/domain differs from echo 0");
    if (!(te_ms[i] > te_ms[i - 1]))
      throw ValidationError("te_ms must be strictly increasing");
  }
}

bool RigidMotion::is_zero() const {
  for (int i = 0; i < 3; ++i)
    if (t_mm[i] != 0.0 || r_deg[i] != 0.0)
      return false;
  return true;
}

bool RigidMotion::is_finite() const {
  for (int i = 0; i < 3; ++i)
    if (!std::isfinite(t_mm[i]) || !std::isfinite(r_deg[i]))
      return false;
  return true;
}

void require_finite(const ComplexVolume& v, const char* what) {
  for (const auto& c : v.data())
    if (!std::isfinite(c.real()) || !std::isfinite(c.imag()))
      throw ValidationError(std::string(what) + ": non-finite sample");
}

double norm2(const ComplexVolume& v) {
  double s = 0.0;
  for (const auto& c : v.data())
    s += std::norm(c);
  return s;
}

RealVolume magnitude(const ComplexVolume& v) {
  RealVolume out(v.dims(), v.spacing(), v.domain());
  for (std::size_t i = 0; i < v.size(); ++i)
    out[i] = std::abs(v[i]);
  return out;
}

}  // namespace motionforge
