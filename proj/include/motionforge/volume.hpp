#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace motionforge {

using cplx = std::complex<double>;

/// Raised when an input violates a documented precondition.
class ValidationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Raised on file-system or payload failures.
class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct Dims {
  int nx = 0;
  int ny = 0;
  int nz = 0;

  std::size_t size() const {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * static_cast<std::size_t>(nz);
  }
  int operator[](int axis) const { return axis == 0 ? nx : (axis == 1 ? ny : nz); }
  bool operator==(const Dims&) const = default;
};

struct Spacing {
  double x = 1.0;
  double y = 1.0;
  double z = 1.0;

  double operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }
  bool operator==(const Spacing&) const = default;
};

enum class Domain { image, kspace };

std::string to_string(Domain d);
Domain domain_from_string(const std::string& s);

/// Dense 3D grid, C-order with x fastest. The zero-frequency / rotation
/// origin of every grid is the voxel at index (nx/2, ny/2, nz/2).
template <class T>
class Volume {
public:
  Volume() = default;
  Volume(Dims dims, Spacing spacing, Domain domain = Domain::image)
      : dims_(dims), spacing_(spacing), domain_(domain) {
    if (dims.nx <= 0 || dims.ny <= 0 || dims.nz <= 0)
      throw ValidationError("volume dims must be positive");
    if (!(spacing.x > 0 && spacing.y > 0 && spacing.z > 0))
      throw ValidationError("volume spacing must be positive");
    data_.assign(dims.size(), T{});
  }
  Volume(Dims dims, Spacing spacing, Domain domain, std::vector<T> data) : Volume(dims, spacing, domain) {
    if (data.size() != dims.size())
      throw ValidationError("volume data length " + std::to_string(data.size()) + " does not match dims (" +
                            std::to_string(dims.size()) + ")");
    data_ = std::move(data);
  }

  const Dims& dims() const { return dims_; }
  const Spacing& spacing() const { return spacing_; }
  Domain domain() const { return domain_; }
  std::size_t size() const { return data_.size(); }

  std::size_t index(int x, int y, int z) const {
    return (static_cast<std::size_t>(z) * dims_.ny + y) * dims_.nx + x;
  }
  T& operator()(int x, int y, int z) { return data_[index(x, y, z)]; }
  const T& operator()(int x, int y, int z) const { return data_[index(x, y, z)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  /// Only the FFT routines flip the tag.
  void set_domain(Domain d) { domain_ = d; }

  bool same_geometry(const Volume& o) const { return dims_ == o.dims_ && spacing_ == o.spacing_; }

private:
  Dims dims_{};
  Spacing spacing_{};
  Domain domain_ = Domain::image;
  std::vector<T> data_;
};

using ComplexVolume = Volume<cplx>;
using RealVolume = Volume<double>;

/// Echoes of one acquisition; all share geometry and domain.
struct MultiEchoVolume {
  std::vector<ComplexVolume> echoes;
  std::vector<double> te_ms;

  std::size_t n_echo() const { return echoes.size(); }
  const Dims& dims() const { return echoes.front().dims(); }
  const Spacing& spacing() const { return echoes.front().spacing(); }
  Domain domain() const { return echoes.front().domain(); }

  void validate() const;
};

struct RigidMotion {
  std::array<double, 3> t_mm{0.0, 0.0, 0.0};
  std::array<double, 3> r_deg{0.0, 0.0, 0.0};

  bool is_zero() const;
  bool has_rotation() const { return r_deg[0] != 0.0 || r_deg[1] != 0.0 || r_deg[2] != 0.0; }
  bool is_finite() const;
  bool operator==(const RigidMotion&) const = default;

  /// Parameters in (tx, ty, tz, rx, ry, rz) order.
  std::array<double, 6> params() const { return {t_mm[0], t_mm[1], t_mm[2], r_deg[0], r_deg[1], r_deg[2]}; }
  static RigidMotion from_params(const std::array<double, 6>& p) {
    return RigidMotion{{p[0], p[1], p[2]}, {p[3], p[4], p[5]}};
  }
};

void require_finite(const ComplexVolume& v, const char* what);
double norm2(const ComplexVolume& v);
RealVolume magnitude(const ComplexVolume& v);

}  // namespace motionforge
