#include "motionforge/transform.hpp"

#include <cmath>
#include <numbers>

namespace motionforge {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

template <class T>
T trilinear(const Volume<T>& v, double px, double py, double pz) {
  const Dims& d = v.dims();
  const double fx = std::floor(px), fy = std::floor(py), fz = std::floor(pz);
  const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy), z0 = static_cast<int>(fz);
  const double wx = px - fx, wy = py - fy, wz = pz - fz;
  if (x0 < -1 || y0 < -1 || z0 < -1 || x0 >= d.nx || y0 >= d.ny || z0 >= d.nz)
    return T{};
  T acc{};
  for (int dz = 0; dz < 2; ++dz) {
    const int z = z0 + dz;
    const double w_z = dz ? wz : 1.0 - wz;
    if (z < 0 || z >= d.nz || w_z == 0.0)
      continue;
    for (int dy = 0; dy < 2; ++dy) {
      const int y = y0 + dy;
      const double w_yz = w_z * (dy ? wy : 1.0 - wy);
      if (y < 0 || y >= d.ny || w_yz == 0.0)
        continue;
      for (int dx = 0; dx < 2; ++dx) {
        const int x = x0 + dx;
        const double w = w_yz * (dx ? wx : 1.0 - wx);
        if (x < 0 || x >= d.nx || w == 0.0)
          continue;
        acc += w * v(x, y, z);
      }
    }
  }
  return acc;
}

}  // namespace

Mat3 Mat3::operator*(const Mat3& o) const {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k)
        s += (*this)(i, k) * o(k, j);
      r.m[i * 3 + j] = s;
    }
  return r;
}

Mat3 Mat3::transposed() const {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      r.m[i * 3 + j] = (*this)(j, i);
  return r;
}

Mat3 rotation_matrix(const std::array<double, 3>& r_deg) {
  const double a = r_deg[0] * kDegToRad, b = r_deg[1] * kDegToRad, c = r_deg[2] * kDegToRad;
  const double ca = std::cos(a), sa = std::sin(a);
  const double cb = std::cos(b), sb = std::sin(b);
  const double cc = std::cos(c), sc = std::sin(c);
  Mat3 rx{{1, 0, 0, 0, ca, -sa, 0, sa, ca}};
  Mat3 ry{{cb, 0, sb, 0, 1, 0, -sb, 0, cb}};
  Mat3 rz{{cc, -sc, 0, sc, cc, 0, 0, 0, 1}};
  return rz * ry * rx;
}

cplx sample_trilinear(const ComplexVolume& v, double px, double py, double pz) { return trilinear(v, px, py, pz); }

double sample_trilinear(const RealVolume& v, double px, double py, double pz) { return trilinear(v, px, py, pz); }

ComplexVolume apply_rigid_image(const ComplexVolume& v, const RigidMotion& motion) {
  if (v.domain() != Domain::image)
    throw ValidationError("apply_rigid_image: input must be in the image domain");
  if (!motion.is_finite())
    throw ValidationError("apply_rigid_image: non-finite motion parameters");
  if (motion.is_zero())
    return v;

  const Dims& d = v.dims();
  const Spacing& s = v.spacing();
  const Mat3 rinv = rotation_matrix(motion.r_deg).transposed();
  ComplexVolume out(d, s, Domain::image);
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        const Vec3 r{voxel_position_mm(x, d.nx, s.x) - motion.t_mm[0], voxel_position_mm(y, d.ny, s.y) - motion.t_mm[1],
                     voxel_position_mm(z, d.nz, s.z) - motion.t_mm[2]};
        const Vec3 src = rinv * r;
        out(x, y, z) = trilinear(v, src[0] / s.x + d.nx / 2, src[1] / s.y + d.ny / 2, src[2] / s.z + d.nz / 2);
      }
  return out;
}

ComplexVolume translate_kspace(const ComplexVolume& k, const std::array<double, 3>& t_mm) {
  if (k.domain() != Domain::kspace)
    throw ValidationError("translate_kspace: input must be in the k-space domain");
  KSpaceMotionModel model(k.dims(), k.spacing(), RigidMotion{t_mm, {0, 0, 0}});
  ComplexVolume out = k;
  const Dims& d = k.dims();
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x)
        out(x, y, z) *= model.translation_phase(x, y, z);
  return out;
}

ComplexVolume rotate_kspace(const ComplexVolume& k, const std::array<double, 3>& r_deg) {
  if (k.domain() != Domain::kspace)
    throw ValidationError("rotate_kspace: input must be in the k-space domain");
  KSpaceMotionModel model(k.dims(), k.spacing(), RigidMotion{{0, 0, 0}, r_deg});
  if (!model.rotates())
    return k;
  ComplexVolume out(k.dims(), k.spacing(), Domain::kspace);
  const Dims& d = k.dims();
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x)
        out(x, y, z) = model.forward(k, x, y, z);
  return out;
}

KSpaceMotionModel::KSpaceMotionModel(const Dims& dims, const Spacing& spacing, const RigidMotion& motion)
    : dims_(dims),
      spacing_(spacing),
      rinv_(rotation_matrix(motion.r_deg).transposed()),
      t_mm_(motion.t_mm),
      rotates_(motion.has_rotation()) {
  if (!motion.is_finite())
    throw ValidationError("non-finite motion parameters");
}

Vec3 KSpaceMotionModel::source_coordinates(int ix, int iy, int iz) const {
  if (!rotates_)
    return {static_cast<double>(ix), static_cast<double>(iy), static_cast<double>(iz)};
  const Vec3 f{kspace_frequency(ix, dims_.nx, spacing_.x), kspace_frequency(iy, dims_.ny, spacing_.y),
               kspace_frequency(iz, dims_.nz, spacing_.z)};
  const Vec3 g = rinv_ * f;
  return {g[0] * dims_.nx * spacing_.x + dims_.nx / 2, g[1] * dims_.ny * spacing_.y + dims_.ny / 2,
          g[2] * dims_.nz * spacing_.z + dims_.nz / 2};
}

cplx KSpaceMotionModel::translation_phase(int ix, int iy, int iz) const {
  const double phase = -2.0 * std::numbers::pi *
                       (kspace_frequency(ix, dims_.nx, spacing_.x) * t_mm_[0] +
                        kspace_frequency(iy, dims_.ny, spacing_.y) * t_mm_[1] +
                        kspace_frequency(iz, dims_.nz, spacing_.z) * t_mm_[2]);
  return {std::cos(phase), std::sin(phase)};
}

cplx KSpaceMotionModel::forward(const ComplexVolume& k, int ix, int iy, int iz) const {
  cplx value;
  if (rotates_) {
    const Vec3 p = source_coordinates(ix, iy, iz);
    value = trilinear(k, p[0], p[1], p[2]);
  } else {
    value = k(ix, iy, iz);
  }
  if (t_mm_[0] == 0.0 && t_mm_[1] == 0.0 && t_mm_[2] == 0.0)
    return value;
  return value * translation_phase(ix, iy, iz);
}

}  // namespace motionforge
