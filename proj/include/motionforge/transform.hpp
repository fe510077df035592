#pragma once

#include "motionforge/volume.hpp"

#include <array>

namespace motionforge {

using Vec3 = std::array<double, 3>;

struct Mat3 {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  double operator()(int r, int c) const { return m[r * 3 + c]; }
  Vec3 operator*(const Vec3& v) const {
    return {m[0] * v[0] + m[1] * v[1] + m[2] * v[2], m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
            m[6] * v[0] + m[7] * v[1] + m[8] * v[2]};
  }
  Mat3 operator*(const Mat3& o) const;
  Mat3 transposed() const;
};

/// Rz * Ry * Rx, angles in degrees.
Mat3 rotation_matrix(const std::array<double, 3>& r_deg);

/// Physical position (mm) of voxel index i on an axis of n samples.
inline double voxel_position_mm(int i, int n, double spacing) { return (i - n / 2) * spacing; }

/// Physical spatial frequency (cycles/mm) of k-space index i on an axis of n samples.
inline double kspace_frequency(int i, int n, double spacing) { return (i - n / 2) / (n * spacing); }

/// Trilinear sample at fractional index coordinates; samples outside the grid read as zero.
cplx sample_trilinear(const ComplexVolume& v, double px, double py, double pz);
double sample_trilinear(const RealVolume& v, double px, double py, double pz);

/// Resample v at A^-1 r, where A rotates about the grid origin (Rz Ry Rx) and then translates.
ComplexVolume apply_rigid_image(const ComplexVolume& v, const RigidMotion& motion);

/// Multiplies each k-space sample at frequency f by exp(-i 2 pi f . t).
ComplexVolume translate_kspace(const ComplexVolume& k, const std::array<double, 3>& t_mm);

/// Resamples k-space at R^-1 f (trilinear, zero outside), i.e. rotates the object by R.
ComplexVolume rotate_kspace(const ComplexVolume& k, const std::array<double, 3>& r_deg);

/// Evaluates the k-space of a rigidly moved object on individual grid points,
/// given the motion-free k-space. Shared by the simulator and the corrector.
class KSpaceMotionModel {
public:
  KSpaceMotionModel(const Dims& dims, const Spacing& spacing, const RigidMotion& motion);

  /// Value of FFT[v(A^-1 r)] at grid point (ix, iy, iz).
  cplx forward(const ComplexVolume& k, int ix, int iy, int iz) const;

  /// Fractional grid coordinates R^-1 f of point (ix, iy, iz); the point where
  /// a moved-object sample originates in the motion-free k-space.
  Vec3 source_coordinates(int ix, int iy, int iz) const;

  /// exp(-i 2 pi f . t) at (ix, iy, iz).
  cplx translation_phase(int ix, int iy, int iz) const;

  bool rotates() const { return rotates_; }

private:
  Dims dims_;
  Spacing spacing_;
  Mat3 rinv_;
  Vec3 t_mm_;
  bool rotates_;
};

}  // namespace motionforge
