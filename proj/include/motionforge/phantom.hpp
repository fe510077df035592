#pragma once

#include "motionforge/volume.hpp"

#include <array>
#include <string>
#include <vector>

namespace motionforge {

struct Ellipsoid {
  std::array<double, 3> center_mm{0, 0, 0};  // relative to the grid origin voxel (n/2)
  std::array<double, 3> semi_axes_mm{1, 1, 1};
  double chi_ppm = 0.0;
  double m = 0.0;
  double t2s_ms = 1000.0;
};

struct PhantomSpec {
  Dims dims{64, 64, 64};
  Spacing spacing{1.0, 1.0, 1.0};
  std::vector<Ellipsoid> ellipsoids;
  // Gaussian partial-volume blur of m, chi and R2* (truncated at 3 sigma); 0 keeps hard edges.
  double edge_sigma_mm = 0.0;
};

struct Phantom {
  RealVolume chi_ppm;
  RealVolume m;
  RealVolume t2s_ms;
};

struct AcquisitionParams {
  double field_T = 3.0;
  double gamma_hz_per_T = 42.577478e6;
  std::vector<double> te_ms;
  double tr_ms = 44.0;
  std::array<double, 3> b0_dir{0.0, 0.0, 1.0};

  /// Larmor angular frequency 2 pi gamma B0 in rad/s.
  double omega0() const;
  void validate() const;

  /// 3 T, TE1 = 6.69 ms, dTE = 3.6 ms, 10 echoes, TR = 44 ms.
  static AcquisitionParams standard();
};

/// Susceptibility support must stay this far (fraction of each axis, on each
/// side) from the grid boundary.
inline constexpr double kPaddingMargin = 0.25;
inline constexpr double kBackgroundT2sMs = 1000.0;

/// Rasterizes ellipsoids in order; later ellipsoids overwrite earlier ones.
/// The margin check includes the blur footprint when edge_sigma_mm > 0.
Phantom make_phantom(const PhantomSpec& spec);

/// The default brain-like scene used by the tests, the acceptance suite and the CLI.
PhantomSpec standard_scene(Dims dims = {64, 64, 64}, Spacing spacing = {1.0, 1.0, 1.0});

/// Standard scene with structure positions and susceptibilities jittered by `seed`.
PhantomSpec perturbed_scene(unsigned seed, Dims dims = {64, 64, 64}, Spacing spacing = {1.0, 1.0, 1.0});

PhantomSpec phantom_spec_from_json(const std::string& text);
std::string phantom_spec_to_json(const PhantomSpec& spec);

/// Dipole kernel 1/3 - (k.b)^2/|k|^2 on the centered k-space grid with D(0) = 0.
RealVolume dipole_kernel(const Dims& dims, const Spacing& spacing, const std::array<double, 3>& b0_dir = {0, 0, 1});

struct FieldResult {
  RealVolume b_ppm;
  bool padding_violated = false;
  double imag_residue = 0.0;  // |imag| norm relative to signal norm
};

/// True when every nonzero voxel sits inside the padded interior.
bool respects_padding(const RealVolume& chi);

FieldResult field_from_chi(const RealVolume& chi, const RealVolume& kernel);

/// Motion-free multi-echo signal m exp(-TE/T2*) exp(-i b omega0 TE).
MultiEchoVolume synthesize_mgre(const Phantom& ph, const AcquisitionParams& acq);

/// Same with an already computed field (ppm).
MultiEchoVolume synthesize_mgre(const Phantom& ph, const RealVolume& b_ppm, const AcquisitionParams& acq);

}  // namespace motionforge
