#pragma once

#include "motionforge/phantom.hpp"
#include "motionforge/volume.hpp"

#include <string>

namespace motionforge {

struct FieldMap {
  RealVolume b_ppm;
  RealVolume weight;  // per-voxel sum of |S|^2 over echoes (fit confidence)
  RealVolume mask;    // 1 inside, 0 outside
  std::size_t wrapped_voxels = 0;
};

enum class WrapPolicy {
  error,    // throw when any masked voxel wraps
  exclude,  // drop wrapping voxels from the mask (motion-corrupted inputs)
};

struct FitOptions {
  double mask_fraction = 0.05;  // of the maximum first-echo magnitude
  WrapPolicy on_wrap = WrapPolicy::error;
};

/// Magnitude-weighted least-squares slope of the per-echo phase against TE.
/// Throws when adjacent echoes differ by more than pi inside the mask.
FieldMap fit_field(const MultiEchoVolume& mgre, const AcquisitionParams& acq, const FitOptions& opts = {});

enum class DipoleMethod { tkd, tikhonov };

std::string to_string(DipoleMethod m);
DipoleMethod dipole_method_from_string(const std::string& s);

struct ChiMap {
  RealVolume chi_ppm;
  DipoleMethod method = DipoleMethod::tkd;
  double param = 0.2;
  bool empty_mask = false;
};

ChiMap invert_dipole(const FieldMap& field, const RealVolume& kernel, DipoleMethod method, double param);

ChiMap qsm_pipeline(const MultiEchoVolume& mgre, const AcquisitionParams& acq, DipoleMethod method = DipoleMethod::tkd,
                    double param = 0.2, const FitOptions& opts = {});

}  // namespace motionforge
