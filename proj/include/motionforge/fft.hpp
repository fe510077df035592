#pragma once

#include "motionforge/volume.hpp"

#include <span>

namespace motionforge {

/// Centered unitary forward transform: zero frequency at (nx/2, ny/2, nz/2),
/// 1/sqrt(N) scaling. Flips the domain tag to kspace.
ComplexVolume fft3(const ComplexVolume& v);

/// Inverse of fft3. Flips the domain tag to image.
ComplexVolume ifft3(const ComplexVolume& v);

/// In-place centered unitary transform on a raw buffer laid out like a Volume.
/// `forward` selects the exponent sign. No validation, no domain bookkeeping.
void centered_fft_inplace(std::span<cplx> data, const Dims& dims, bool forward);

}  // namespace motionforge
