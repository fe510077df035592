#include "motionforge/fft.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

namespace motionforge {
namespace {

// FFTW planning is not thread-safe; execution with the new-array interface is.
// FFTW_ESTIMATE keeps the algorithm choice (and hence roundoff) deterministic.
class PlanCache {
public:
  fftw_plan get(const Dims& d, bool forward) {
    std::lock_guard lock(mutex_);
    auto key = std::make_tuple(d.nx, d.ny, d.nz, forward);
    if (auto it = plans_.find(key); it != plans_.end())
      return it->second;
    auto* buf = fftw_alloc_complex(d.size());
    fftw_plan p = fftw_plan_dft_3d(d.nz, d.ny, d.nx, buf, buf, forward ? FFTW_FORWARD : FFTW_BACKWARD,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(buf);
    plans_.emplace(key, p);
    return p;
  }

  ~PlanCache() {
    for (auto& [key, p] : plans_)
      fftw_destroy_plan(p);
  }

private:
  std::mutex mutex_;
  std::map<std::tuple<int, int, int, bool>, fftw_plan> plans_;
};

PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

// out[(i - shift) mod n] = in[i] along every axis.
void circular_shift(std::span<const cplx> in, std::span<cplx> out, const Dims& d, int sx, int sy, int sz) {
  for (int z = 0; z < d.nz; ++z) {
    int oz = ((z - sz) % d.nz + d.nz) % d.nz;
    for (int y = 0; y < d.ny; ++y) {
      int oy = ((y - sy) % d.ny + d.ny) % d.ny;
      const cplx* src = in.data() + (static_cast<std::size_t>(z) * d.ny + y) * d.nx;
      cplx* dst = out.data() + (static_cast<std::size_t>(oz) * d.ny + oy) * d.nx;
      int split = ((0 - sx) % d.nx + d.nx) % d.nx;  // destination of x = 0
      // x in [0, nx - split) lands at [split, nx); the rest wraps to the front.
      std::copy(src, src + (d.nx - split), dst + split);
      std::copy(src + (d.nx - split), src + d.nx, dst);
    }
  }
}

ComplexVolume transform(const ComplexVolume& v, bool forward) {
  require_finite(v, forward ? "fft3" : "ifft3");
  ComplexVolume out(v.dims(), v.spacing(), forward ? Domain::kspace : Domain::image, v.data());
  centered_fft_inplace(out.data(), v.dims(), forward);
  return out;
}

}  // namespace

void centered_fft_inplace(std::span<cplx> data, const Dims& d, bool forward) {
  const int cx = d.nx / 2, cy = d.ny / 2, cz = d.nz / 2;
  std::vector<cplx> work(d.size());
  // Move the origin (n/2) to index 0, transform, move index 0 back to n/2.
  circular_shift(data, work, d, cx, cy, cz);
  auto* ptr = reinterpret_cast<fftw_complex*>(work.data());
  fftw_execute_dft(plan_cache().get(d, forward), ptr, ptr);
  circular_shift(work, data, d, -cx, -cy, -cz);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d.size()));
  for (auto& c : data)
    c *= scale;
}

ComplexVolume fft3(const ComplexVolume& v) {
  if (v.domain() != Domain::image)
    throw ValidationError("fft3: input must be in the image domain");
  return transform(v, true);
}

ComplexVolume ifft3(const ComplexVolume& v) {
  if (v.domain() != Domain::kspace)
    throw ValidationError("ifft3: input must be in the k-space domain");
  return transform(v, false);
}

}  // namespace motionforge
