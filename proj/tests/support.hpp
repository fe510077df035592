#pragma once

#include "motionforge/motion.hpp"
#include "motionforge/volume.hpp"

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>

namespace testsupport {

using namespace motionforge;

inline ComplexVolume random_volume(const Dims& d, std::uint64_t seed, Spacing s = {1, 1, 1}) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  ComplexVolume v(d, s);
  for (auto& c : v.data())
    c = {n(rng), n(rng)};
  return v;
}

inline RealVolume random_real(const Dims& d, std::uint64_t seed, Spacing s = {1, 1, 1}) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RealVolume v(d, s);
  for (auto& x : v.data())
    x = u(rng);
  return v;
}

inline MultiEchoVolume single_echo(ComplexVolume v) {
  MultiEchoVolume m;
  m.echoes.push_back(std::move(v));
  m.te_ms = {5.0};
  return m;
}

inline double rel_err(const ComplexVolume& a, const ComplexVolume& b) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += std::norm(a[i] - b[i]);
    den += std::norm(b[i]);
  }
  return std::sqrt(num / den);
}

inline double max_abs_diff(const ComplexVolume& a, const ComplexVolume& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Centered unitary DFT by explicit triple sum, with an optional per-axis
// offset added to the spatial index (shifted-exponent oracle).
inline ComplexVolume brute_dft(const ComplexVolume& v, int sign = -1, std::array<double, 3> shift = {0, 0, 0}) {
  const Dims& d = v.dims();
  ComplexVolume out(d, v.spacing(), sign < 0 ? Domain::kspace : Domain::image);
  const double pi2 = 2.0 * std::numbers::pi;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d.size()));
  for (int kz = 0; kz < d.nz; ++kz)
    for (int ky = 0; ky < d.ny; ++ky)
      for (int kx = 0; kx < d.nx; ++kx) {
        cplx acc = 0;
        for (int z = 0; z < d.nz; ++z)
          for (int y = 0; y < d.ny; ++y)
            for (int x = 0; x < d.nx; ++x) {
              const double ph = pi2 * ((kx - d.nx / 2) * (x - d.nx / 2 + shift[0]) / d.nx +
                                       (ky - d.ny / 2) * (y - d.ny / 2 + shift[1]) / d.ny +
                                       (kz - d.nz / 2) * (z - d.nz / 2 + shift[2]) / d.nz);
              acc += v(x, y, z) * std::polar(1.0, sign * ph);
            }
        out(kx, ky, kz) = acc * scale;
      }
  return out;
}

// Integer circular shift: out[(i + t) mod n] = in[i].
inline ComplexVolume circshift(const ComplexVolume& v, int tx, int ty, int tz) {
  const Dims& d = v.dims();
  ComplexVolume out(d, v.spacing(), v.domain());
  auto wrap = [](int i, int n) { return ((i % n) + n) % n; };
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x)
        out(wrap(x + tx, d.nx), wrap(y + ty, d.ny), wrap(z + tz, d.nz)) = v(x, y, z);
  return out;
}

// Motion corruption by brute force: every motion state moves the object by explicit
// DFT with a translated exponent; its lines are kept through a mask.
inline ComplexVolume brute_corrupt_translation(const ComplexVolume& img, const MotionTrajectory& traj,
                                               const SamplingSchedule& sched) {
  const Dims& d = img.dims();
  ComplexVolume k(d, img.spacing(), Domain::kspace);
  for (const auto& state : motion_states(traj)) {
    const auto& t = state.pose.t_mm;
    const Spacing& s = img.spacing();
    // The moved object v(r - t) has spectrum sum_x v(x) exp(-i 2 pi f (x + t)).
    const ComplexVolume moved = brute_dft(img, -1, {t[0] / s.x, t[1] / s.y, t[2] / s.z});
    for (std::size_t tr : state.trs) {
      const Line& l = sched.order[tr];
      for (int kx = 0; kx < d.nx; ++kx)
        k(kx, l.ky, l.kz) = moved(kx, l.ky, l.kz);
    }
  }
  return brute_dft(k, +1);
}

inline std::string temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("motionforge_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

}  // namespace testsupport
