#include "motionforge/phantom.hpp"

#include "motionforge/fft.hpp"
#include "motionforge/transform.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace motionforge {
namespace {

using nlohmann::json;

int margin_voxels(int n) { return static_cast<int>(std::ceil(kPaddingMargin * n)); }

int blur_half_width(double sigma_mm, double spacing) {
  return sigma_mm > 0 ? static_cast<int>(std::ceil(3.0 * sigma_mm / spacing)) : 0;
}

void check_inside_margin(const Ellipsoid& e, const Dims& d, const Spacing& s, double sigma_mm, std::size_t which) {
  for (int axis = 0; axis < 3; ++axis) {
    const int n = d[axis];
    const int blur = blur_half_width(sigma_mm, s[axis]);
    const double lo = n / 2 + (e.center_mm[axis] - e.semi_axes_mm[axis]) / s[axis] - blur;
    const double hi = n / 2 + (e.center_mm[axis] + e.semi_axes_mm[axis]) / s[axis] + blur;
    if (lo < margin_voxels(n) || hi > n - margin_voxels(n) - 1)
      throw ValidationError("ellipsoid " + std::to_string(which) + " breaches the " +
                            std::to_string(static_cast<int>(kPaddingMargin * 100)) + "% padding margin on axis " +
                            std::to_string(axis));
  }
}

// Separable truncated Gaussian with edge clamping.
void blur(RealVolume& v, double sigma_mm) {
  const Dims d = v.dims();
  for (int axis = 0; axis < 3; ++axis) {
    const int h = blur_half_width(sigma_mm, v.spacing()[axis]);
    const double sigma = sigma_mm / v.spacing()[axis];
    std::vector<double> w(2 * h + 1);
    double sum = 0.0;
    for (int i = -h; i <= h; ++i)
      sum += w[i + h] = std::exp(-0.5 * i * i / (sigma * sigma));
    for (auto& x : w)
      x /= sum;
    RealVolume out(d, v.spacing(), v.domain());
    const int n = d[axis];
    for (int z = 0; z < d.nz; ++z)
      for (int y = 0; y < d.ny; ++y)
        for (int x = 0; x < d.nx; ++x) {
          const int pos = axis == 0 ? x : axis == 1 ? y : z;
          double acc = 0.0;
          for (int i = -h; i <= h; ++i) {
            const int q = std::clamp(pos + i, 0, n - 1);
            acc += w[i + h] * (axis == 0 ? v(q, y, z) : axis == 1 ? v(x, q, z) : v(x, y, q));
          }
          out(x, y, z) = acc;
        }
    v = std::move(out);
  }
}

}  // namespace

double AcquisitionParams::omega0() const { return 2.0 * std::numbers::pi * gamma_hz_per_T * field_T; }

void AcquisitionParams::validate() const {
  if (!(omega0() > 0))
    throw ValidationError("acquisition: omega0 must be positive");
  if (te_ms.empty())
    throw ValidationError("acquisition: no echo times");
  for (std::size_t i = 1; i < te_ms.size(); ++i)
    if (!(te_ms[i] > te_ms[i - 1]))
      throw ValidationError("acquisition: te_ms must be strictly increasing");
  const double n = std::hypot(b0_dir[0], b0_dir[1], b0_dir[2]);
  if (std::abs(n - 1.0) > 1e-9)
    throw ValidationError("acquisition: b0_dir must be a unit vector");
}

AcquisitionParams AcquisitionParams::standard() {
  AcquisitionParams acq;
  for (int i = 0; i < 10; ++i)
    acq.te_ms.push_back(6.69 + 3.6 * i);
  return acq;
}

Phantom make_phantom(const PhantomSpec& spec) {
  const Dims& d = spec.dims;
  Phantom ph{RealVolume(d, spec.spacing), RealVolume(d, spec.spacing), RealVolume(d, spec.spacing)};
  std::fill(ph.t2s_ms.data().begin(), ph.t2s_ms.data().end(), kBackgroundT2sMs);

  for (std::size_t i = 0; i < spec.ellipsoids.size(); ++i) {
    const Ellipsoid& e = spec.ellipsoids[i];
    for (double a : e.semi_axes_mm)
      if (!(a > 0))
        throw ValidationError("ellipsoid " + std::to_string(i) + ": semi-axes must be positive");
    if (e.m < 0 || !(e.t2s_ms > 0))
      throw ValidationError("ellipsoid " + std::to_string(i) + ": m must be >= 0 and t2s_ms > 0");
    check_inside_margin(e, d, spec.spacing, spec.edge_sigma_mm, i);

    for (int z = 0; z < d.nz; ++z)
      for (int y = 0; y < d.ny; ++y)
        for (int x = 0; x < d.nx; ++x) {
          const double px = (voxel_position_mm(x, d.nx, spec.spacing.x) - e.center_mm[0]) / e.semi_axes_mm[0];
          const double py = (voxel_position_mm(y, d.ny, spec.spacing.y) - e.center_mm[1]) / e.semi_axes_mm[1];
          const double pz = (voxel_position_mm(z, d.nz, spec.spacing.z) - e.center_mm[2]) / e.semi_axes_mm[2];
          if (px * px + py * py + pz * pz <= 1.0) {
            ph.chi_ppm(x, y, z) = e.chi_ppm;
            ph.m(x, y, z) = e.m;
            ph.t2s_ms(x, y, z) = e.t2s_ms;
          }
        }
  }

  if (spec.edge_sigma_mm > 0) {
    blur(ph.m, spec.edge_sigma_mm);
    blur(ph.chi_ppm, spec.edge_sigma_mm);
    // Relaxation rates mix linearly across a partial-volume boundary.
    for (auto& t : ph.t2s_ms.data())
      t = 1.0 / t;
    blur(ph.t2s_ms, spec.edge_sigma_mm);
    for (auto& t : ph.t2s_ms.data())
      t = 1.0 / t;
  }
  return ph;
}

PhantomSpec standard_scene(Dims dims, Spacing spacing) {
  // Designed for a 64 mm field of view; coordinates scale with the grid extent.
  const double sx = dims.nx * spacing.x / 64.0, sy = dims.ny * spacing.y / 64.0, sz = dims.nz * spacing.z / 64.0;
  auto ell = [&](std::array<double, 3> c, std::array<double, 3> a, double chi, double m, double t2s) {
    return Ellipsoid{{c[0] * sx, c[1] * sy, c[2] * sz}, {a[0] * sx, a[1] * sy, a[2] * sz}, chi, m, t2s};
  };
  PhantomSpec spec;
  spec.dims = dims;
  spec.spacing = spacing;
  spec.ellipsoids = {
      ell({0, 0, 0}, {12, 11.5, 11}, 0.0, 0.8, 60),        // parenchyma
      ell({0, 0, 0}, {10.5, 10, 9.5}, 0.01, 0.7, 55),      // cortex boundary
      ell({-5, 3, 2}, {4, 3, 3}, 0.08, 0.55, 30),          // iron-rich nucleus
      ell({5, -3, -2}, {3, 4, 3}, 0.06, 0.6, 35),          // second nucleus
      ell({2, 1, -5}, {2, 5, 3}, -0.02, 1.0, 200),         // ventricle
      ell({0, -7, 4}, {3, 2.5, 3}, -0.04, 0.9, 70),        // white-matter tract
      ell({0, 7, 0}, {1.5, 1.5, 6}, 0.1, 0.4, 20),         // vein
  };
  // One-voxel edge blur, narrowed on small grids until its 3-sigma footprint
  // around the outer shell fits inside the padding margin.
  double sigma = std::min({spacing.x, spacing.y, spacing.z});
  for (int axis = 0; axis < 3; ++axis) {
    const int n = dims[axis];
    const double edge = n / 2 + spec.ellipsoids[0].semi_axes_mm[axis] / spacing[axis];
    const double slack = std::floor(n - margin_voxels(n) - 1 - edge + 1e-9);
    sigma = std::min(sigma, std::max(0.0, slack) * spacing[axis] / 3.0 * (1.0 - 1e-9));
  }
  spec.edge_sigma_mm = sigma;
  return spec;
}

PhantomSpec perturbed_scene(unsigned seed, Dims dims, Spacing spacing) {
  PhantomSpec spec = standard_scene(dims, spacing);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> shift(-1.5, 1.5);
  std::uniform_real_distribution<double> gain(0.8, 1.2);
  // The two outer shells stay fixed so the margin check cannot fail.
  for (std::size_t i = 2; i < spec.ellipsoids.size(); ++i) {
    Ellipsoid& e = spec.ellipsoids[i];
    for (int axis = 0; axis < 3; ++axis)
      e.center_mm[axis] += shift(rng) * spacing[axis];
    e.chi_ppm *= gain(rng);
    e.m *= gain(rng);
  }
  return spec;
}

PhantomSpec phantom_spec_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("phantom spec: invalid JSON: ") + e.what());
  }
  try {
    PhantomSpec spec;
    auto dims = j.at("dims").get<std::array<int, 3>>();
    auto sp = j.at("spacing_mm").get<std::array<double, 3>>();
    spec.dims = {dims[0], dims[1], dims[2]};
    spec.spacing = {sp[0], sp[1], sp[2]};
    spec.edge_sigma_mm = j.value("edge_sigma_mm", 0.0);
    for (const auto& e : j.value("ellipsoids", json::array())) {
      Ellipsoid el;
      el.center_mm = e.at("center_mm").get<std::array<double, 3>>();
      el.semi_axes_mm = e.at("semi_axes_mm").get<std::array<double, 3>>();
      el.chi_ppm = e.at("chi_ppm").get<double>();
      el.m = e.at("m").get<double>();
      el.t2s_ms = e.at("t2s_ms").get<double>();
      spec.ellipsoids.push_back(el);
    }
    return spec;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("phantom spec: ") + e.what());
  }
}

std::string phantom_spec_to_json(const PhantomSpec& spec) {
  json j;
  j["dims"] = {spec.dims.nx, spec.dims.ny, spec.dims.nz};
  j["spacing_mm"] = {spec.spacing.x, spec.spacing.y, spec.spacing.z};
  if (spec.edge_sigma_mm > 0)
    j["edge_sigma_mm"] = spec.edge_sigma_mm;
  j["ellipsoids"] = json::array();
  for (const auto& e : spec.ellipsoids)
    j["ellipsoids"].push_back({{"center_mm", e.center_mm},
                               {"semi_axes_mm", e.semi_axes_mm},
                               {"chi_ppm", e.chi_ppm},
                               {"m", e.m},
                               {"t2s_ms", e.t2s_ms}});
  return j.dump(2);
}

RealVolume dipole_kernel(const Dims& dims, const Spacing& spacing, const std::array<double, 3>& b0_dir) {
  if (dims.nx < 4 || dims.ny < 4 || dims.nz < 4)
    throw ValidationError("dipole_kernel: dims must be >= 4 per axis");
  RealVolume d(dims, spacing, Domain::kspace);
  for (int z = 0; z < dims.nz; ++z) {
    const double kz = kspace_frequency(z, dims.nz, spacing.z);
    for (int y = 0; y < dims.ny; ++y) {
      const double ky = kspace_frequency(y, dims.ny, spacing.y);
      for (int x = 0; x < dims.nx; ++x) {
        const double kx = kspace_frequency(x, dims.nx, spacing.x);
        const double k2 = kx * kx + ky * ky + kz * kz;
        if (k2 == 0.0)
          continue;
        const double kb = kx * b0_dir[0] + ky * b0_dir[1] + kz * b0_dir[2];
        d(x, y, z) = 1.0 / 3.0 - kb * kb / k2;
      }
    }
  }
  return d;
}

bool respects_padding(const RealVolume& chi) {
  const Dims& d = chi.dims();
  const int mx = margin_voxels(d.nx), my = margin_voxels(d.ny), mz = margin_voxels(d.nz);
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        const bool inside = x >= mx && x < d.nx - mx && y >= my && y < d.ny - my && z >= mz && z < d.nz - mz;
        if (!inside && chi(x, y, z) != 0.0)
          return false;
      }
  return true;
}

FieldResult field_from_chi(const RealVolume& chi, const RealVolume& kernel) {
  if (!chi.same_geometry(kernel))
    throw ValidationError("field_from_chi: kernel geometry does not match chi");
  ComplexVolume c(chi.dims(), chi.spacing(), Domain::image);
  for (std::size_t i = 0; i < chi.size(); ++i)
    c[i] = chi[i];
  ComplexVolume k = fft3(c);
  for (std::size_t i = 0; i < k.size(); ++i)
    k[i] *= kernel[i];
  ComplexVolume b = ifft3(k);

  FieldResult res{RealVolume(chi.dims(), chi.spacing()), !respects_padding(chi), 0.0};
  double re2 = 0.0, im2 = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    res.b_ppm[i] = b[i].real();
    re2 += b[i].real() * b[i].real();
    im2 += b[i].imag() * b[i].imag();
  }
  res.imag_residue = re2 > 0 ? std::sqrt(im2 / re2) : 0.0;
  return res;
}

MultiEchoVolume synthesize_mgre(const Phantom& ph, const AcquisitionParams& acq) {
  acq.validate();
  const RealVolume kernel = dipole_kernel(ph.chi_ppm.dims(), ph.chi_ppm.spacing(), acq.b0_dir);
  return synthesize_mgre(ph, field_from_chi(ph.chi_ppm, kernel).b_ppm, acq);
}

MultiEchoVolume synthesize_mgre(const Phantom& ph, const RealVolume& b_ppm, const AcquisitionParams& acq) {
  acq.validate();
  if (!ph.m.same_geometry(b_ppm) || !ph.m.same_geometry(ph.t2s_ms) || !ph.m.same_geometry(ph.chi_ppm))
    throw ValidationError("synthesize_mgre: phantom volumes and field must share geometry");

  const double w0 = acq.omega0() * 1e-6;  // rad/s per ppm
  const double te_max_s = acq.te_ms.back() * 1e-3;
  std::size_t at_risk = 0;
  for (std::size_t i = 0; i < b_ppm.size(); ++i)
    if (std::abs(b_ppm[i] * w0 * te_max_s) >= std::numbers::pi)
      ++at_risk;
  if (at_risk > 0)
    throw ValidationError("synthesize_mgre: wrap risk, |phase| >= pi at the last echo in " + std::to_string(at_risk) +
                          " voxels");

  MultiEchoVolume out;
  out.te_ms = acq.te_ms;
  for (double te : acq.te_ms) {
    ComplexVolume echo(ph.m.dims(), ph.m.spacing(), Domain::image);
    const double te_s = te * 1e-3;
    for (std::size_t i = 0; i < echo.size(); ++i) {
      const double mag = ph.m[i] * std::exp(-te / ph.t2s_ms[i]);
      echo[i] = std::polar(mag, -b_ppm[i] * w0 * te_s);
    }
    out.echoes.push_back(std::move(echo));
  }
  return out;
}

}  // namespace motionforge
