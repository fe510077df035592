#include "doctest.h"
#include "support.hpp"

#include "motionforge/fft.hpp"
#include "motionforge/phantom.hpp"

#include <set>

using namespace motionforge;
using namespace testsupport;

namespace {

PhantomSpec sphere_spec(int n, double radius, double chi, std::array<double, 3> center = {0, 0, 0}) {
  PhantomSpec spec;
  spec.dims = {n, n, n};
  spec.ellipsoids.push_back({center, {radius, radius, radius}, chi, 1.0, 50.0});
  return spec;
}

Phantom uniform_phantom(const Dims& d, double m, double t2s) {
  Phantom ph{RealVolume(d, {1, 1, 1}), RealVolume(d, {1, 1, 1}), RealVolume(d, {1, 1, 1})};
  for (std::size_t i = 0; i < d.size(); ++i) {
    ph.m[i] = m;
    ph.t2s_ms[i] = t2s;
  }
  return ph;
}

}  // namespace

TEST_CASE("empty phantom is all background") {
  PhantomSpec spec;
  spec.dims = {16, 16, 16};
  const Phantom ph = make_phantom(spec);
  for (std::size_t i = 0; i < ph.m.size(); ++i) {
    CHECK(ph.m[i] == 0.0);
    CHECK(ph.chi_ppm[i] == 0.0);
    CHECK(ph.t2s_ms[i] == kBackgroundT2sMs);
  }
}

TEST_CASE("sphere voxel count matches its volume") {
  const Phantom ph = make_phantom(sphere_spec(64, 8.0, 0.1));
  std::size_t inside = 0;
  for (double v : ph.chi_ppm.data())
    inside += v == 0.1;
  const double expected = 4.0 / 3.0 * std::numbers::pi * 512.0;
  CHECK(std::abs(inside - expected) / expected <= 0.02);
}

TEST_CASE("two disjoint spheres give exactly two susceptibility levels") {
  PhantomSpec spec = sphere_spec(32, 3.0, 0.05, {-4, 0, 0});
  spec.ellipsoids.push_back({{4, 0, 0}, {3, 3, 3}, -0.03, 0.5, 40.0});
  const Phantom ph = make_phantom(spec);
  std::set<double> levels;
  for (double v : ph.chi_ppm.data())
    if (v != 0.0)
      levels.insert(v);
  CHECK(levels == std::set<double>{-0.03, 0.05});
}

TEST_CASE("later ellipsoids overwrite earlier ones") {
  PhantomSpec spec = sphere_spec(32, 6.0, 0.05);
  spec.ellipsoids.push_back({{0, 0, 0}, {2, 2, 2}, 0.2, 0.3, 20.0});
  const Phantom ph = make_phantom(spec);
  CHECK(ph.chi_ppm(16, 16, 16) == 0.2);
  CHECK(ph.m(16, 16, 16) == 0.3);
  CHECK(ph.t2s_ms(16, 16, 16) == 20.0);
  CHECK(ph.chi_ppm(16, 16, 20) == 0.05);
}

TEST_CASE("ellipsoids breaching the padding margin are rejected") {
  CHECK_THROWS_AS(make_phantom(sphere_spec(32, 9.0, 0.1)), ValidationError);
  CHECK_THROWS_AS(make_phantom(sphere_spec(32, 3.0, 0.1, {0, 0, 6})), ValidationError);
  PhantomSpec blurred = sphere_spec(32, 6.0, 0.1);
  CHECK_NOTHROW(make_phantom(blurred));
  blurred.edge_sigma_mm = 1.0;
  CHECK_THROWS_AS(make_phantom(blurred), ValidationError);
}

TEST_CASE("standard scenes fit their grids and stay below the wrap limit") {
  for (int n : {24, 32, 48, 64}) {
    const PhantomSpec spec = standard_scene({n, n, n});
    const Phantom ph = make_phantom(spec);
    CHECK(respects_padding(ph.chi_ppm));
    const auto acq = AcquisitionParams::standard();
    const auto b = field_from_chi(ph.chi_ppm, dipole_kernel(spec.dims, spec.spacing)).b_ppm;
    double worst = 0;
    for (double v : b.data())
      worst = std::max(worst, std::abs(v) * acq.omega0() * 1e-6 * acq.te_ms.back() * 1e-3);
    CHECK(worst < 0.9 * std::numbers::pi);
  }
}

TEST_CASE("perturbed scenes are deterministic per seed") {
  const auto a = phantom_spec_to_json(perturbed_scene(3));
  CHECK(a == phantom_spec_to_json(perturbed_scene(3)));
  CHECK(a != phantom_spec_to_json(perturbed_scene(4)));
  CHECK_NOTHROW(make_phantom(perturbed_scene(4)));
}

TEST_CASE("phantom spec JSON round trip") {
  const PhantomSpec spec = standard_scene({32, 32, 32}, {1.0, 1.0, 1.5});
  const PhantomSpec back = phantom_spec_from_json(phantom_spec_to_json(spec));
  CHECK(back.dims == spec.dims);
  CHECK(back.spacing == spec.spacing);
  CHECK(back.edge_sigma_mm == spec.edge_sigma_mm);
  REQUIRE(back.ellipsoids.size() == spec.ellipsoids.size());
  CHECK(back.ellipsoids[3].center_mm == spec.ellipsoids[3].center_mm);
  CHECK(back.ellipsoids[3].chi_ppm == spec.ellipsoids[3].chi_ppm);
  CHECK_THROWS(phantom_spec_from_json(R"({"dims": [8, 8], "spacing_mm": [1, 1, 1], "ellipsoids": []})"));
}

TEST_CASE("dipole kernel: on-axis, equatorial, magic angle and origin values") {
  const RealVolume d = dipole_kernel({8, 8, 8}, {1, 1, 1});
  CHECK(d(4, 4, 4) == 0.0);
  CHECK(d(4, 4, 6) == doctest::Approx(-2.0 / 3.0).epsilon(1e-15));
  CHECK(d(6, 3, 4) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(std::abs(d(5, 5, 5)) < 1e-15);
  CHECK(std::abs(d(3, 5, 3)) < 1e-15);
  CHECK_THROWS_AS(dipole_kernel({3, 8, 8}, {1, 1, 1}), ValidationError);
}

TEST_CASE("dipole kernel: range, symmetry and zero mean") {
  const int n = 32;
  const RealVolume d = dipole_kernel({n, n, n}, {1, 1, 1});
  double sum = 0;
  for (int z = 0; z < n; ++z)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        const double v = d(x, y, z);
        CHECK(v >= -2.0 / 3.0 - 1e-15);
        CHECK(v <= 1.0 / 3.0 + 1e-15);
        sum += v;
        if (x > 0 && y > 0 && z > 0)
          CHECK(v == d(n - x, n - y, n - z));
      }
  CHECK(std::abs(sum / d.size()) <= 1e-3);
}

TEST_CASE("field of a uniform susceptibility is zero") {
  RealVolume chi({16, 16, 16}, {1, 1, 1});
  for (auto& v : chi.data())
    v = 0.1;
  const FieldResult f = field_from_chi(chi, dipole_kernel(chi.dims(), chi.spacing()));
  CHECK(f.padding_violated);
  for (double v : f.b_ppm.data())
    CHECK(std::abs(v) < 1e-15);
}

TEST_CASE("field of a single voxel matches the explicit dipole sum") {
  const int n = 16;
  RealVolume chi({n, n, n}, {1, 1, 1});
  chi(7, 9, 8) = 1.0;
  const FieldResult f = field_from_chi(chi, dipole_kernel(chi.dims(), chi.spacing()));
  CHECK_FALSE(f.padding_violated);
  CHECK(f.imag_residue <= 1e-6);
  // b(r) = (1/N) sum_k D(k) exp(i 2 pi k . (r - r0)), D evaluated from its formula.
  const std::array<std::array<int, 3>, 4> probes{{{7, 9, 8}, {7, 9, 12}, {3, 9, 8}, {10, 4, 2}}};
  for (const auto& p : probes) {
    cplx acc = 0;
    for (int kz = -n / 2; kz < n / 2; ++kz)
      for (int ky = -n / 2; ky < n / 2; ++ky)
        for (int kx = -n / 2; kx < n / 2; ++kx) {
          const double k2 = kx * kx + ky * ky + kz * kz;
          const double dk = k2 == 0 ? 0.0 : 1.0 / 3.0 - kz * kz / k2;
          const double ph = 2 * std::numbers::pi * (kx * (p[0] - 7) + ky * (p[1] - 9) + kz * (p[2] - 8)) / n;
          acc += dk * std::polar(1.0, ph);
        }
    CHECK(std::abs(f.b_ppm(p[0], p[1], p[2]) - acc.real() / (n * n * n)) <= 1e-8);
  }
}

TEST_CASE("field_from_chi is linear") {
  const Dims d{16, 16, 16};
  const RealVolume kernel = dipole_kernel(d, {1, 1, 1});
  RealVolume a = random_real(d, 1), b = random_real(d, 2), mix(d, {1, 1, 1});
  for (std::size_t i = 0; i < mix.size(); ++i)
    mix[i] = 2.0 * a[i] - 0.5 * b[i];
  const auto fa = field_from_chi(a, kernel).b_ppm, fb = field_from_chi(b, kernel).b_ppm;
  const auto fm = field_from_chi(mix, kernel).b_ppm;
  double num = 0, den = 0;
  for (std::size_t i = 0; i < mix.size(); ++i) {
    const double ref = 2.0 * fa[i] - 0.5 * fb[i];
    num += (fm[i] - ref) * (fm[i] - ref);
    den += ref * ref;
  }
  CHECK(std::sqrt(num / den) <= 1e-6);
}

TEST_CASE("sphere field matches the uniformly magnetized sphere outside 1.5 radii") {
  const int n = 64;
  const double a = 6.0, chi = 0.1;
  const Phantom ph = make_phantom(sphere_spec(n, a, chi));
  const FieldResult f = field_from_chi(ph.chi_ppm, dipole_kernel(ph.chi_ppm.dims(), ph.chi_ppm.spacing()));
  CHECK_FALSE(f.padding_violated);
  const int c = n / 2;
  for (int r = 9; r <= 14; ++r) {
    const double scale = chi / 3.0 * a * a * a / (r * r * r);
    // Along B0 (theta = 0) the field is 2 scale; on the equator it is -scale.
    CHECK(std::abs(f.b_ppm(c, c, c + r) - 2 * scale) <= 0.05 * 2 * scale);
    CHECK(std::abs(f.b_ppm(c, c, c - r) - 2 * scale) <= 0.05 * 2 * scale);
    CHECK(std::abs(f.b_ppm(c + r, c, c) + scale) <= 0.05 * scale);
    CHECK(std::abs(f.b_ppm(c, c - r, c) + scale) <= 0.05 * scale);
  }
  CHECK(std::abs(f.b_ppm(c, c, c)) <= 0.05 * 2 * chi / 3.0);
}

TEST_CASE("synthesized signal at TE = 0 is the magnitude with zero phase") {
  const Dims d{8, 8, 8};
  Phantom ph = uniform_phantom(d, 0.7, 40.0);
  RealVolume b(d, {1, 1, 1});
  for (auto& v : b.data())
    v = 0.05;
  AcquisitionParams acq;
  acq.te_ms = {0.0, 5.0};
  const auto s = synthesize_mgre(ph, b, acq);
  for (const auto& c : s.echoes[0].data())
    CHECK(c == cplx(0.7, 0.0));
}

TEST_CASE("synthesized signal matches direct evaluation of the signal model") {
  const Dims d{8, 8, 8};
  Phantom ph = uniform_phantom(d, 1.0, 50.0);
  RealVolume b(d, {1, 1, 1});
  for (auto& v : b.data())
    v = 0.1;
  AcquisitionParams acq;
  acq.te_ms = {6.69};
  const cplx s = synthesize_mgre(ph, b, acq).echoes[0](2, 3, 4);
  CHECK(std::abs(s) == doctest::Approx(0.8748).epsilon(1e-4));
  CHECK(std::arg(s) == doctest::Approx(-0.537).epsilon(1e-3));
}

TEST_CASE("zero field gives real, decaying echoes") {
  const PhantomSpec spec = sphere_spec(16, 3.0, 0.0);
  const auto s = synthesize_mgre(make_phantom(spec), AcquisitionParams::standard());
  for (std::size_t e = 0; e < s.n_echo(); ++e)
    for (std::size_t i = 0; i < s.echoes[e].size(); ++i) {
      CHECK(s.echoes[e][i].imag() == 0.0);
      if (e > 0 && s.echoes[0][i] != cplx{})
        CHECK(s.echoes[e][i].real() < s.echoes[e - 1][i].real());
    }
}

TEST_CASE("magnitude decreases with TE wherever m > 0") {
  const Phantom ph = make_phantom(standard_scene({32, 32, 32}));
  const auto s = synthesize_mgre(ph, AcquisitionParams::standard());
  for (std::size_t i = 0; i < ph.m.size(); ++i) {
    if (ph.m[i] <= 0)
      continue;
    for (std::size_t e = 1; e < s.n_echo(); ++e)
      REQUIRE(std::abs(s.echoes[e][i]) < std::abs(s.echoes[e - 1][i]));
  }
}

TEST_CASE("fields that would wrap by the last echo are rejected") {
  const Dims d{8, 8, 8};
  Phantom ph = uniform_phantom(d, 1.0, 50.0);
  RealVolume b(d, {1, 1, 1});
  b(4, 4, 4) = 2.0;
  CHECK_THROWS_WITH_AS(synthesize_mgre(ph, b, AcquisitionParams::standard()), doctest::Contains("wrap risk"),
                       ValidationError);
}

TEST_CASE("acquisition parameters are validated") {
  AcquisitionParams acq = AcquisitionParams::standard();
  CHECK(acq.te_ms.size() == 10);
  CHECK(acq.te_ms[0] == 6.69);
  CHECK(acq.te_ms[1] == doctest::Approx(10.29));
  CHECK(acq.tr_ms == 44.0);
  CHECK(acq.omega0() == doctest::Approx(2 * std::numbers::pi * 42.577478e6 * 3.0));
  acq.b0_dir = {0, 0, 2};
  CHECK_THROWS_AS(acq.validate(), ValidationError);
  acq = AcquisitionParams::standard();
  acq.te_ms = {5, 4};
  CHECK_THROWS_AS(acq.validate(), ValidationError);
}
