#include "motionforge/qsm.hpp"

#include "motionforge/fft.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace motionforge {

std::string to_string(DipoleMethod m) { return m == DipoleMethod::tkd ? "tkd" : "tikhonov"; }

DipoleMethod dipole_method_from_string(const std::string& s) {
  if (s == "tkd")
    return DipoleMethod::tkd;
  if (s == "tikhonov")
    return DipoleMethod::tikhonov;
  throw ValidationError("unknown dipole inversion method '" + s + "'");
}

FieldMap fit_field(const MultiEchoVolume& mgre, const AcquisitionParams& acq, const FitOptions& opts) {
  mgre.validate();
  acq.validate();
  if (mgre.domain() != Domain::image)
    throw ValidationError("fit_field: input must be in the image domain");
  if (mgre.te_ms.size() != acq.te_ms.size() || !std::equal(mgre.te_ms.begin(), mgre.te_ms.end(), acq.te_ms.begin()))
    throw ValidationError("fit_field: echo times of the volume and the acquisition differ");

  const Dims& d = mgre.dims();
  const Spacing& sp = mgre.spacing();
  FieldMap fm{RealVolume(d, sp), RealVolume(d, sp), RealVolume(d, sp)};

  double max_mag = 0.0;
  for (const auto& c : mgre.echoes[0].data())
    max_mag = std::max(max_mag, std::abs(c));
  const double threshold = opts.mask_fraction * max_mag;
  const double w0 = acq.omega0() * 1e-6;

  std::size_t wrapped = 0;
  const std::size_t n_echo = mgre.n_echo();
  std::vector<double> phase(n_echo), w(n_echo), te(n_echo);
  for (std::size_t e = 0; e < n_echo; ++e)
    te[e] = mgre.te_ms[e] * 1e-3;

  for (std::size_t i = 0; i < d.size(); ++i) {
    double wsum = 0.0;
    for (std::size_t e = 0; e < n_echo; ++e) {
      const cplx s = mgre.echoes[e][i];
      phase[e] = std::arg(s);
      w[e] = std::norm(s);
      wsum += w[e];
    }
    fm.weight[i] = wsum;
    if (max_mag == 0.0 || std::abs(mgre.echoes[0][i]) <= threshold)
      continue;
    bool wraps = false;
    for (std::size_t e = 1; e < n_echo && !wraps; ++e)
      wraps = std::abs(phase[e] - phase[e - 1]) > std::numbers::pi;
    if (wraps) {
      ++wrapped;
      if (opts.on_wrap == WrapPolicy::exclude)
        continue;
    }
    fm.mask[i] = 1.0;
    if (n_echo < 2 || wsum == 0.0)
      continue;
    // Weighted line fit phase = a + slope * te.
    double mt = 0.0, mp = 0.0;
    for (std::size_t e = 0; e < n_echo; ++e) {
      mt += w[e] * te[e];
      mp += w[e] * phase[e];
    }
    mt /= wsum;
    mp /= wsum;
    double stt = 0.0, stp = 0.0;
    for (std::size_t e = 0; e < n_echo; ++e) {
      stt += w[e] * (te[e] - mt) * (te[e] - mt);
      stp += w[e] * (te[e] - mt) * (phase[e] - mp);
    }
    if (stt > 0.0)
      fm.b_ppm[i] = -(stp / stt) / w0;
  }
  fm.wrapped_voxels = wrapped;
  if (wrapped > 0 && opts.on_wrap == WrapPolicy::error)
    throw ValidationError("fit_field: phase wrap between adjacent echoes in " + std::to_string(wrapped) +
                          " masked voxels");
  return fm;
}

ChiMap invert_dipole(const FieldMap& field, const RealVolume& kernel, DipoleMethod method, double param) {
  if (!(param > 0.0))
    throw ValidationError("invert_dipole: parameter must be > 0");
  if (!field.b_ppm.same_geometry(kernel) || !field.b_ppm.same_geometry(field.mask))
    throw ValidationError("invert_dipole: field, mask and kernel geometry differ");

  ChiMap out{RealVolume(field.b_ppm.dims(), field.b_ppm.spacing()), method, param, false};
  out.empty_mask = std::none_of(field.mask.data().begin(), field.mask.data().end(), [](double m) { return m != 0.0; });
  if (out.empty_mask)
    return out;

  ComplexVolume b(field.b_ppm.dims(), field.b_ppm.spacing(), Domain::image);
  for (std::size_t i = 0; i < b.size(); ++i)
    b[i] = field.b_ppm[i] * field.mask[i];
  ComplexVolume k = fft3(b);
  for (std::size_t i = 0; i < k.size(); ++i) {
    const double dk = kernel[i];
    if (method == DipoleMethod::tkd) {
      const double clamped = std::abs(dk) >= param ? dk : (dk < 0 ? -param : param);
      k[i] /= clamped;
    } else {
      k[i] *= dk / (dk * dk + param);
    }
  }
  const ComplexVolume chi = ifft3(k);
  for (std::size_t i = 0; i < chi.size(); ++i)
    out.chi_ppm[i] = chi[i].real() * field.mask[i];
  return out;
}

ChiMap qsm_pipeline(const MultiEchoVolume& mgre, const AcquisitionParams& acq, DipoleMethod method, double param,
                    const FitOptions& opts) {
  const FieldMap fm = fit_field(mgre, acq, opts);
  const RealVolume kernel = dipole_kernel(mgre.dims(), mgre.spacing(), acq.b0_dir);
  return invert_dipole(fm, kernel, method, param);
}

}  // namespace motionforge
