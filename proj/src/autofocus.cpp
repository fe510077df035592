#include "motionforge/autofocus.hpp"

#include "motionforge/fft.hpp"
#include "motionforge/nelder_mead.hpp"
#include "motionforge/parallel.hpp"
#include "motionforge/transform.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>

namespace motionforge {
namespace {

constexpr double kTieTolerance = 1e-9;
constexpr int kMinCoarseDim = 8;

// Accumulates the pose-corrected samples of `lines` into (num, wt): the
// translation ramp is removed exactly and each sample is spread with
// trilinear weights to the point R^-1 f it came from.
void splat_lines(const ComplexVolume& k, std::span<const Line> lines, const RigidMotion& pose, std::vector<cplx>& num,
                 std::vector<double>& wt) {
  const Dims& d = k.dims();
  const Spacing& s = k.spacing();
  const KSpaceMotionModel model(d, s, pose);

  auto ramp = [](int n, double spacing, double t) {
    std::vector<cplx> r(n);
    for (int i = 0; i < n; ++i) {
      const double ph = 2.0 * std::numbers::pi * kspace_frequency(i, n, spacing) * t;
      r[i] = {std::cos(ph), std::sin(ph)};
    }
    return r;
  };
  const auto rx = ramp(d.nx, s.x, pose.t_mm[0]);
  const auto ry = ramp(d.ny, s.y, pose.t_mm[1]);
  const auto rz = ramp(d.nz, s.z, pose.t_mm[2]);

  for (const Line& line : lines) {
    const cplx ryz = ry[line.ky] * rz[line.kz];
    const std::size_t row = k.index(0, line.ky, line.kz);
    if (!model.rotates()) {
      for (int x = 0; x < d.nx; ++x) {
        num[row + x] += k[row + x] * (rx[x] * ryz);
        wt[row + x] += 1.0;
      }
      continue;
    }
    for (int x = 0; x < d.nx; ++x) {
      const cplx v = k[row + x] * (rx[x] * ryz);
      const Vec3 p = model.source_coordinates(x, line.ky, line.kz);
      const double fx = std::floor(p[0]), fy = std::floor(p[1]), fz = std::floor(p[2]);
      const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy), z0 = static_cast<int>(fz);
      const double wx = p[0] - fx, wy = p[1] - fy, wz = p[2] - fz;
      for (int dz = 0; dz < 2; ++dz) {
        const int zz = z0 + dz;
        const double w_z = dz ? wz : 1.0 - wz;
        if (zz < 0 || zz >= d.nz || w_z == 0.0)
          continue;
        for (int dy = 0; dy < 2; ++dy) {
          const int yy = y0 + dy;
          const double w_yz = w_z * (dy ? wy : 1.0 - wy);
          if (yy < 0 || yy >= d.ny || w_yz == 0.0)
            continue;
          for (int dx = 0; dx < 2; ++dx) {
            const int xx = x0 + dx;
            const double w = w_yz * (dx ? wx : 1.0 - wx);
            if (xx < 0 || xx >= d.nx || w == 0.0)
              continue;
            const std::size_t i = k.index(xx, yy, zz);
            num[i] += w * v;
            wt[i] += w;
          }
        }
      }
    }
  }
}

ComplexVolume normalized_image(const std::vector<cplx>& num, const std::vector<double>& wt, const Dims& d,
                               const Spacing& s) {
  ComplexVolume img(d, s, Domain::image);
  auto& out = img.data();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = wt[i] > 0.0 ? num[i] / wt[i] : cplx{};
  centered_fft_inplace(out, d, false);
  return img;
}

struct PoseGroup {
  RigidMotion pose;
  std::vector<Line> lines;
};

std::vector<PoseGroup> group_lines(const MotionTrajectory& theta, const SamplingSchedule& schedule) {
  std::vector<PoseGroup> groups;
  for (const auto& st : motion_states(theta)) {
    PoseGroup g{st.pose, {}};
    g.lines.reserve(st.trs.size());
    for (std::size_t tr : st.trs)
      g.lines.push_back(schedule.order[tr]);
    groups.push_back(std::move(g));
  }
  return groups;
}

ComplexVolume correct_echo(const ComplexVolume& k, const std::vector<PoseGroup>& groups) {
  std::vector<cplx> num(k.size());
  std::vector<double> wt(k.size());
  for (const auto& g : groups)
    splat_lines(k, g.lines, g.pose, num, wt);
  return normalized_image(num, wt, k.dims(), k.spacing());
}

// Echo-1 k-space at one resolution level with the lines of each segment.
class SegmentEngine {
public:
  SegmentEngine(ComplexVolume k, std::vector<std::vector<Line>> seg_lines)
      : k_(std::move(k)), seg_lines_(std::move(seg_lines)), base_num_(k_.size()), base_wt_(k_.size()) {}

  int n_segments() const { return static_cast<int>(seg_lines_.size()); }

  /// Accumulates every segment outside the window [lo, hi).
  void set_base(int lo, int hi, const std::vector<RigidMotion>& poses) {
    std::fill(base_num_.begin(), base_num_.end(), cplx{});
    std::fill(base_wt_.begin(), base_wt_.end(), 0.0);
    for (int s = 0; s < n_segments(); ++s)
      if (s < lo || s >= hi)
        splat_lines(k_, seg_lines_[s], poses[s], base_num_, base_wt_);
    lo_ = lo;
    hi_ = hi;
  }

  /// Entropy with the window segments taking poses[lo..hi).
  double entropy_with(const std::vector<RigidMotion>& poses) const {
    std::vector<cplx> num = base_num_;
    std::vector<double> wt = base_wt_;
    for (int s = lo_; s < hi_; ++s)
      splat_lines(k_, seg_lines_[s], poses[s], num, wt);
    return gradient_entropy(normalized_image(num, wt, k_.dims(), k_.spacing())).value;
  }

  double entropy_all(const std::vector<RigidMotion>& poses) const {
    std::vector<cplx> num(k_.size());
    std::vector<double> wt(k_.size());
    for (int s = 0; s < n_segments(); ++s)
      splat_lines(k_, seg_lines_[s], poses[s], num, wt);
    return gradient_entropy(normalized_image(num, wt, k_.dims(), k_.spacing())).value;
  }

private:
  ComplexVolume k_;
  std::vector<std::vector<Line>> seg_lines_;
  std::vector<cplx> base_num_;
  std::vector<double> base_wt_;
  int lo_ = 0;
  int hi_ = 0;
};

// Central k-space window of size n >> level per axis; keeps the field of view.
SegmentEngine make_level(const ComplexVolume& k, const SamplingSchedule& schedule, int n_segments, int level) {
  const Dims& d = k.dims();
  const Dims cd{std::max(1, d.nx >> level), std::max(1, d.ny >> level), std::max(1, d.nz >> level)};
  const int ox = d.nx / 2 - cd.nx / 2, oy = d.ny / 2 - cd.ny / 2, oz = d.nz / 2 - cd.nz / 2;
  const Spacing cs{k.spacing().x * d.nx / cd.nx, k.spacing().y * d.ny / cd.ny, k.spacing().z * d.nz / cd.nz};

  ComplexVolume ck(cd, cs, Domain::kspace);
  for (int z = 0; z < cd.nz; ++z)
    for (int y = 0; y < cd.ny; ++y)
      for (int x = 0; x < cd.nx; ++x)
        ck(x, y, z) = k(x + ox, y + oy, z + oz);

  std::vector<std::vector<Line>> seg_lines(n_segments);
  for (int s = 0; s < n_segments; ++s) {
    const auto [lo, hi] = segment_range(schedule.n_tr(), n_segments, s);
    for (std::size_t t = lo; t < hi; ++t) {
      const Line& l = schedule.order[t];
      const int ky = l.ky - oy, kz = l.kz - oz;
      if (ky >= 0 && ky < cd.ny && kz >= 0 && kz < cd.nz)
        seg_lines[s].push_back({ky, kz});
    }
  }
  return SegmentEngine(std::move(ck), std::move(seg_lines));
}

double segment_regularizer(const std::vector<RigidMotion>& poses, double rotation_weight) {
  double r = 0.0;
  for (std::size_t s = 1; s < poses.size(); ++s) {
    const auto a = poses[s].params(), b = poses[s - 1].params();
    for (int i = 0; i < 6; ++i) {
      const double diff = a[i] - b[i];
      r += (i < 3 ? 1.0 : rotation_weight) * diff * diff;
    }
  }
  return r;
}

MotionTrajectory expand(const std::vector<RigidMotion>& poses, std::size_t n_tr) {
  MotionTrajectory traj(n_tr);
  const int n = static_cast<int>(poses.size());
  for (int s = 0; s < n; ++s) {
    const auto [lo, hi] = segment_range(n_tr, n, s);
    std::fill(traj.begin() + lo, traj.begin() + hi, poses[s]);
  }
  return traj;
}

// Contiguous segment windows visited in one sweep: widths n/2, n/4, ..., 1, each
// slid over every start. Moving a whole window shifts a run of segments by a
// common offset, which single-segment moves cannot reach when an event spans
// several segments. The full-width window is skipped: a global shift leaves
// the entropy unchanged.
std::vector<std::pair<int, int>> sweep_windows(int n_seg) {
  std::vector<std::pair<int, int>> windows;
  for (int w = std::max(1, n_seg / 2); w >= 1; w /= 2) {
    for (int lo = 0; lo + w <= n_seg; ++lo)
      windows.emplace_back(lo, lo + w);
    if (w == 1)
      break;
  }
  return windows;
}

int usable_levels(const Dims& d, int requested) {
  int levels = 1;
  while (levels < requested && (d.nx >> levels) >= kMinCoarseDim && (d.ny >> levels) >= kMinCoarseDim &&
         (d.nz >> levels) >= kMinCoarseDim)
    ++levels;
  return levels;
}

}  // namespace

void AutofocusConfig::validate() const {
  if (n_segments < 1)
    throw ValidationError("autofocus: n_segments must be >= 1");
  if (!(param_tolerance > 0))
    throw ValidationError("autofocus: param_tolerance must be > 0");
  if (max_iters < 1 || multiscale_levels < 1 || max_evals_per_segment < 1)
    throw ValidationError("autofocus: max_iters, multiscale_levels and max_evals_per_segment must be >= 1");
  if (!(search_bound > 0) || !(initial_step > 0) || !(rotation_weight >= 0))
    throw ValidationError("autofocus: search_bound and initial_step must be > 0, rotation_weight >= 0");
  if (std::isnan(lambda))
    throw ValidationError("autofocus: lambda is NaN");
}

std::pair<std::size_t, std::size_t> segment_range(std::size_t n_tr, int n_segments, int s) {
  const std::size_t n = static_cast<std::size_t>(n_segments);
  return {s * n_tr / n, (s + 1) * n_tr / n};
}

EntropyResult gradient_entropy(const ComplexVolume& img) {
  if (img.domain() != Domain::image)
    throw ValidationError("gradient_entropy: input must be in the image domain");
  const Dims& d = img.dims();
  // H = -sum v ln v with v = |g| / sqrt(E): collect E, sum |g| and sum |g| ln |g| in one pass.
  double energy[2] = {0, 0}, sum_abs[2] = {0, 0}, sum_abs_log[2] = {0, 0};
  auto accumulate = [&](int dir, cplx g) {
    const double e = std::norm(g);
    if (e == 0.0)
      return;
    const double a = std::sqrt(e);
    energy[dir] += e;
    sum_abs[dir] += a;
    sum_abs_log[dir] += a * std::log(a);
  };
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y) {
      const std::size_t row = img.index(0, y, z);
      for (int x = 0; x + 1 < d.nx; ++x)
        accumulate(0, img[row + x + 1] - img[row + x]);
      if (y + 1 < d.ny) {
        const std::size_t next = img.index(0, y + 1, z);
        for (int x = 0; x < d.nx; ++x)
          accumulate(1, img[next + x] - img[row + x]);
      }
    }

  EntropyResult res;
  for (int dir = 0; dir < 2; ++dir) {
    if (energy[dir] == 0.0) {
      res.degenerate = true;
      continue;
    }
    const double root = std::sqrt(energy[dir]);
    res.value += -(sum_abs_log[dir] - 0.5 * std::log(energy[dir]) * sum_abs[dir]) / root;
  }
  return res;
}

MultiEchoVolume apply_correction(const MultiEchoVolume& kspace, const MotionTrajectory& theta,
                                 const SamplingSchedule& schedule) {
  kspace.validate();
  check_trajectory(theta, schedule);
  if (kspace.domain() != Domain::kspace)
    throw ValidationError("apply_correction: input must be in the k-space domain");
  if (kspace.dims() != schedule.dims)
    throw ValidationError("apply_correction: volume dims do not match the schedule");

  const auto groups = group_lines(theta, schedule);
  MultiEchoVolume out;
  out.te_ms = kspace.te_ms;
  out.echoes.resize(kspace.n_echo());
  parallel_for(kspace.n_echo(), [&](std::size_t e) { out.echoes[e] = correct_echo(kspace.echoes[e], groups); });
  return out;
}

double temporal_regularizer(const MotionTrajectory& theta, double rotation_weight) {
  double r = 0.0;
  for (std::size_t t = 1; t < theta.size(); ++t) {
    const auto a = theta[t].params(), b = theta[t - 1].params();
    for (int i = 0; i < 6; ++i) {
      const double diff = a[i] - b[i];
      r += (i < 3 ? 1.0 : rotation_weight) * diff * diff;
    }
  }
  return r;
}

double default_lambda(const ComplexVolume& kspace_first_echo, const SamplingSchedule& schedule,
                      const AutofocusConfig& cfg) {
  (void)schedule;
  const double phi = gradient_entropy(ifft3(kspace_first_echo)).value;
  return 0.05 * phi / cfg.n_segments;
}

double cost(const MotionTrajectory& theta, const ComplexVolume& kspace_first_echo, const SamplingSchedule& schedule,
            const AutofocusConfig& cfg) {
  cfg.validate();
  check_trajectory(theta, schedule);
  if (kspace_first_echo.domain() != Domain::kspace)
    throw ValidationError("cost: input must be in the k-space domain");
  if (kspace_first_echo.dims() != schedule.dims)
    throw ValidationError("cost: volume dims do not match the schedule");
  const double lambda = cfg.lambda >= 0 ? cfg.lambda : default_lambda(kspace_first_echo, schedule, cfg);
  const double phi = gradient_entropy(correct_echo(kspace_first_echo, group_lines(theta, schedule))).value;
  return phi + lambda * temporal_regularizer(theta, cfg.rotation_weight);
}

AutofocusResult estimate(const MultiEchoVolume& corrupted, const SamplingSchedule& schedule,
                         const AutofocusConfig& cfg) {
  cfg.validate();
  corrupted.validate();
  if (corrupted.domain() != Domain::image)
    throw ValidationError("estimate: input must be in the image domain");
  if (corrupted.dims() != schedule.dims)
    throw ValidationError("estimate: volume dims do not match the schedule");

  const ComplexVolume k1 = fft3(corrupted.echoes[0]);
  const int n_seg = static_cast<int>(std::min<std::size_t>(cfg.n_segments, schedule.n_tr()));
  const int n_params = cfg.estimate_rotations ? 6 : 3;
  const int levels = usable_levels(k1.dims(), cfg.multiscale_levels);

  AutofocusResult res;
  res.lambda = cfg.lambda >= 0 ? cfg.lambda : default_lambda(k1, schedule, cfg);
  const double phi_full = gradient_entropy(ifft3(k1)).value;

  std::vector<RigidMotion> poses(n_seg);
  double current = 0.0;
  bool still_improving = false;

  for (int level = levels - 1; level >= 0; --level) {
    SegmentEngine engine = make_level(k1, schedule, n_seg, level);
    const std::vector<RigidMotion> zero(n_seg);
    const double phi_level = engine.entropy_all(zero);
    // Entropy grows with the voxel count; keep the data/regularizer balance across levels.
    const double lambda = phi_full > 0 ? res.lambda * phi_level / phi_full : res.lambda;
    const double scale = static_cast<double>(1 << level);
    const double step = cfg.initial_step * scale;
    const double tolerance = cfg.param_tolerance * scale;

    if (level == 0) {
      res.initial_cost = phi_level;
      res.cost_trace.push_back(res.initial_cost);
      const double warm = engine.entropy_all(poses) + lambda * segment_regularizer(poses, cfg.rotation_weight);
      ++res.evaluations;
      if (warm < res.initial_cost) {
        current = warm;
        res.cost_trace.push_back(warm);
      } else {
        poses = zero;
        current = res.initial_cost;
      }
    }

    for (int sweep = 0; sweep < cfg.max_iters; ++sweep) {
      bool improved = false;
      for (const auto& [lo, hi] : sweep_windows(n_seg)) {
        engine.set_base(lo, hi, poses);
        // Search over a common offset added to every pose in the window.
        auto trial_poses = [&](std::span<const double> delta) {
          auto trial = poses;
          for (int s = lo; s < hi; ++s) {
            auto q = trial[s].params();
            for (int i = 0; i < n_params; ++i)
              q[i] += delta[i];
            trial[s] = RigidMotion::from_params(q);
          }
          return trial;
        };
        auto objective = [&](std::span<const double> delta) {
          const auto trial = trial_poses(delta);
          for (int s = lo; s < hi; ++s)
            for (double v : trial[s].params())
              if (std::abs(v) > cfg.search_bound)
                return std::numeric_limits<double>::infinity();
          return engine.entropy_with(trial) + lambda * segment_regularizer(trial, cfg.rotation_weight);
        };

        const std::vector<double> x0(n_params, 0.0);
        const double start = objective(x0);
        const auto nm = nelder_mead(objective, x0, {step, tolerance, cfg.max_evals_per_segment});
        res.evaluations += nm.evals + 1;
        if (nm.fx < start - kTieTolerance * std::abs(start)) {
          poses = trial_poses(nm.x);
          improved = true;
          if (level == 0) {
            current = nm.fx;
            res.cost_trace.push_back(current);
          }
        }
      }
      still_improving = improved;
      if (!improved)
        break;
    }
  }

  res.converged = !still_improving;
  res.final_cost = current;
  res.theta_hat = expand(poses, schedule.n_tr());

  MultiEchoVolume kspace;
  kspace.te_ms = corrupted.te_ms;
  kspace.echoes.resize(corrupted.n_echo());
  parallel_for(corrupted.n_echo(), [&](std::size_t e) { kspace.echoes[e] = e == 0 ? k1 : fft3(corrupted.echoes[e]); });
  res.corrected = apply_correction(kspace, res.theta_hat, schedule);
  return res;
}

std::string cost_trace_to_csv(const std::vector<double>& trace) {
  std::string out = "iter,cost\n";
  char buf[64];
  for (std::size_t i = 0; i < trace.size(); ++i) {
    auto r = std::to_chars(buf, buf + sizeof(buf), trace[i]);
    out += std::to_string(i) + "," + std::string(buf, r.ptr) + "\n";
  }
  return out;
}

}  // namespace motionforge
