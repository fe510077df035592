#include "motionforge/motion.hpp"

#include "motionforge/fft.hpp"
#include "motionforge/parallel.hpp"
#include "motionforge/transform.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <random>
#include <sstream>

namespace motionforge {

std::string to_string(ScheduleMode m) {
  switch (m) {
    case ScheduleMode::sequential:
      return "sequential";
    case ScheduleMode::center_out:
      return "center-out";
    case ScheduleMode::alternating_hilo:
      return "alternating-hilo";
  }
  return "?";
}

ScheduleMode schedule_mode_from_string(const std::string& s) {
  if (s == "sequential")
    return ScheduleMode::sequential;
  if (s == "center-out")
    return ScheduleMode::center_out;
  if (s == "alternating-hilo")
    return ScheduleMode::alternating_hilo;
  throw ValidationError("unknown schedule mode '" + s + "'");
}

std::string to_string(TrajectoryMode m) { return m == TrajectoryMode::gaussian ? "gaussian" : "trapezoid"; }

TrajectoryMode trajectory_mode_from_string(const std::string& s) {
  if (s == "gaussian")
    return TrajectoryMode::gaussian;
  if (s == "trapezoid")
    return TrajectoryMode::trapezoid;
  throw ValidationError("unknown trajectory mode '" + s + "'");
}

SamplingSchedule make_schedule(const Dims& dims, ScheduleMode mode) {
  if (dims.nx < 4 || dims.ny < 4 || dims.nz < 1)
    throw ValidationError("make_schedule: dims must be >= 4 in x and y");
  SamplingSchedule s{dims, mode, {}};
  s.order.reserve(static_cast<std::size_t>(dims.ny) * dims.nz);

  std::vector<int> ky_order(dims.ny);
  for (int i = 0; i < dims.ny; ++i)
    ky_order[i] = i;
  if (mode == ScheduleMode::center_out) {
    // c, c-1, c+1, c-2, c+2, ...
    const int c = dims.ny / 2;
    ky_order.clear();
    ky_order.push_back(c);
    for (int d = 1; static_cast<int>(ky_order.size()) < dims.ny; ++d) {
      if (c - d >= 0)
        ky_order.push_back(c - d);
      if (c + d < dims.ny)
        ky_order.push_back(c + d);
    }
  }

  // Slice-encode order sorted by distance from the center, low frequencies first.
  std::vector<int> kz_low_high(dims.nz);
  for (int i = 0; i < dims.nz; ++i)
    kz_low_high[i] = i;
  const int cz = dims.nz / 2;
  std::stable_sort(kz_low_high.begin(), kz_low_high.end(),
                   [cz](int a, int b) { return std::abs(a - cz) < std::abs(b - cz); });
  std::vector<int> kz_high_low(kz_low_high.rbegin(), kz_low_high.rend());

  for (std::size_t n = 0; n < ky_order.size(); ++n) {
    const int ky = ky_order[n];
    if (mode == ScheduleMode::alternating_hilo) {
      const auto& kz_order = (n % 2 == 0) ? kz_high_low : kz_low_high;
      for (int kz : kz_order)
        s.order.push_back({ky, kz});
    } else {
      for (int kz = 0; kz < dims.nz; ++kz)
        s.order.push_back({ky, kz});
    }
  }
  return s;
}

void TrajectoryGenSpec::validate() const {
  for (int i = 0; i < 3; ++i)
    if (!(t_std_mm[i] >= 0) || !(r_std_deg[i] >= 0))
      throw ValidationError("trajectory spec: standard deviations must be >= 0");
  if (n_states < 1)
    throw ValidationError("trajectory spec: n_states must be >= 1");
  if (n_events < 0 || ramp_trs < 0 || plateau_trs < 0)
    throw ValidationError("trajectory spec: event counts and lengths must be >= 0");
}

void add_trapezoid_event(MotionTrajectory& traj, std::size_t start, std::size_t ramp, std::size_t plateau,
                         const RigidMotion& peak) {
  const auto p = peak.params();
  auto add = [&](std::size_t tr, double w) {
    if (tr >= traj.size())
      return;
    auto q = traj[tr].params();
    for (int i = 0; i < 6; ++i)
      q[i] += w * p[i];
    traj[tr] = RigidMotion::from_params(q);
  };
  for (std::size_t j = 0; j < ramp; ++j)
    add(start + j, static_cast<double>(j + 1) / static_cast<double>(ramp + 1));
  for (std::size_t j = 0; j < plateau; ++j)
    add(start + ramp + j, 1.0);
  for (std::size_t j = 0; j < ramp; ++j)
    add(start + ramp + plateau + j, static_cast<double>(ramp - j) / static_cast<double>(ramp + 1));
}

MotionTrajectory gen_trajectory(const TrajectoryGenSpec& spec, const SamplingSchedule& schedule) {
  spec.validate();
  const std::size_t n_tr = schedule.n_tr();
  MotionTrajectory traj(n_tr);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> unit(0.0, 1.0);

  auto draw_pose = [&] {
    RigidMotion m;
    for (int i = 0; i < 3; ++i)
      m.t_mm[i] = unit(rng) * spec.t_std_mm[i] + 0.0;
    for (int i = 0; i < 3; ++i)
      m.r_deg[i] = unit(rng) * spec.r_std_deg[i] + 0.0;
    return m;
  };

  if (spec.mode == TrajectoryMode::gaussian) {
    const std::size_t states = std::min<std::size_t>(spec.n_states, std::max<std::size_t>(n_tr, 1));
    for (std::size_t s = 0; s < states; ++s) {
      const RigidMotion pose = draw_pose();
      const std::size_t lo = s * n_tr / states, hi = (s + 1) * n_tr / states;
      std::fill(traj.begin() + lo, traj.begin() + hi, pose);
    }
  } else {
    const std::size_t ramp = spec.ramp_trs > 0 ? spec.ramp_trs : std::max<std::size_t>(1, n_tr / 64);
    const std::size_t plateau = spec.plateau_trs > 0 ? spec.plateau_trs : std::max<std::size_t>(1, n_tr / 16);
    const std::size_t length = 2 * ramp + plateau;
    for (int e = 0; e < spec.n_events; ++e) {
      std::uniform_int_distribution<std::size_t> start_dist(0, n_tr > length ? n_tr - length : 0);
      const std::size_t start = start_dist(rng);
      add_trapezoid_event(traj, start, ramp, plateau, draw_pose());
    }
  }

  if (spec.restrict_to_periphery)
    traj = zero_central(traj, schedule);
  return traj;
}

bool in_central_band(const Line& line, int ny, double fraction) {
  // Centered on the geometric middle (ny - 1) / 2 so the band holds ny * fraction lines.
  return std::abs(line.ky - (ny - 1) / 2.0) < ny * fraction / 2.0;
}

MotionTrajectory zero_central(const MotionTrajectory& traj, const SamplingSchedule& schedule, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw ValidationError("zero_central: fraction must lie in (0, 1]");
  check_trajectory(traj, schedule);
  MotionTrajectory out = traj;
  for (std::size_t t = 0; t < out.size(); ++t)
    if (in_central_band(schedule.order[t], schedule.dims.ny, fraction))
      out[t] = RigidMotion{};
  return out;
}

MotionTrajectory scale_trajectory(const MotionTrajectory& traj, double s) {
  if (!std::isfinite(s))
    throw ValidationError("scale_trajectory: scale must be finite");
  MotionTrajectory out = traj;
  for (auto& m : out) {
    auto p = m.params();
    for (auto& v : p)
      v = v * s + 0.0;
    m = RigidMotion::from_params(p);
  }
  return out;
}

std::vector<MotionState> motion_states(const MotionTrajectory& traj) {
  std::vector<MotionState> states;
  for (std::size_t t = 0; t < traj.size(); ++t) {
    // Consecutive TRs usually share the pose; check the last state first.
    auto it = (!states.empty() && states.back().pose == traj[t])
                  ? states.end() - 1
                  : std::find_if(states.begin(), states.end(), [&](const MotionState& s) { return s.pose == traj[t]; });
    if (it == states.end()) {
      states.push_back({traj[t], {}});
      it = states.end() - 1;
    }
    it->trs.push_back(t);
  }
  return states;
}

void check_trajectory(const MotionTrajectory& traj, const SamplingSchedule& schedule) {
  if (traj.size() != schedule.n_tr())
    throw ValidationError("trajectory length " + std::to_string(traj.size()) + " does not match schedule (" +
                          std::to_string(schedule.n_tr()) + " TRs)");
  for (const auto& m : traj)
    if (!m.is_finite())
      throw ValidationError("trajectory contains non-finite parameters");
}

MultiEchoVolume corrupt(const MultiEchoVolume& mgre, const MotionTrajectory& traj, const SamplingSchedule& schedule) {
  mgre.validate();
  check_trajectory(traj, schedule);
  if (mgre.domain() != Domain::image)
    throw ValidationError("corrupt: input must be in the image domain");
  if (mgre.dims() != schedule.dims)
    throw ValidationError("corrupt: volume dims do not match the schedule");
  if (std::all_of(traj.begin(), traj.end(), [](const RigidMotion& m) { return m.is_zero(); }))
    return mgre;

  const Dims& d = mgre.dims();
  const auto states = motion_states(traj);
  std::vector<KSpaceMotionModel> models;
  for (const auto& s : states)
    models.emplace_back(d, mgre.spacing(), s.pose);

  MultiEchoVolume out;
  out.te_ms = mgre.te_ms;
  out.echoes.resize(mgre.n_echo());
  parallel_for(mgre.n_echo(), [&](std::size_t e) {
    const ComplexVolume k = fft3(mgre.echoes[e]);
    ComplexVolume moved(d, k.spacing(), Domain::kspace);
    // Masks are disjoint line sets, so the sum over states is a per-line assignment.
    for (std::size_t s = 0; s < states.size(); ++s)
      for (std::size_t tr : states[s].trs) {
        const Line& line = schedule.order[tr];
        for (int x = 0; x < d.nx; ++x)
          moved(x, line.ky, line.kz) = models[s].forward(k, x, line.ky, line.kz);
      }
    out.echoes[e] = ifft3(moved);
  });
  return out;
}

namespace {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s, std::size_t row) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw ValidationError("trajectory CSV row " + std::to_string(row) + ": bad number '" + std::string(s) + "'");
  return v;
}

}  // namespace

std::string trajectory_to_csv(const MotionTrajectory& traj) {
  std::string out = "tr,tx_mm,ty_mm,tz_mm,rx_deg,ry_deg,rz_deg\n";
  for (std::size_t t = 0; t < traj.size(); ++t) {
    out += std::to_string(t);
    for (double v : traj[t].params()) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

MotionTrajectory trajectory_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "tr,tx_mm,ty_mm,tz_mm,rx_deg,ry_deg,rz_deg")
    throw ValidationError("trajectory CSV: missing or wrong header");
  MotionTrajectory traj;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty())
      continue;
    std::vector<std::string_view> cells;
    std::string_view rest(line);
    while (true) {
      auto comma = rest.find(',');
      cells.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos)
        break;
      rest.remove_prefix(comma + 1);
    }
    if (cells.size() != 7)
      throw ValidationError("trajectory CSV row " + std::to_string(row) + ": expected 7 columns");
    if (parse_double(cells[0], row) != static_cast<double>(row))
      throw ValidationError("trajectory CSV row " + std::to_string(row) + ": tr index out of sequence");
    std::array<double, 6> p{};
    for (int i = 0; i < 6; ++i)
      p[i] = parse_double(cells[i + 1], row);
    auto m = RigidMotion::from_params(p);
    if (!m.is_finite())
      throw ValidationError("trajectory CSV row " + std::to_string(row) + ": non-finite value");
    traj.push_back(m);
    ++row;
  }
  return traj;
}

}  // namespace motionforge
