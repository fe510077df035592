#pragma once

#include "motionforge/volume.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace motionforge {

/// One phase-encode / slice-encode line; the readout runs along x.
struct Line {
  int ky = 0;
  int kz = 0;
  bool operator==(const Line&) const = default;
  auto operator<=>(const Line&) const = default;
};

enum class ScheduleMode { sequential, center_out, alternating_hilo };

std::string to_string(ScheduleMode m);
ScheduleMode schedule_mode_from_string(const std::string& s);

/// Acquisition order of k-space lines, one line per TR.
struct SamplingSchedule {
  Dims dims;
  ScheduleMode mode = ScheduleMode::sequential;
  std::vector<Line> order;

  std::size_t n_tr() const { return order.size(); }
};

SamplingSchedule make_schedule(const Dims& dims, ScheduleMode mode);

/// Per-TR rigid pose, in acquisition order.
using MotionTrajectory = std::vector<RigidMotion>;

enum class TrajectoryMode { gaussian, trapezoid };

std::string to_string(TrajectoryMode m);
TrajectoryMode trajectory_mode_from_string(const std::string& s);

struct TrajectoryGenSpec {
  TrajectoryMode mode = TrajectoryMode::gaussian;
  // Standard deviations in (tx, ty, tz) mm and (rx, ry, rz) degrees.
  std::array<double, 3> t_std_mm{3.0, 1.0, 3.0};
  std::array<double, 3> r_std_deg{3.0, 1.0, 3.0};
  int n_states = 8;
  // Trapezoid events: ramp up, plateau, ramp down, lengths in TRs.
  int n_events = 3;
  int ramp_trs = 0;     // 0 selects n_tr / 64
  int plateau_trs = 0;  // 0 selects n_tr / 16
  bool restrict_to_periphery = false;
  std::uint64_t seed = 0;

  void validate() const;
};

MotionTrajectory gen_trajectory(const TrajectoryGenSpec& spec, const SamplingSchedule& schedule);

/// Adds a trapezoid event to `traj` starting at TR `start`; the plateau holds `peak`.
void add_trapezoid_event(MotionTrajectory& traj, std::size_t start, std::size_t ramp, std::size_t plateau,
                         const RigidMotion& peak);

/// True when the line lies in the central band |ky - ny/2| < ny * fraction / 2.
bool in_central_band(const Line& line, int ny, double fraction);

MotionTrajectory zero_central(const MotionTrajectory& traj, const SamplingSchedule& schedule,
                              double fraction = 1.0 / 3.0);

MotionTrajectory scale_trajectory(const MotionTrajectory& traj, double s);

/// A distinct pose and the TRs (indices into the schedule) acquired in it.
struct MotionState {
  RigidMotion pose;
  std::vector<std::size_t> trs;
};

/// Groups TRs by identical pose, in order of first appearance.
std::vector<MotionState> motion_states(const MotionTrajectory& traj);

void check_trajectory(const MotionTrajectory& traj, const SamplingSchedule& schedule);

/// Motion-corrupted multi-echo image: each line takes the k-space of the
/// object in the pose of its TR. All echoes of a TR share the pose.
MultiEchoVolume corrupt(const MultiEchoVolume& mgre, const MotionTrajectory& traj, const SamplingSchedule& schedule);

/// Trajectory CSV `tr,tx_mm,ty_mm,tz_mm,rx_deg,ry_deg,rz_deg`.
std::string trajectory_to_csv(const MotionTrajectory& traj);
MotionTrajectory trajectory_from_csv(const std::string& text);

struct ExportOptions {
  std::vector<double> scales{1.0, 1.5, 2.0};
  double central_fraction = 1.0 / 3.0;
  double noise_sigma = 0.0;  // additive complex Gaussian on the corrupted image
  std::uint64_t seed = 0;
};

/// For every clean volume and scale, zeroes the central band, scales the
/// trajectory, corrupts, and writes the pair. Returns the manifest JSON text,
/// which is also written to out_dir/manifest.json once every pair succeeded.
std::string export_pairs(const std::vector<std::string>& clean_paths, const MotionTrajectory& traj,
                         const SamplingSchedule& schedule, const ExportOptions& opts, const std::string& out_dir);

}  // namespace motionforge
