#pragma once

#include "motionforge/motion.hpp"
#include "motionforge/volume.hpp"

#include <string>
#include <vector>

namespace motionforge {

struct AutofocusConfig {
  double lambda = -1.0;  // temporal smoothness weight; < 0 selects 0.05 * phi(naive) / n_segments
  int n_segments = 8;
  int max_iters = 6;              // sweeps over all segments per resolution level
  double param_tolerance = 0.05;  // mm / deg; simplex size at which a segment search stops
  int multiscale_levels = 3;      // 1 = full resolution only; each extra level halves the grid
  bool estimate_rotations = false;
  double search_bound = 10.0;     // box |param| <= bound, mm / deg
  double initial_step = 1.0;      // starting simplex edge at the finest level, mm / deg
  int max_evals_per_segment = 150;
  double rotation_weight = 1.0;   // weight of degree components in the regularizer (mm components weigh 1)

  void validate() const;
};

struct AutofocusResult {
  MotionTrajectory theta_hat;  // per TR
  MultiEchoVolume corrected;   // image domain, all echoes
  std::vector<double> cost_trace;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  double lambda = 0.0;
  bool converged = true;
  int evaluations = 0;
};

struct EntropyResult {
  double value = 0.0;
  bool degenerate = false;  // some gradient direction carried no energy
};

/// Entropy of the normalized in-plane (x, y) forward-difference gradient magnitudes.
EntropyResult gradient_entropy(const ComplexVolume& img);

/// Undo each TR's pose on its acquired lines (inverse phase ramp, adjoint
/// k-space warp with density normalization) and inverse transform every echo.
MultiEchoVolume apply_correction(const MultiEchoVolume& kspace, const MotionTrajectory& theta,
                                 const SamplingSchedule& schedule);

/// sum_t ||theta_{t+1} - theta_t||^2 in acquisition order; degree terms scaled by rotation_weight.
double temporal_regularizer(const MotionTrajectory& theta, double rotation_weight = 1.0);

/// lambda used when cfg.lambda < 0.
double default_lambda(const ComplexVolume& kspace_first_echo, const SamplingSchedule& schedule,
                      const AutofocusConfig& cfg);

/// Gradient entropy of the echo-1 correction plus lambda times the temporal regularizer.
double cost(const MotionTrajectory& theta, const ComplexVolume& kspace_first_echo, const SamplingSchedule& schedule,
            const AutofocusConfig& cfg);

/// Piecewise-constant trajectory search from theta = 0 on the first echo; the
/// estimate is then applied to every echo.
AutofocusResult estimate(const MultiEchoVolume& corrupted, const SamplingSchedule& schedule,
                         const AutofocusConfig& cfg);

/// TR range [first, last) of segment s for uniform blocks in acquisition order.
std::pair<std::size_t, std::size_t> segment_range(std::size_t n_tr, int n_segments, int s);

std::string cost_trace_to_csv(const std::vector<double>& trace);

}  // namespace motionforge
