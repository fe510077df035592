#pragma once

#include <functional>
#include <span>
#include <vector>

namespace motionforge {

struct NelderMeadOptions {
  double initial_step = 1.0;  // edge length of the starting simplex
  double tolerance = 1e-3;    // stop when every vertex lies within this distance of the best (max-norm)
  int max_evals = 200;
};

struct NelderMeadResult {
  std::vector<double> x;
  double fx = 0.0;
  int evals = 0;
  bool converged = false;
};

/// Derivative-free simplex minimizer (reflection 1, expansion 2, contraction
/// 1/2, shrink 1/2). The objective may return +inf to reject a point.
NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& f, std::vector<double> x0,
                             const NelderMeadOptions& opts);

}  // namespace motionforge
