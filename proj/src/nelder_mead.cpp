#include "motionforge/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace motionforge {

NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& f, std::vector<double> x0,
                             const NelderMeadOptions& opts) {
  const std::size_t n = x0.size();
  NelderMeadResult res;
  if (n == 0) {
    res.x = x0;
    res.fx = f(x0);
    res.evals = 1;
    res.converged = true;
    return res;
  }

  int evals = 0;
  auto eval = [&](const std::vector<double>& x) {
    ++evals;
    const double v = f(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };

  std::vector<std::vector<double>> pts(n + 1, x0);
  std::vector<double> vals(n + 1);
  vals[0] = eval(pts[0]);
  for (std::size_t i = 0; i < n; ++i) {
    pts[i + 1][i] += opts.initial_step;
    vals[i + 1] = eval(pts[i + 1]);
  }

  std::vector<std::size_t> idx(n + 1);
  auto order = [&] {
    std::iota(idx.begin(), idx.end(), 0);
    // Stable on ties so runs are reproducible.
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
  };
  auto along = [&](const std::vector<double>& c, const std::vector<double>& w, double t) {
    std::vector<double> p(n);
    for (std::size_t k = 0; k < n; ++k)
      p[k] = c[k] + t * (w[k] - c[k]);
    return p;
  };

  bool converged = false;
  while (evals < opts.max_evals) {
    order();
    const std::size_t best = idx[0], worst = idx[n], second = idx[n - 1];

    double spread = 0.0;
    for (std::size_t i = 1; i <= n; ++i)
      for (std::size_t k = 0; k < n; ++k)
        spread = std::max(spread, std::abs(pts[idx[i]][k] - pts[best][k]));
    if (spread < opts.tolerance) {
      converged = true;
      break;
    }

    std::vector<double> centroid(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k)
        centroid[k] += pts[idx[i]][k] / static_cast<double>(n);

    const auto xr = along(centroid, pts[worst], -1.0);
    const double fr = eval(xr);
    if (fr < vals[best]) {
      const auto xe = along(centroid, pts[worst], -2.0);
      const double fe = eval(xe);
      if (fe < fr) {
        pts[worst] = xe;
        vals[worst] = fe;
      } else {
        pts[worst] = xr;
        vals[worst] = fr;
      }
      continue;
    }
    if (fr < vals[second]) {
      pts[worst] = xr;
      vals[worst] = fr;
      continue;
    }
    // Contraction: outside if the reflection improved on the worst, inside otherwise.
    const bool outside = fr < vals[worst];
    const auto xc = along(centroid, outside ? xr : pts[worst], 0.5);
    const double fc = eval(xc);
    if (fc < (outside ? fr : vals[worst])) {
      pts[worst] = xc;
      vals[worst] = fc;
      continue;
    }
    for (std::size_t i = 1; i <= n; ++i) {
      pts[idx[i]] = along(pts[best], pts[idx[i]], 0.5);
      vals[idx[i]] = eval(pts[idx[i]]);
    }
  }

  order();
  res.x = pts[idx[0]];
  res.fx = vals[idx[0]];
  res.evals = evals;
  res.converged = converged;
  return res;
}

}  // namespace motionforge
