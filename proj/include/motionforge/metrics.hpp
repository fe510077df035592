#pragma once

#include "motionforge/volume.hpp"

#include <map>
#include <string>
#include <vector>

namespace motionforge {

struct SsimOptions {
  double sigma = 1.5;
  int taps = 11;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = -1.0;  // < 0: max - min of the reference
};

double rmse(const RealVolume& ref, const RealVolume& test);

/// 20 log10(range(ref) / rmse); +infinity for identical inputs.
double psnr(const RealVolume& ref, const RealVolume& test);

/// Mean local SSIM over every position where the 3D Gaussian window fits
/// inside the volume. The window shrinks (odd taps) on axes shorter than `taps`.
double ssim(const RealVolume& ref, const RealVolume& test, const SsimOptions& opts = {});

/// Normalized 1D Gaussian window used by ssim.
std::vector<double> gaussian_window(int taps, double sigma);

struct MetricsRow {
  std::string id;
  std::string condition;
  double rmse = 0.0;
  double psnr_db = 0.0;
  double ssim = 0.0;
};

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single row
};

struct PairInput {
  std::string ref_path;
  std::string test_path;
  std::string condition;
  std::string id;  // empty: derived from the test path
};

struct MetricsReport {
  std::vector<MetricsRow> rows;
  std::map<std::string, std::map<std::string, Aggregate>> aggregates;  // condition -> metric -> stats
  std::vector<std::pair<std::string, std::string>> skipped;             // id -> reason

  /// Recomputes the aggregate block from `rows`.
  void summarize();
  std::string to_json() const;
  std::string to_csv() const;
};

/// Metrics of one pair of loaded volumes. Complex volumes are compared by
/// magnitude; multi-echo SSIM is the mean over echoes.
MetricsRow compare_volumes(const std::vector<RealVolume>& ref, const std::vector<RealVolume>& test);

/// Reads each pair (either dtype); unreadable or mismatched pairs are skipped with a reason.
MetricsReport report(const std::vector<PairInput>& pairs);

}  // namespace motionforge
