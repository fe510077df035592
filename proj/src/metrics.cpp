#include "motionforge/metrics.hpp"

#include "motionforge/io.hpp"

#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <limits>

namespace motionforge {
namespace {

void check_shapes(const RealVolume& a, const RealVolume& b, const char* what) {
  if (a.dims() != b.dims())
    throw ValidationError(std::string(what) + ": shape mismatch");
}

double value_range(const RealVolume& v) {
  const auto [lo, hi] = std::minmax_element(v.data().begin(), v.data().end());
  return *hi - *lo;
}

// 'valid' separable correlation along one axis.
RealVolume filter_axis(const RealVolume& in, const std::vector<double>& w, int axis) {
  Dims od = in.dims();
  const int taps = static_cast<int>(w.size());
  if (axis == 0)
    od.nx -= taps - 1;
  else if (axis == 1)
    od.ny -= taps - 1;
  else
    od.nz -= taps - 1;
  RealVolume out(od, in.spacing());
  for (int z = 0; z < od.nz; ++z)
    for (int y = 0; y < od.ny; ++y)
      for (int x = 0; x < od.nx; ++x) {
        double s = 0.0;
        for (int t = 0; t < taps; ++t)
          s += w[t] * (axis == 0 ? in(x + t, y, z) : axis == 1 ? in(x, y + t, z) : in(x, y, z + t));
        out(x, y, z) = s;
      }
  return out;
}

RealVolume smooth(const RealVolume& in, const std::array<std::vector<double>, 3>& w) {
  return filter_axis(filter_axis(filter_axis(in, w[0], 0), w[1], 1), w[2], 2);
}

std::string number(double v) {
  if (std::isinf(v))
    return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

nlohmann::json json_number(double v) {
  if (std::isinf(v))
    return v > 0 ? "inf" : "-inf";
  return v;
}

std::vector<RealVolume> load_as_real(const std::string& path) {
  const VolumeHeader h = read_header(path);
  if (h.dtype == "f32")
    return {read_real(path)};
  std::vector<RealVolume> out;
  for (const auto& echo : read_multi_echo(path).echoes)
    out.push_back(magnitude(echo));
  return out;
}

}  // namespace

std::vector<double> gaussian_window(int taps, double sigma) {
  std::vector<double> w(taps);
  const double c = (taps - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < taps; ++i) {
    w[i] = std::exp(-(i - c) * (i - c) / (2.0 * sigma * sigma));
    sum += w[i];
  }
  for (auto& x : w)
    x /= sum;
  return w;
}

double rmse(const RealVolume& ref, const RealVolume& test) {
  check_shapes(ref, test, "rmse");
  double s = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double d = ref[i] - test[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(ref.size()));
}

double psnr(const RealVolume& ref, const RealVolume& test) {
  check_shapes(ref, test, "psnr");
  const double range = value_range(ref);
  if (range == 0.0)
    throw ValidationError("psnr: degenerate reference (zero dynamic range)");
  const double e = rmse(ref, test);
  if (e == 0.0)
    return std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(range / e);
}

double ssim(const RealVolume& ref, const RealVolume& test, const SsimOptions& opts) {
  check_shapes(ref, test, "ssim");
  const double range = opts.dynamic_range > 0 ? opts.dynamic_range : value_range(ref);
  if (range == 0.0)
    throw ValidationError("ssim: degenerate reference (zero dynamic range)");
  const double c1 = (opts.k1 * range) * (opts.k1 * range);
  const double c2 = (opts.k2 * range) * (opts.k2 * range);

  std::array<std::vector<double>, 3> w;
  for (int axis = 0; axis < 3; ++axis) {
    int taps = std::min(opts.taps, ref.dims()[axis]);
    if (taps % 2 == 0)
      --taps;
    w[axis] = gaussian_window(taps, opts.sigma);
  }

  RealVolume xx(ref.dims(), ref.spacing()), yy(ref.dims(), ref.spacing()), xy(ref.dims(), ref.spacing());
  for (std::size_t i = 0; i < ref.size(); ++i) {
    xx[i] = ref[i] * ref[i];
    yy[i] = test[i] * test[i];
    xy[i] = ref[i] * test[i];
  }
  const RealVolume mx = smooth(ref, w), my = smooth(test, w);
  const RealVolume sxx = smooth(xx, w), syy = smooth(yy, w), sxy = smooth(xy, w);

  double total = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = sxx[i] - mx[i] * mx[i];
    const double vy = syy[i] - my[i] * my[i];
    const double cov = sxy[i] - mx[i] * my[i];
    total += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(mx.size());
}

MetricsRow compare_volumes(const std::vector<RealVolume>& ref, const std::vector<RealVolume>& test) {
  if (ref.empty() || ref.size() != test.size())
    throw ValidationError("compare: echo counts differ");
  double sq = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
  std::size_t n = 0;
  for (std::size_t e = 0; e < ref.size(); ++e) {
    check_shapes(ref[e], test[e], "compare");
    for (std::size_t i = 0; i < ref[e].size(); ++i) {
      const double d = ref[e][i] - test[e][i];
      sq += d * d;
      lo = std::min(lo, ref[e][i]);
      hi = std::max(hi, ref[e][i]);
    }
    n += ref[e].size();
  }
  if (!(hi > lo))
    throw ValidationError("compare: degenerate reference (zero dynamic range)");
  MetricsRow row;
  row.rmse = std::sqrt(sq / static_cast<double>(n));
  row.psnr_db = row.rmse == 0.0 ? std::numeric_limits<double>::infinity() : 20.0 * std::log10((hi - lo) / row.rmse);
  SsimOptions opts;
  opts.dynamic_range = hi - lo;
  for (std::size_t e = 0; e < ref.size(); ++e)
    row.ssim += ssim(ref[e], test[e], opts) / static_cast<double>(ref.size());
  return row;
}

void MetricsReport::summarize() {
  aggregates.clear();
  std::map<std::string, std::vector<const MetricsRow*>> by_condition;
  for (const auto& r : rows)
    by_condition[r.condition].push_back(&r);
  for (const auto& [cond, rs] : by_condition) {
    auto stats = [&](auto get) {
      Aggregate a;
      for (const auto* r : rs)
        a.mean += get(*r) / static_cast<double>(rs.size());
      if (rs.size() > 1) {
        double ss = 0.0;
        for (const auto* r : rs)
          ss += (get(*r) - a.mean) * (get(*r) - a.mean);
        a.std = std::sqrt(ss / static_cast<double>(rs.size() - 1));
      }
      return a;
    };
    aggregates[cond]["rmse"] = stats([](const MetricsRow& r) { return r.rmse; });
    aggregates[cond]["psnr_db"] = stats([](const MetricsRow& r) { return r.psnr_db; });
    aggregates[cond]["ssim"] = stats([](const MetricsRow& r) { return r.ssim; });
  }
}

std::string MetricsReport::to_json() const {
  nlohmann::json j;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : rows)
    j["rows"].push_back({{"id", r.id},
                         {"condition", r.condition},
                         {"rmse", json_number(r.rmse)},
                         {"psnr_db", json_number(r.psnr_db)},
                         {"ssim", json_number(r.ssim)}});
  j["aggregates"] = nlohmann::json::object();
  for (const auto& [cond, metrics] : aggregates)
    for (const auto& [name, a] : metrics)
      j["aggregates"][cond][name] = {{"mean", json_number(a.mean)}, {"std", json_number(a.std)}};
  if (!skipped.empty()) {
    j["skipped"] = nlohmann::json::array();
    for (const auto& [id, reason] : skipped)
      j["skipped"].push_back({{"id", id}, {"reason", reason}});
  }
  return j.dump(2) + "\n";
}

std::string MetricsReport::to_csv() const {
  std::string out = "id,condition,rmse,psnr_db,ssim\n";
  for (const auto& r : rows)
    out += r.id + "," + r.condition + "," + number(r.rmse) + "," + number(r.psnr_db) + "," + number(r.ssim) + "\n";
  return out;
}

MetricsReport report(const std::vector<PairInput>& pairs) {
  MetricsReport rep;
  for (const auto& p : pairs) {
    const std::string id = p.id.empty() ? std::filesystem::path(p.test_path).filename().string() : p.id;
    try {
      MetricsRow row = compare_volumes(load_as_real(p.ref_path), load_as_real(p.test_path));
      row.id = id;
      row.condition = p.condition;
      rep.rows.push_back(row);
    } catch (const std::exception& e) {
      rep.skipped.emplace_back(id, e.what());
    }
  }
  rep.summarize();
  return rep;
}

}  // namespace motionforge
