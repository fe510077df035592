#include "doctest.h"
#include "support.hpp"

#include "motionforge/autofocus.hpp"
#include "motionforge/fft.hpp"
#include "motionforge/nelder_mead.hpp"
#include "motionforge/phantom.hpp"

using namespace motionforge;
using namespace testsupport;

namespace {

ComplexVolume line_image(const std::vector<double>& values) {
  ComplexVolume v({static_cast<int>(values.size()), 1, 1}, {1, 1, 1});
  for (std::size_t i = 0; i < values.size(); ++i)
    v[i] = values[i];
  return v;
}

// -sum v ln v of one gradient direction, straight from the definition.
double direct_entropy(const std::vector<cplx>& g) {
  double e = 0;
  for (const auto& c : g)
    e += std::norm(c);
  if (e == 0)
    return 0;
  double h = 0;
  for (const auto& c : g) {
    const double v = std::abs(c) / std::sqrt(e);
    if (v > 0)
      h -= v * std::log(v);
  }
  return h;
}

MultiEchoVolume scene_echoes(int n, int echoes) {
  AcquisitionParams acq = AcquisitionParams::standard();
  acq.te_ms.resize(echoes);
  return synthesize_mgre(make_phantom(standard_scene({n, n, n})), acq);
}

MultiEchoVolume to_kspace(const MultiEchoVolume& img) {
  MultiEchoVolume k = img;
  for (auto& e : k.echoes)
    e = fft3(e);
  return k;
}

}  // namespace

TEST_CASE("entropy of a constant image is zero and flagged") {
  ComplexVolume v({6, 6, 6}, {1, 1, 1});
  for (auto& c : v.data())
    c = cplx(2.0, 1.0);
  const auto r = gradient_entropy(v);
  CHECK(r.value == 0.0);
  CHECK(r.degenerate);
}

TEST_CASE("entropy of a one-hot gradient is zero") {
  const auto r = gradient_entropy(line_image({0, 0, 0, 0, 1, 1, 1, 1}));
  CHECK(r.value == 0.0);
}

TEST_CASE("entropy of two equal gradient voxels") {
  const auto r = gradient_entropy(line_image({0, 0, 1, 1, 1, 0, 0, 0}));
  CHECK(r.value == doctest::Approx(-2.0 * std::sqrt(0.5) * std::log(std::sqrt(0.5))).epsilon(1e-12));
  CHECK(r.value == doctest::Approx(0.4901).epsilon(1e-4));
}

TEST_CASE("entropy matches the definition on random volumes") {
  const Dims d{6, 5, 4};
  const auto v = random_volume(d, 17);
  std::vector<cplx> gx, gy;
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        gx.push_back(x + 1 < d.nx ? v(x + 1, y, z) - v(x, y, z) : cplx{});
        gy.push_back(y + 1 < d.ny ? v(x, y + 1, z) - v(x, y, z) : cplx{});
      }
  const auto r = gradient_entropy(v);
  CHECK(r.value == doctest::Approx(direct_entropy(gx) + direct_entropy(gy)).epsilon(1e-12));
  CHECK_FALSE(r.degenerate);
  CHECK_THROWS_AS(gradient_entropy(fft3(v)), ValidationError);
}

TEST_CASE("entropy rises when an image is blurred by motion") {
  const auto clean = scene_echoes(32, 1);
  const auto sched = make_schedule(clean.dims(), ScheduleMode::sequential);
  MotionTrajectory t(sched.n_tr());
  for (std::size_t i = 400; i < 600; ++i)
    t[i] = RigidMotion{{2.5, 0, -1.5}, {0, 0, 0}};
  const auto bad = corrupt(clean, t, sched);
  CHECK(gradient_entropy(bad.echoes[0]).value > gradient_entropy(clean.echoes[0]).value);
}

TEST_CASE("apply_correction with zero motion is the inverse transform") {
  const auto img = scene_echoes(16, 2);
  const auto sched = make_schedule(img.dims(), ScheduleMode::center_out);
  const auto out = apply_correction(to_kspace(img), MotionTrajectory(sched.n_tr()), sched);
  for (std::size_t e = 0; e < 2; ++e)
    CHECK(max_abs_diff(out.echoes[e], img.echoes[e]) <= 1e-12);
}

TEST_CASE("apply_correction inverts pure translations") {
  const auto img = scene_echoes(32, 2);
  const auto sched = make_schedule(img.dims(), ScheduleMode::alternating_hilo);
  TrajectoryGenSpec spec;
  spec.r_std_deg = {0, 0, 0};
  spec.seed = 21;
  const auto t = gen_trajectory(spec, sched);
  const auto corrected = apply_correction(to_kspace(corrupt(img, t, sched)), t, sched);
  for (std::size_t e = 0; e < 2; ++e)
    CHECK(rel_err(corrected.echoes[e], img.echoes[e]) <= 1e-5);
}

TEST_CASE("apply_correction undoes a 3 degree rotation up to interpolation loss") {
  // 64^3 keeps a one-voxel edge blur; at 32^3 the sharper edges lose ~7%.
  const auto img = scene_echoes(64, 1);
  const auto sched = make_schedule(img.dims(), ScheduleMode::sequential);
  const MotionTrajectory t(sched.n_tr(), RigidMotion{{0, 0, 0}, {0, 0, 3}});
  const auto corrected = apply_correction(to_kspace(corrupt(img, t, sched)), t, sched);
  CHECK(rel_err(corrected.echoes[0], img.echoes[0]) <= 5e-2);
}

TEST_CASE("apply_correction validates its inputs") {
  const auto img = scene_echoes(16, 1);
  const auto sched = make_schedule(img.dims(), ScheduleMode::sequential);
  CHECK_THROWS_AS(apply_correction(img, MotionTrajectory(sched.n_tr()), sched), ValidationError);
  CHECK_THROWS_AS(apply_correction(to_kspace(img), MotionTrajectory(3), sched), ValidationError);
}

TEST_CASE("cost at zero motion is the entropy of the naive image") {
  const auto img = scene_echoes(16, 1);
  const auto sched = make_schedule(img.dims(), ScheduleMode::sequential);
  AutofocusConfig cfg;
  cfg.lambda = 123.0;
  const auto k = fft3(img.echoes[0]);
  CHECK(cost(MotionTrajectory(sched.n_tr()), k, sched, cfg) == gradient_entropy(ifft3(k)).value);
}

TEST_CASE("regularizer: constant motion is free, one 1 mm step costs lambda") {
  const auto img = scene_echoes(16, 1);
  const auto sched = make_schedule(img.dims(), ScheduleMode::sequential);
  const auto k = fft3(img.echoes[0]);
  AutofocusConfig cfg;
  cfg.lambda = 10.0;

  const MotionTrajectory flat(sched.n_tr(), RigidMotion{{0.5, 0.25, 0}, {0, 0, 0}});
  CHECK(temporal_regularizer(flat) == 0.0);

  MotionTrajectory step(sched.n_tr());
  for (std::size_t i = sched.n_tr() / 2; i < sched.n_tr(); ++i)
    step[i].t_mm[0] = 1.0;
  CHECK(temporal_regularizer(step) == 1.0);
  MultiEchoVolume one;
  one.echoes = {k};
  one.te_ms = {5};
  const double phi = gradient_entropy(apply_correction(one, step, sched).echoes[0]).value;
  CHECK(cost(step, k, sched, cfg) - phi == doctest::Approx(10.0).epsilon(1e-12));

  MotionTrajectory turn(4);
  turn[2].r_deg[1] = 2.0;
  CHECK(temporal_regularizer(turn, 0.5) == doctest::Approx(4.0));
}

TEST_CASE("default lambda scales the naive entropy") {
  const auto img = scene_echoes(16, 1);
  const auto sched = make_schedule(img.dims(), ScheduleMode::sequential);
  AutofocusConfig cfg;
  cfg.n_segments = 4;
  CHECK(default_lambda(fft3(img.echoes[0]), sched, cfg) ==
        doctest::Approx(0.05 * gradient_entropy(img.echoes[0]).value / 4));
}

TEST_CASE("segments partition the acquisition uniformly") {
  std::size_t next = 0;
  for (int s = 0; s < 7; ++s) {
    const auto [lo, hi] = segment_range(100, 7, s);
    CHECK(lo == next);
    CHECK(hi - lo >= 14);
    CHECK(hi - lo <= 15);
    next = hi;
  }
  CHECK(next == 100);
}

TEST_CASE("autofocus configuration is validated") {
  AutofocusConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.n_segments = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = {};
  cfg.param_tolerance = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = {};
  cfg.lambda = std::nan("");
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("estimate on motion-free data keeps the image") {
  const auto img = scene_echoes(16, 2);
  const auto sched = make_schedule(img.dims(), ScheduleMode::sequential);
  AutofocusConfig cfg;
  cfg.n_segments = 4;
  const auto res = estimate(img, sched, cfg);
  CHECK(res.final_cost <= res.initial_cost);
  CHECK(res.initial_cost == gradient_entropy(ifft3(fft3(img.echoes[0]))).value);
  CHECK(res.initial_cost == doctest::Approx(gradient_entropy(img.echoes[0]).value).epsilon(1e-12));
  for (std::size_t e = 0; e < 2; ++e)
    CHECK(rel_err(res.corrected.echoes[e], img.echoes[e]) <= 1e-3);
}

TEST_CASE("estimate lowers the cost monotonically on corrupted data") {
  const auto clean = scene_echoes(32, 1);
  const auto sched = make_schedule(clean.dims(), ScheduleMode::sequential);
  MotionTrajectory t(sched.n_tr());
  for (std::size_t i = 384; i < 640; ++i)
    t[i] = RigidMotion{{2.0, 0, 0}, {0, 0, 0}};
  const auto bad = corrupt(clean, t, sched);
  AutofocusConfig cfg;
  cfg.max_iters = 2;
  const auto res = estimate(bad, sched, cfg);
  REQUIRE(res.cost_trace.size() >= 2);
  CHECK(res.cost_trace.front() == res.initial_cost);
  CHECK(res.cost_trace.back() == res.final_cost);
  for (std::size_t i = 1; i < res.cost_trace.size(); ++i)
    CHECK(res.cost_trace[i] <= res.cost_trace[i - 1]);
  CHECK(res.final_cost < res.initial_cost);
  CHECK(res.theta_hat.size() == sched.n_tr());
  CHECK(res.corrected.domain() == Domain::image);
  // Rerunning gives the same answer.
  const auto again = estimate(bad, sched, cfg);
  CHECK(again.theta_hat == res.theta_hat);
  CHECK(again.cost_trace == res.cost_trace);
}

TEST_CASE("estimate validates its inputs") {
  const auto img = scene_echoes(16, 1);
  const auto sched = make_schedule({16, 16, 8}, ScheduleMode::sequential);
  CHECK_THROWS_AS(estimate(img, sched, {}), ValidationError);
  const auto good = make_schedule(img.dims(), ScheduleMode::sequential);
  CHECK_THROWS_AS(estimate(to_kspace(img), good, {}), ValidationError);
}

TEST_CASE("cost trace CSV") {
  CHECK(cost_trace_to_csv({3.5, 2.25}) == "iter,cost\n0,3.5\n1,2.25\n");
}

TEST_CASE("nelder-mead minimizes a shifted quadratic and Rosenbrock") {
  auto quad = [](std::span<const double> x) { return (x[0] - 1.5) * (x[0] - 1.5) + 4 * (x[1] + 0.5) * (x[1] + 0.5); };
  const auto q = nelder_mead(quad, {0, 0}, {1.0, 1e-8, 1000});
  CHECK(q.converged);
  CHECK(q.x[0] == doctest::Approx(1.5).epsilon(1e-6));
  CHECK(q.x[1] == doctest::Approx(-0.5).epsilon(1e-6));

  auto rosen = [](std::span<const double> x) {
    return 100 * (x[1] - x[0] * x[0]) * (x[1] - x[0] * x[0]) + (1 - x[0]) * (1 - x[0]);
  };
  const auto r = nelder_mead(rosen, {-1.2, 1.0}, {0.5, 1e-9, 5000});
  CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(r.x[1] == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("nelder-mead respects infinite walls and its evaluation budget") {
  auto walled = [](std::span<const double> x) {
    return x[0] < 0.25 ? std::numeric_limits<double>::infinity() : x[0] * x[0];
  };
  const auto w = nelder_mead(walled, {2.0}, {1.0, 1e-9, 500});
  CHECK(w.x[0] >= 0.25);
  CHECK(w.x[0] == doctest::Approx(0.25).epsilon(1e-3));

  int calls = 0;
  auto counted = [&](std::span<const double> x) {
    ++calls;
    return x[0] * x[0] + x[1] * x[1];
  };
  const auto c = nelder_mead(counted, {5, 5}, {1.0, 1e-12, 20});
  CHECK(c.evals == calls);
  CHECK(calls <= 20 + 2);
  CHECK_FALSE(c.converged);
}
