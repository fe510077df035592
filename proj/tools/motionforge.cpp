// motionforge command-line front end: phantom -> simulate -> autofocus -> qsm -> metrics,
// plus trajectory utilities and training-pair export.

#include "motionforge/autofocus.hpp"
#include "motionforge/io.hpp"
#include "motionforge/metrics.hpp"
#include "motionforge/motion.hpp"
#include "motionforge/phantom.hpp"
#include "motionforge/qsm.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <fftw3.h>

#include <filesystem>
#include <iostream>
#include <random>

#ifndef MOTIONFORGE_VERSION
#define MOTIONFORGE_VERSION "dev"
#endif

using namespace motionforge;
using nlohmann::json;

namespace {

struct Common {
  std::uint64_t seed = 0;
  std::string out;
  std::string log;
};

// Parameters and inputs of the running command, dumped to --log on success.
struct RunRecord {
  json params = json::object();
  json inputs = json::object();
  json outputs = json::object();
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  cmd->add_option("--out", c.out, "Output path")->required();
  cmd->add_option("--log", c.log, "Write a JSON run record to this path");
}

Dims parse_dims(const std::vector<int>& v) {
  if (v.size() == 1)
    return {v[0], v[0], v[0]};
  if (v.size() == 3)
    return {v[0], v[1], v[2]};
  throw ValidationError("--dims takes one or three integers");
}

Dims dims_from(const std::vector<int>& dims, const std::string& like) {
  if (!like.empty())
    return read_header(like).dims;
  if (dims.empty())
    throw ValidationError("one of --dims or --like is required");
  return parse_dims(dims);
}

AcquisitionParams acquisition_from(const VolumeHeader& h) {
  AcquisitionParams acq;
  acq.te_ms = h.te_ms;
  acq.field_T = h.field_T;
  acq.b0_dir = h.b0_dir;
  return acq;
}

MotionTrajectory read_trajectory(const std::string& path) { return trajectory_from_csv(read_file(path)); }

void write_run_record(const std::string& command, const Common& c, const RunRecord& rec,
                      const std::vector<std::string>& argv) {
  if (c.log.empty())
    return;
  json j;
  j["command"] = command;
  j["argv"] = argv;
  j["seed"] = c.seed;
  j["out"] = c.out;
  j["parameters"] = rec.params;
  j["inputs"] = rec.inputs;
  j["outputs"] = rec.outputs;
  const std::string json_version = std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                   std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                   std::to_string(NLOHMANN_JSON_VERSION_PATCH);
  j["versions"] = {{"motionforge", MOTIONFORGE_VERSION}, {"fftw", std::string(fftw_version)}, {"nlohmann_json", json_version}};
  write_file_atomic(c.log, j.dump(2) + "\n");
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  CLI::App app{"Motion simulation, autofocus correction and simplified QSM for multi-echo GRE volumes"};
  app.require_subcommand(1);
  app.set_version_flag("--version", MOTIONFORGE_VERSION);

  Common common;
  RunRecord rec;
  std::string command;

  // phantom
  auto* phantom_cmd = app.add_subcommand("phantom", "Build a phantom and write its motion-free mGRE volume");
  add_common(phantom_cmd, common);
  std::string ph_spec, ph_scene = "standard", ph_chi_out;
  std::vector<int> ph_dims{64};
  double ph_spacing = 1.0;
  int ph_echoes = 10;
  phantom_cmd->add_option("--spec", ph_spec, "Phantom spec JSON (overrides --scene)");
  phantom_cmd->add_option("--scene", ph_scene, "Built-in scene")->check(CLI::IsMember({"standard", "perturbed"}));
  phantom_cmd->add_option("--dims", ph_dims, "Grid size (n or nx ny nz)")->expected(1, 3);
  phantom_cmd->add_option("--spacing", ph_spacing, "Isotropic voxel size, mm");
  phantom_cmd->add_option("--echoes", ph_echoes, "Number of echoes of the standard protocol");
  phantom_cmd->add_option("--chi-out", ph_chi_out, "Also write the true susceptibility map (f32)");

  // traj
  auto* traj_cmd = app.add_subcommand("traj", "Trajectory utilities");
  traj_cmd->require_subcommand(1);
  std::string traj_schedule = "sequential", traj_like, traj_in;
  std::vector<int> traj_dims;
  TrajectoryGenSpec gen;
  std::string gen_mode = "gaussian";
  double zc_fraction = 1.0 / 3.0, scale_factor = 1.0;

  auto* gen_cmd = traj_cmd->add_subcommand("gen", "Generate a random trajectory");
  add_common(gen_cmd, common);
  gen_cmd->add_option("--mode", gen_mode, "Trajectory family")->check(CLI::IsMember({"gaussian", "trapezoid"}));
  gen_cmd->add_option("--schedule", traj_schedule, "Phase-encode ordering")
      ->check(CLI::IsMember({"sequential", "center-out", "alternating-hilo"}));
  gen_cmd->add_option("--dims", traj_dims, "Grid size (n or nx ny nz)")->expected(1, 3);
  gen_cmd->add_option("--like", traj_like, "Take the grid size from this volume");
  gen_cmd->add_option("--t-std", gen.t_std_mm, "Translation std (tx ty tz), mm");
  gen_cmd->add_option("--r-std", gen.r_std_deg, "Rotation std (rx ry rz), degrees");
  gen_cmd->add_option("--states", gen.n_states, "Piecewise-constant states (gaussian)");
  gen_cmd->add_option("--events", gen.n_events, "Number of events (trapezoid)");
  gen_cmd->add_option("--ramp", gen.ramp_trs, "Ramp length in TRs (0: automatic)");
  gen_cmd->add_option("--plateau", gen.plateau_trs, "Plateau length in TRs (0: automatic)");
  gen_cmd->add_flag("--periphery", gen.restrict_to_periphery, "Zero the central third of phase encodes");

  auto* zc_cmd = traj_cmd->add_subcommand("zero-central", "Zero the poses of central-band lines");
  add_common(zc_cmd, common);
  zc_cmd->add_option("--in", traj_in, "Trajectory CSV")->required();
  zc_cmd->add_option("--schedule", traj_schedule, "Phase-encode ordering")
      ->check(CLI::IsMember({"sequential", "center-out", "alternating-hilo"}));
  zc_cmd->add_option("--dims", traj_dims, "Grid size (n or nx ny nz)")->expected(1, 3);
  zc_cmd->add_option("--like", traj_like, "Take the grid size from this volume");
  zc_cmd->add_option("--fraction", zc_fraction, "Central band width as a fraction of ny");

  auto* scale_cmd = traj_cmd->add_subcommand("scale", "Multiply every motion parameter");
  add_common(scale_cmd, common);
  scale_cmd->add_option("--in", traj_in, "Trajectory CSV")->required();
  scale_cmd->add_option("--factor", scale_factor, "Scale factor")->required();

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "Corrupt a volume with a motion trajectory");
  add_common(sim_cmd, common);
  std::string sim_in, sim_traj, sim_schedule = "sequential";
  double sim_noise = 0.0;
  sim_cmd->add_option("--in", sim_in, "Motion-free mGRE volume")->required();
  sim_cmd->add_option("--traj", sim_traj, "Trajectory CSV")->required();
  sim_cmd->add_option("--schedule", sim_schedule, "Phase-encode ordering")
      ->check(CLI::IsMember({"sequential", "center-out", "alternating-hilo"}));
  sim_cmd->add_option("--noise", sim_noise, "Additive complex Gaussian noise sigma");

  // autofocus
  auto* af_cmd = app.add_subcommand("autofocus", "Estimate and correct motion by gradient-entropy autofocus");
  add_common(af_cmd, common);
  std::string af_in, af_schedule = "sequential", af_traj_out, af_trace_out;
  AutofocusConfig af;
  af_cmd->add_option("--in", af_in, "Corrupted mGRE volume")->required();
  af_cmd->add_option("--schedule", af_schedule, "Phase-encode ordering")
      ->check(CLI::IsMember({"sequential", "center-out", "alternating-hilo"}));
  af_cmd->add_option("--lambda", af.lambda, "Temporal smoothness weight (< 0: automatic)");
  af_cmd->add_option("--segments", af.n_segments, "Motion segments over the acquisition");
  af_cmd->add_option("--max-iters", af.max_iters, "Coordinate sweeps per level");
  af_cmd->add_option("--tolerance", af.param_tolerance, "Parameter tolerance, mm / degrees");
  af_cmd->add_option("--levels", af.multiscale_levels, "Resolution levels");
  af_cmd->add_option("--search-bound", af.search_bound, "Bound on each parameter, mm / degrees");
  af_cmd->add_option("--max-evals", af.max_evals_per_segment, "Cost evaluations per window search");
  af_cmd->add_flag("--rotations", af.estimate_rotations, "Also estimate rotations");
  af_cmd->add_option("--traj-out", af_traj_out, "Write the estimated trajectory CSV");
  af_cmd->add_option("--trace-out", af_trace_out, "Write the cost trace CSV");

  // qsm
  auto* qsm_cmd = app.add_subcommand("qsm", "Fit the field and invert the dipole kernel");
  add_common(qsm_cmd, common);
  std::string qsm_in, qsm_method = "tkd", qsm_field_out;
  double qsm_param = 0.2;
  FitOptions fit;
  qsm_cmd->add_option("--in", qsm_in, "mGRE volume")->required();
  qsm_cmd->add_option("--method", qsm_method, "Dipole inversion")->check(CLI::IsMember({"tkd", "tikhonov"}));
  qsm_cmd->add_option("--param", qsm_param, "TKD threshold or Tikhonov weight");
  qsm_cmd->add_option("--mask-fraction", fit.mask_fraction, "Mask threshold, fraction of max first-echo magnitude");
  qsm_cmd->add_option("--field-out", qsm_field_out, "Also write the fitted field (ppm)");
  std::string qsm_on_wrap = "error";
  qsm_cmd->add_option("--on-wrap", qsm_on_wrap, "Echo-to-echo phase wrap: fail, or drop the voxel from the mask")
      ->check(CLI::IsMember({"error", "exclude"}));

  // metrics
  auto* met_cmd = app.add_subcommand("metrics", "RMSE / PSNR / SSIM report over volume pairs");
  add_common(met_cmd, common);
  std::vector<std::string> met_pairs;
  std::string met_csv;
  met_cmd->add_option("--pair", met_pairs, "ref,test,condition[,id]")->take_all();
  met_cmd->add_option("--csv", met_csv, "Also write the CSV mirror");

  // export-pairs
  auto* exp_cmd = app.add_subcommand("export-pairs", "Write clean/corrupted training pairs and a manifest");
  add_common(exp_cmd, common);
  std::vector<std::string> exp_clean;
  std::string exp_traj, exp_schedule = "sequential";
  ExportOptions exp;
  exp_cmd->add_option("--clean", exp_clean, "Clean mGRE volumes")->required()->take_all();
  exp_cmd->add_option("--traj", exp_traj, "Trajectory CSV")->required();
  exp_cmd->add_option("--schedule", exp_schedule, "Phase-encode ordering")
      ->check(CLI::IsMember({"sequential", "center-out", "alternating-hilo"}));
  exp_cmd->add_option("--scales", exp.scales, "Trajectory scale factors")->take_all();
  exp_cmd->add_option("--fraction", exp.central_fraction, "Central phase-encode fraction kept motion-free");
  exp_cmd->add_option("--noise", exp.noise_sigma, "Complex Gaussian noise std");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (phantom_cmd->parsed()) {
      command = "phantom";
      PhantomSpec spec;
      const Dims dims = parse_dims(ph_dims);
      const Spacing sp{ph_spacing, ph_spacing, ph_spacing};
      if (!ph_spec.empty()) {
        spec = phantom_spec_from_json(read_file(ph_spec));
        rec.inputs["spec"] = ph_spec;
      } else if (ph_scene == "perturbed") {
        spec = perturbed_scene(static_cast<unsigned>(common.seed), dims, sp);
      } else {
        spec = standard_scene(dims, sp);
      }
      AcquisitionParams acq = AcquisitionParams::standard();
      if (ph_echoes < 1)
        throw ValidationError("--echoes must be >= 1");
      acq.te_ms.resize(std::min<std::size_t>(acq.te_ms.size(), ph_echoes));
      while (acq.te_ms.size() < static_cast<std::size_t>(ph_echoes))
        acq.te_ms.push_back(acq.te_ms.back() + 3.6);
      const Phantom ph = make_phantom(spec);
      const MultiEchoVolume mgre = synthesize_mgre(ph, acq);
      write_volume(common.out, mgre, acq.field_T, acq.b0_dir, {{"kind", "mgre"}, {"scene", ph_spec.empty() ? ph_scene : "spec"}});
      if (!ph_chi_out.empty())
        write_volume(ph_chi_out, ph.chi_ppm, {{"kind", "chi"}, {"source", "phantom"}});
      rec.params = json::parse(phantom_spec_to_json(spec));
      rec.params["scene"] = ph_spec.empty() ? ph_scene : "spec";
      rec.params["te_ms"] = acq.te_ms;
      rec.outputs = {{"mgre", common.out}, {"chi", ph_chi_out}};
    } else if (gen_cmd->parsed()) {
      command = "traj gen";
      gen.mode = trajectory_mode_from_string(gen_mode);
      gen.seed = common.seed;
      const Dims dims = dims_from(traj_dims, traj_like);
      const auto schedule = make_schedule(dims, schedule_mode_from_string(traj_schedule));
      write_file_atomic(common.out, trajectory_to_csv(gen_trajectory(gen, schedule)));
      rec.params = {{"mode", gen_mode}, {"schedule", traj_schedule}, {"dims", {dims.nx, dims.ny, dims.nz}},
                    {"t_std_mm", gen.t_std_mm}, {"r_std_deg", gen.r_std_deg}, {"n_states", gen.n_states},
                    {"n_events", gen.n_events}, {"ramp_trs", gen.ramp_trs}, {"plateau_trs", gen.plateau_trs},
                    {"periphery", gen.restrict_to_periphery}};
    } else if (zc_cmd->parsed()) {
      command = "traj zero-central";
      const Dims dims = dims_from(traj_dims, traj_like);
      const auto schedule = make_schedule(dims, schedule_mode_from_string(traj_schedule));
      write_file_atomic(common.out, trajectory_to_csv(zero_central(read_trajectory(traj_in), schedule, zc_fraction)));
      rec.inputs["traj"] = traj_in;
      rec.params = {{"schedule", traj_schedule}, {"dims", {dims.nx, dims.ny, dims.nz}}, {"fraction", zc_fraction}};
    } else if (scale_cmd->parsed()) {
      command = "traj scale";
      write_file_atomic(common.out, trajectory_to_csv(scale_trajectory(read_trajectory(traj_in), scale_factor)));
      rec.inputs["traj"] = traj_in;
      rec.params = {{"factor", scale_factor}};
    } else if (sim_cmd->parsed()) {
      command = "simulate";
      VolumeHeader h;
      const MultiEchoVolume clean = read_multi_echo(sim_in, &h);
      const auto schedule = make_schedule(clean.dims(), schedule_mode_from_string(sim_schedule));
      MultiEchoVolume out = corrupt(clean, read_trajectory(sim_traj), schedule);
      if (sim_noise < 0)
        throw ValidationError("--noise must be >= 0");
      if (sim_noise > 0) {
        std::mt19937_64 rng(common.seed);
        std::normal_distribution<double> noise(0.0, sim_noise);
        for (auto& echo : out.echoes)
          for (auto& c : echo.data())
            c += cplx(noise(rng), noise(rng));
      }
      write_volume(common.out, out, h.field_T, h.b0_dir, {{"kind", "mgre"}, {"traj", sim_traj}});
      rec.inputs = {{"volume", sim_in}, {"traj", sim_traj}};
      rec.params = {{"schedule", sim_schedule}, {"noise_sigma", sim_noise}};
    } else if (af_cmd->parsed()) {
      command = "autofocus";
      VolumeHeader h;
      const MultiEchoVolume in = read_multi_echo(af_in, &h);
      const auto schedule = make_schedule(in.dims(), schedule_mode_from_string(af_schedule));
      const AutofocusResult res = estimate(in, schedule, af);
      write_volume(common.out, res.corrected, h.field_T, h.b0_dir, {{"kind", "mgre"}, {"corrected_by", "autofocus"}});
      if (!af_traj_out.empty())
        write_file_atomic(af_traj_out, trajectory_to_csv(res.theta_hat));
      if (!af_trace_out.empty())
        write_file_atomic(af_trace_out, cost_trace_to_csv(res.cost_trace));
      rec.inputs["volume"] = af_in;
      rec.params = {{"schedule", af_schedule}, {"lambda", af.lambda}, {"segments", af.n_segments},
                    {"max_iters", af.max_iters}, {"tolerance", af.param_tolerance},
                    {"levels", af.multiscale_levels}, {"search_bound", af.search_bound},
                    {"max_evals", af.max_evals_per_segment}, {"rotations", af.estimate_rotations}};
      rec.outputs = {{"traj", af_traj_out}, {"trace", af_trace_out}, {"lambda_used", res.lambda},
                     {"initial_cost", res.initial_cost}, {"final_cost", res.final_cost},
                     {"converged", res.converged}, {"evaluations", res.evaluations}};
    } else if (qsm_cmd->parsed()) {
      command = "qsm";
      VolumeHeader h;
      const MultiEchoVolume in = read_multi_echo(qsm_in, &h);
      const AcquisitionParams acq = acquisition_from(h);
      const DipoleMethod method = dipole_method_from_string(qsm_method);
      fit.on_wrap = qsm_on_wrap == "exclude" ? WrapPolicy::exclude : WrapPolicy::error;
      const FieldMap field = fit_field(in, acq, fit);
      const ChiMap chi = invert_dipole(field, dipole_kernel(in.dims(), in.spacing(), acq.b0_dir), method, qsm_param);
      if (chi.empty_mask)
        std::cerr << "warning: empty mask, susceptibility map is all zero\n";
      write_volume(common.out, chi.chi_ppm,
                   {{"kind", "chi"}, {"method", qsm_method}, {"param", qsm_param}, {"mask_fraction", fit.mask_fraction}});
      if (!qsm_field_out.empty())
        write_volume(qsm_field_out, field.b_ppm, {{"kind", "field_ppm"}, {"mask_fraction", fit.mask_fraction}});
      rec.inputs["volume"] = qsm_in;
      rec.params = {{"method", qsm_method}, {"param", qsm_param}, {"mask_fraction", fit.mask_fraction},
                    {"on_wrap", qsm_on_wrap}};
      rec.outputs = {{"empty_mask", chi.empty_mask}, {"field", qsm_field_out}, {"wrapped_voxels", field.wrapped_voxels}};
    } else if (met_cmd->parsed()) {
      command = "metrics";
      std::vector<PairInput> pairs;
      for (const auto& p : met_pairs) {
        std::vector<std::string> parts;
        std::size_t start = 0;
        for (std::size_t comma; (comma = p.find(',', start)) != std::string::npos; start = comma + 1)
          parts.push_back(p.substr(start, comma - start));
        parts.push_back(p.substr(start));
        if (parts.size() < 3 || parts.size() > 4)
          throw ValidationError("--pair expects ref,test,condition[,id]: " + p);
        pairs.push_back({parts[0], parts[1], parts[2], parts.size() == 4 ? parts[3] : ""});
      }
      const MetricsReport r = report(pairs);
      for (const auto& [id, reason] : r.skipped)
        std::cerr << "skipped " << id << ": " << reason << "\n";
      write_file_atomic(common.out, r.to_json());
      if (!met_csv.empty())
        write_file_atomic(met_csv, r.to_csv());
      rec.inputs["pairs"] = met_pairs;
      rec.outputs = {{"rows", r.rows.size()}, {"skipped", r.skipped.size()}, {"csv", met_csv}};
    } else if (exp_cmd->parsed()) {
      command = "export-pairs";
      exp.seed = common.seed;
      if (exp_clean.empty())
        throw ValidationError("--clean needs at least one volume");
      const auto schedule = make_schedule(read_header(exp_clean.front()).dims, schedule_mode_from_string(exp_schedule));
      std::filesystem::create_directories(common.out);
      export_pairs(exp_clean, read_trajectory(exp_traj), schedule, exp, common.out);
      rec.inputs = {{"clean", exp_clean}, {"traj", exp_traj}};
      rec.params = {{"schedule", exp_schedule}, {"scales", exp.scales}, {"fraction", exp.central_fraction},
                    {"noise_sigma", exp.noise_sigma}};
    }
    write_run_record(command, common, rec, args);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: malformed JSON: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
