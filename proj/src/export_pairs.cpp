#include "motionforge/io.hpp"
#include "motionforge/motion.hpp"

#include "json.hpp"

#include <charconv>
#include <filesystem>
#include <random>

namespace motionforge {
namespace {

std::string scale_tag(double s) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof(buf), s);
  std::string tag(buf, r.ptr);
  for (auto& c : tag)
    if (c == '.')
      c = 'p';
  return tag;
}

}  // namespace

std::string export_pairs(const std::vector<std::string>& clean_paths, const MotionTrajectory& traj,
                         const SamplingSchedule& schedule, const ExportOptions& opts, const std::string& out_dir) {
  namespace fs = std::filesystem;
  if (opts.scales.empty())
    throw ValidationError("export_pairs: no scales given");
  if (!(opts.noise_sigma >= 0))
    throw ValidationError("export_pairs: noise_sigma must be >= 0");
  const MotionTrajectory peripheral = zero_central(traj, schedule, opts.central_fraction);

  nlohmann::json manifest;
  manifest["pairs"] = nlohmann::json::array();
  manifest["seed"] = opts.seed;
  manifest["schedule_mode"] = to_string(schedule.mode);
  manifest["central_fraction"] = opts.central_fraction;
  manifest["scales"] = opts.scales;
  manifest["noise_sigma"] = opts.noise_sigma;

  std::size_t pair_index = 0;
  for (const auto& clean_path : clean_paths) {
    VolumeHeader header;
    const MultiEchoVolume clean = read_multi_echo(clean_path, &header);
    const std::string stem = fs::path(sidecar_path(clean_path)).stem().string();
    const std::string clean_name = stem + "_clean";
    write_volume((fs::path(out_dir) / clean_name).string(), clean, header.field_T, header.b0_dir, header.meta);

    for (double s : opts.scales) {
      MultiEchoVolume corrupted = corrupt(clean, scale_trajectory(peripheral, s), schedule);
      if (opts.noise_sigma > 0) {
        std::mt19937_64 rng(opts.seed + pair_index);
        std::normal_distribution<double> noise(0.0, opts.noise_sigma);
        for (auto& echo : corrupted.echoes)
          for (auto& c : echo.data())
            c += cplx(noise(rng), noise(rng));
      }
      const std::string name = stem + "_s" + scale_tag(s) + "_corrupted";
      nlohmann::json meta = {{"scale", s}, {"source", clean_name}, {"seed", opts.seed}};
      write_volume((fs::path(out_dir) / name).string(), corrupted, header.field_T, header.b0_dir, meta);
      manifest["pairs"].push_back({{"id", stem + "_s" + scale_tag(s)},
                                   {"clean", clean_name},
                                   {"corrupted", name},
                                   {"scale", s}});
      ++pair_index;
    }
  }

  const std::string text = manifest.dump(2) + "\n";
  write_file_atomic((fs::path(out_dir) / "manifest.json").string(), text);
  return text;
}

}  // namespace motionforge
