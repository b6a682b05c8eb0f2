// Copyright 2026 The entrynav Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "entrynav/pipeline.hpp"
#include "entrynav/synthetic.hpp"

namespace fs = std::filesystem;
using namespace entrynav;

namespace {

struct CommonArgs {
  std::string manifest;
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  std::vector<std::string> sets;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool needs_manifest) {
  auto* m = cmd->add_option("--manifest", a.manifest, "Manifest JSON");
  if (needs_manifest) m->required();
  cmd->add_option("--config", a.config, "Pipeline config JSON");
  cmd->add_option("--out", a.out, "Output directory");
  cmd->add_option("--seed", a.seed, "64-bit seed (overrides the config)");
  cmd->add_option("--jobs", a.jobs, "Concurrent entries")->check(CLI::PositiveNumber);
  cmd->add_option("--set", a.sets, "Config override key=value (repeatable)");
  cmd->add_flag("--quiet", a.quiet, "Suppress progress lines");
}

PipelineConfig resolve_config(const CommonArgs& a) {
  PipelineConfig cfg = a.config.empty() ? PipelineConfig{} : load_config(a.config);
  for (const auto& s : a.sets) cfg = apply_override(cfg, s);
  if (a.seed) cfg.seed = *a.seed;
  cfg.validate();
  return cfg;
}

void print_summary(const std::string& name, const BatchSummary& s) {
  std::cout << name << ": " << s.count(EntryStatus::Ok) << " ok, " << s.count(EntryStatus::Skipped) << " skipped, "
            << s.count(EntryStatus::Error) << " errors\n";
}

int check(bool ok, const std::string& what, int& failures) {
  std::cout << (ok ? "PASS " : "FAIL ") << what << "\n";
  failures += ok ? 0 : 1;
  return failures;
}

/// Regenerates the bundled scenes and episode suite in `dir` and checks the
/// end-to-end oracles on them.
int selftest(const fs::path& dir, const PipelineConfig& base) {
  int failures = 0;
  PipelineConfig cfg = base;
  cfg.stride = 1;
  synth::write_scene_set(dir / "scenes", synth::bundled_scenes(), cfg.camera_height);
  const Manifest m = load_manifest(dir / "scenes" / "manifest.json");
  Log log(true);
  const fs::path out = dir / "out";
  const BatchSummary ann = cmd_annotate(m, cfg, out, 1, log);
  for (const auto& r : ann.results) {
    if (r.id == "blocked") {
      check(r.status == EntryStatus::Skipped && r.message == "unreachable", "blocked scene skipped as unreachable",
            failures);
      continue;
    }
    bool ok = r.status == EntryStatus::Ok;
    if (ok) {
      const OccupancyGrid g = read_grid(out / r.id / "grid.pgm", out / r.id / "grid.json");
      const GridPath p = path_from_json(nlohmann::json::parse(io::read_file(out / r.id / "path.json")));
      ok = p.cells.back() == g.target_cell() && p.cells.front() == g.agent_cell();
    }
    check(ok, r.id + " annotated with a path ending at the anchored target", failures);
  }
  const BatchSummary cond = cmd_condition(m, cfg, out, 1, log);
  check(cond.count(EntryStatus::Ok) == ann.count(EntryStatus::Ok), "condition runs on every annotated scene", failures);

  for (const auto& e : m.entries) {
    const SceneGeometry scene = load_scene(e, 1);
    ReprojectOptions opt;
    const RigidTransform pose = scene.camera.pose();
    const auto frames = reproject_cloud(scene.cloud, scene.camera, std::span(&pose, 1), {}, opt);
    double worst = 0.0;
    for (int row = 0; row < scene.depth.height; ++row)
      for (int col = 0; col < scene.depth.width; ++col)
        worst = std::max(worst, std::abs(frames[0].at(col, row) - scene.depth.at(col, row)));
    check(worst < 1e-6, e.id + " identity reprojection reproduces depth", failures);
  }

  const auto suite = synth::random_suite(20, synth::kSuiteSeed, cfg);
  const EvalResult res = evaluate(suite, "oracle", 0.0, cfg.seed, cfg.sim_options());
  check(res.report.sr_030 == 1.0, "oracle SR(0.3m) = 1 on the 20-episode suite", failures);
  check(res.report.tr_mean < 0.05, "oracle TR(mean) < 0.05 m on the 20-episode suite", failures);
  std::cout << (failures == 0 ? "selftest passed\n" : "selftest failed\n");
  return failures == 0 ? 0 : 1;
}

/// Writes the bundled data tree: scenes, config and episode suites.
void write_bundle(const fs::path& dir, const PipelineConfig& base) {
  PipelineConfig cfg = base;
  cfg.stride = 1;
  synth::write_scene_set(dir, synth::bundled_scenes(), cfg.camera_height);
  save_config(dir / "config.json", cfg);
  write_episode_set(dir / "suite20", synth::random_suite(20, synth::kSuiteSeed, cfg));
  write_episode_set(dir / "suite200", synth::random_suite(200, synth::kSuiteSeed, cfg));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"entrynav: entrance-navigation annotation geometry, flow masking and evaluation"};
  app.require_subcommand(1);

  CommonArgs annotate_a, condition_a, flow_a, eval_a, swap_a, self_a, synth_a;
  auto* annotate = app.add_subcommand("annotate", "Depth scenes to grids, paths and trajectories");
  add_common(annotate, annotate_a, true);
  auto* condition = app.add_subcommand("condition", "Plücker maps and constraint frames along annotated trajectories");
  add_common(condition, condition_a, true);
  auto* flow = app.add_subcommand("flowmask", "Flow magnitude and top-k salient masks");
  add_common(flow, flow_a, false);
  std::vector<std::string> flow_files;
  std::optional<double> ratio;
  flow->add_option("files", flow_files, ".flo files (in addition to manifest flow_dir entries)");
  flow->add_option("--ratio", ratio, "Mask ratio in (0, 1]");
  auto* eval = app.add_subcommand("eval", "Run a scripted policy over an episode set");
  add_common(eval, eval_a, true);
  std::optional<std::string> policy;
  std::optional<double> sigma;
  eval->add_option("--policy", policy, "oracle | noisy_oracle | greedy_straight | frozen");
  eval->add_option("--sigma", sigma, "Waypoint noise std for noisy_oracle (meters)");
  auto* swap = app.add_subcommand("swap-negatives", "Seeded mismatched instruction/observation pairs");
  add_common(swap, swap_a, true);
  auto* self = app.add_subcommand("selftest", "Bundled synthetic-scene oracle suite");
  add_common(self, self_a, false);
  self_a.out = (fs::temp_directory_path() / "entrynav_selftest").string();
  auto* synth_cmd = app.add_subcommand("synth", "Write the bundled synthetic data tree");
  add_common(synth_cmd, synth_a, false);
  synth_a.out = "data";

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*annotate) {
      const auto cfg = resolve_config(annotate_a);
      Log log(annotate_a.quiet);
      const auto s = cmd_annotate(load_manifest(annotate_a.manifest), cfg, annotate_a.out, annotate_a.jobs, log);
      print_summary("annotate", s);
      return s.exit_code();
    }
    if (*condition) {
      const auto cfg = resolve_config(condition_a);
      Log log(condition_a.quiet);
      const auto s = cmd_condition(load_manifest(condition_a.manifest), cfg, condition_a.out, condition_a.jobs, log);
      print_summary("condition", s);
      return s.exit_code();
    }
    if (*flow) {
      auto cfg = resolve_config(flow_a);
      if (ratio) cfg = apply_override(cfg, "mask_ratio=" + std::to_string(*ratio));
      std::vector<FlowJob> jobs;
      if (!flow_a.manifest.empty()) jobs = flow_jobs_from_manifest(load_manifest(flow_a.manifest));
      for (const auto& f : flow_files) jobs.push_back({"", f});
      if (jobs.empty()) throw UsageError("flowmask: no .flo inputs");
      Log log(flow_a.quiet);
      const auto s = cmd_flowmask(jobs, cfg, flow_a.out, flow_a.jobs, log);
      print_summary("flowmask", s);
      return s.exit_code();
    }
    if (*eval) {
      auto cfg = resolve_config(eval_a);
      if (policy) cfg.policy = *policy;
      if (sigma) cfg.sigma = *sigma;
      cfg.validate();
      Log log(eval_a.quiet);
      const auto j = cmd_eval(eval_a.manifest, cfg, eval_a.out, log);
      std::cout << "eval: SR(0.1m)=" << j["SR (0.1m)"] << " SR(0.2m)=" << j["SR (0.2m)"] << " SR(0.3m)=" << j["SR (0.3m)"]
                << " TR(mean)=" << j["TR (mean)"] << "\n";
      return 0;
    }
    if (*swap) {
      const auto cfg = resolve_config(swap_a);
      const auto all = cmd_swap_negatives(load_manifest(swap_a.manifest), cfg.seed, swap_a.out);
      std::cout << "swap-negatives: " << all.size() << " samples\n";
      return 0;
    }
    if (*self) return selftest(self_a.out, resolve_config(self_a));
    if (*synth_cmd) {
      write_bundle(synth_a.out, resolve_config(synth_a));
      std::cout << "synth: wrote " << synth_a.out << "\n";
      return 0;
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
