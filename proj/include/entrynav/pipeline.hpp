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

// Batch commands behind the command-line tool: configuration, manifests and
// the annotate / condition / flowmask / eval / swap-negatives stages.

#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "entrynav/camera.hpp"
#include "entrynav/error.hpp"
#include "entrynav/evalsim.hpp"
#include "entrynav/flowmask.hpp"
#include "entrynav/io.hpp"
#include "entrynav/objectives.hpp"
#include "entrynav/occupancy.hpp"
#include "entrynav/planner.hpp"
#include "entrynav/pointcloud.hpp"
#include "entrynav/random.hpp"
#include "entrynav/reproject.hpp"
#include "entrynav/trajectory.hpp"

namespace entrynav {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Configuration

struct PipelineConfig {
  // depth -> cloud -> normals
  int stride = 4;
  int normal_k = kDefaultNormalNeighbors;
  double hash_cell = 0.2;
  double camera_height = kDefaultCameraHeight;
  // segmentation and grid
  double theta_ground = 25.0;
  double theta_obstacle = 65.0;
  double variance_deg = 30.0;
  int variance_k = 16;
  double obstacle_min_height = 0.1;
  double obstacle_max_height = 2.0;
  // planning and trajectory
  int inflation_radius = 1;
  bool unknown_is_occupied = false;
  int resample_n = 20;
  int smoothing_iterations = kChaikinIterations;
  std::string normalize_mode = "full";
  // conditioning and masking
  int splat_radius = 0;
  double mask_ratio = 0.1;
  // evaluation
  std::string policy = "oracle";
  double sigma = 0.0;
  int max_steps = 100;
  double reach_radius = 0.1;
  bool execute_all = false;
  int deviation_samples = kDeviationSamples;
  // objectives
  double w_wpts = 1.0, w_recon = 1.0, w_flag = 1.0;
  // randomness
  std::uint64_t seed = 0;

  bool operator==(const PipelineConfig&) const = default;

  void validate() const {
    auto require = [](bool ok, const char* what) {
      if (!ok) throw UsageError(std::string("config: ") + what);
    };
    require(stride >= 1, "stride must be >= 1");
    require(normal_k >= 3, "normal_k must be >= 3");
    require(hash_cell > 0.0, "hash_cell must be > 0");
    require(camera_height >= 0.0 && camera_height < 100.0, "camera_height must lie in [0, 100)");
    require(theta_ground > 0.0 && theta_ground < 90.0, "theta_ground must lie in (0, 90)");
    require(theta_obstacle >= theta_ground && theta_obstacle <= 90.0, "theta_obstacle must lie in [theta_ground, 90]");
    require(variance_deg > 0.0 && variance_deg <= 180.0, "variance_deg must lie in (0, 180]");
    require(variance_k >= 1, "variance_k must be >= 1");
    require(obstacle_min_height >= 0.0 && obstacle_max_height > obstacle_min_height,
            "obstacle height band must satisfy 0 <= min < max");
    require(inflation_radius >= 0 && inflation_radius <= 25, "inflation_radius must lie in [0, 25]");
    require(resample_n >= 2, "resample_n must be >= 2");
    require(smoothing_iterations >= 0 && smoothing_iterations <= 8, "smoothing_iterations must lie in [0, 8]");
    require(normalize_mode == "full" || normalize_mode == "translation_only",
            "normalize_mode must be 'full' or 'translation_only'");
    require(splat_radius >= 0 && splat_radius <= 16, "splat_radius must lie in [0, 16]");
    require(mask_ratio > 0.0 && mask_ratio <= 1.0, "mask_ratio must lie in (0, 1]");
    require(sigma >= 0.0, "sigma must be >= 0");
    require(max_steps >= 1, "max_steps must be >= 1");
    require(reach_radius > 0.0, "reach_radius must be > 0");
    require(deviation_samples >= 2, "deviation_samples must be >= 2");
    require(w_wpts >= 0.0 && w_recon >= 0.0 && w_flag >= 0.0, "loss weights must be >= 0");
  }

  NormalizeMode normalize() const {
    return normalize_mode == "full" ? NormalizeMode::Full : NormalizeMode::TranslationOnly;
  }
  SegmentParams segment_params() const { return {theta_ground, theta_obstacle, variance_deg, variance_k}; }
  GridParams grid_params() const { return {GridGeometry::standard(), obstacle_min_height, obstacle_max_height}; }
  PlannerOptions planner_options() const { return {unknown_is_occupied}; }
  SimOptions sim_options() const { return {reach_radius, 1e-3, execute_all}; }
};

#define ENTRYNAV_CONFIG_FIELDS(X)                                                                          \
  X(stride) X(normal_k) X(hash_cell) X(camera_height) X(theta_ground) X(theta_obstacle) X(variance_deg)    \
  X(variance_k) X(obstacle_min_height) X(obstacle_max_height) X(inflation_radius) X(unknown_is_occupied)  \
  X(resample_n) X(smoothing_iterations) X(normalize_mode) X(splat_radius) X(mask_ratio) X(policy) X(sigma) \
  X(max_steps) X(reach_radius) X(execute_all) X(deviation_samples) X(w_wpts) X(w_recon) X(w_flag) X(seed)

inline nlohmann::json config_to_json(const PipelineConfig& c) {
  nlohmann::json j;
#define ENTRYNAV_PUT(name) j[#name] = c.name;
  ENTRYNAV_CONFIG_FIELDS(ENTRYNAV_PUT)
#undef ENTRYNAV_PUT
  return j;
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline PipelineConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw UsageError("config: expected a JSON object");
  PipelineConfig c;
  const nlohmann::json known = config_to_json(c);
  for (const auto& [key, value] : j.items())
    if (!known.contains(key)) throw UsageError("config: unknown key '" + key + "'");
  try {
#define ENTRYNAV_GET(name) \
  if (j.contains(#name)) j.at(#name).get_to(c.name);
    ENTRYNAV_CONFIG_FIELDS(ENTRYNAV_GET)
#undef ENTRYNAV_GET
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

inline PipelineConfig load_config(const fs::path& path) {
  try {
    return config_from_json(nlohmann::json::parse(io::read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
}

inline void save_config(const fs::path& path, const PipelineConfig& c) {
  io::write_file_atomic(path, config_to_json(c).dump(2) + "\n");
}

/// Applies one "key=value" override; the value is read as JSON when it parses,
/// otherwise as a plain string.
inline PipelineConfig apply_override(const PipelineConfig& c, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq), raw = assignment.substr(eq + 1);
  nlohmann::json j = config_to_json(c);
  if (!j.contains(key)) throw UsageError("config: unknown key '" + key + "'");
  nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  j[key] = value;
  return config_from_json(j);
}

// ---------------------------------------------------------------------------
// Manifest

struct ManifestEntry {
  std::string id;
  std::string instruction;
  fs::path depth_file;
  fs::path camera_file;
  std::optional<fs::path> image_file;
  std::optional<fs::path> flow_dir;
  std::optional<BBox> target_bbox;
  Vec3 target_world = Vec3::Zero();
};

struct Manifest {
  fs::path base;
  std::vector<ManifestEntry> entries;
};

/// Paths inside the manifest are resolved against its directory.
inline Manifest load_manifest(const fs::path& path, bool check_files = true) {
  Manifest m;
  m.base = path.parent_path();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(path.string() + ": " + e.what());
  } catch (const FormatError& e) {
    throw UsageError(e.what());
  }
  std::set<std::string> ids;
  try {
    for (const auto& e : j.at("entries")) {
      ManifestEntry me;
      me.id = e.at("id").get<std::string>();
      if (me.id.empty() || me.id.find('/') != std::string::npos || me.id == "." || me.id == "..")
        throw UsageError("manifest: invalid id '" + me.id + "'");
      if (!ids.insert(me.id).second) throw UsageError("manifest: duplicate id '" + me.id + "'");
      me.instruction = e.value("instruction", "");
      me.depth_file = m.base / e.at("depth_file").get<std::string>();
      me.camera_file = m.base / e.at("camera_file").get<std::string>();
      if (e.contains("image_file") && !e["image_file"].is_null()) me.image_file = m.base / e["image_file"].get<std::string>();
      if (e.contains("flow_dir") && !e["flow_dir"].is_null()) me.flow_dir = m.base / e["flow_dir"].get<std::string>();
      if (e.contains("target_bbox") && !e["target_bbox"].is_null()) {
        const auto& b = e["target_bbox"];
        me.target_bbox = BBox{b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(), b.at(3).get<double>()};
      }
      const auto& t = e.at("target_world");
      me.target_world = {t.at(0).get<double>(), t.at(1).get<double>(), t.at(2).get<double>()};
      if (check_files) {
        for (const fs::path& p : {me.depth_file, me.camera_file})
          if (!fs::exists(p)) throw UsageError("manifest: missing file " + p.string());
      }
      m.entries.push_back(std::move(me));
    }
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
  return m;
}

// ---------------------------------------------------------------------------
// Batch execution

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Each fn writes only its
/// own slot, so results do not depend on scheduling.
inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(jobs, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  for (auto& t : pool) t.join();
}

class Log {
 public:
  explicit Log(bool quiet = false) : quiet_(quiet) {}
  void line(const std::string& s) {
    if (quiet_) return;
    std::lock_guard<std::mutex> lock(mu_);
    std::cerr << s << "\n";
  }

 private:
  bool quiet_;
  std::mutex mu_;
};

enum class EntryStatus { Ok, Skipped, Error };

struct EntryResult {
  std::string id;
  EntryStatus status = EntryStatus::Ok;
  std::string message;
};

struct BatchSummary {
  std::vector<EntryResult> results;

  std::size_t count(EntryStatus s) const {
    return static_cast<std::size_t>(
        std::count_if(results.begin(), results.end(), [s](const EntryResult& r) { return r.status == s; }));
  }
  /// Nonzero only when every entry failed with an error.
  int exit_code() const { return !results.empty() && count(EntryStatus::Error) == results.size() ? 1 : 0; }

  nlohmann::json to_json() const {
    nlohmann::json ok = nlohmann::json::array(), skipped = nlohmann::json::array(), errors = nlohmann::json::array();
    for (const auto& r : results) {
      if (r.status == EntryStatus::Ok) ok.push_back(r.id);
      if (r.status == EntryStatus::Skipped) skipped.push_back({{"id", r.id}, {"reason", r.message}});
      if (r.status == EntryStatus::Error) errors.push_back({{"id", r.id}, {"error", r.message}});
    }
    return {{"ok", ok}, {"skipped", skipped}, {"errors", errors}};
  }
};

template <typename Fn>
EntryResult guarded(const std::string& id, Fn&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    return {id, EntryStatus::Error, e.what()};
  }
}

// ---------------------------------------------------------------------------
// Annotation

struct AnnotatedTrajectory {
  Trajectory trajectory;  // normalized frame
  PlanarPose origin;      // normalized frame inside the grid (agent) frame
  double y0 = 0.0;        // ground height removed by normalization
};

/// lift -> normalize -> resample -> smooth. Resampling can rotate the first
/// heading away from +Z, so a full normalization is re-applied afterwards.
inline AnnotatedTrajectory annotate_trajectory(const GridPath& path, const OccupancyGrid& grid,
                                               std::span<const std::optional<double>> heights,
                                               const PipelineConfig& cfg) {
  const Trajectory lifted = lift_path(path, grid, heights);
  const NormalizeMode mode = cfg.normalize();
  const PlanarPose o1 = origin_of(lifted, mode);
  Trajectory t = resample(normalize_origin(lifted, mode), cfg.resample_n);
  if (cfg.smoothing_iterations > 0) t = smooth(t, &grid, o1, cfg.smoothing_iterations);
  AnnotatedTrajectory out{t, o1, lifted.poses.front().y};
  if (mode == NormalizeMode::Full) {
    out.origin = compose(o1, origin_of(t, mode));
    out.trajectory = normalize_origin(t, mode);
  }
  return out;
}

/// Agent frame: on the ground directly below the camera, axes parallel to it.
inline RigidTransform agent_pose_of(const CameraModel& camera, double camera_height) {
  return compose(camera.pose(), RigidTransform::from_translation({0.0, camera_height, 0.0}));
}

/// Trajectory (normalized) frame to world frame.
inline RigidTransform world_from_trajectory(const RigidTransform& agent_pose, const PlanarPose& origin, double y0) {
  return compose(agent_pose, RigidTransform::from_yaw(origin.yaw, {origin.x, y0, origin.z}));
}

struct SceneGeometry {
  CameraModel camera;
  DepthImage depth;
  PointCloud cloud;
};

inline SceneGeometry load_scene(const ManifestEntry& e, int stride) {
  CameraModel camera = read_camera(e.camera_file);
  DepthImage depth = read_pfm(e.depth_file);
  depth.validate();
  PointCloud cloud = cloud_from_depth(depth, camera, stride);
  return {std::move(camera), std::move(depth), std::move(cloud)};
}

struct AnnotateProducts {
  OccupancyGrid grid;
  std::optional<GridPath> path;
  std::optional<AnnotatedTrajectory> annotated;
};

inline AnnotateProducts annotate_scene(const SceneGeometry& scene, const Vec3& target_world, const PipelineConfig& cfg) {
  const PointCloud with_normals = estimate_normals(scene.cloud, cfg.normal_k, scene.camera.center(), cfg.hash_cell);
  const Segmentation seg = segment_cloud(with_normals, kWorldUp, cfg.segment_params());
  const RigidTransform agent = agent_pose_of(scene.camera, cfg.camera_height);
  AnnotateProducts out{build_grid(with_normals, seg, agent, target_world, cfg.grid_params()), std::nullopt, std::nullopt};
  const OccupancyGrid planning = inflate_obstacles(out.grid, cfg.inflation_radius);
  out.path = astar(planning, cfg.planner_options());
  if (out.path) {
    const auto heights = cell_ground_heights(with_normals, seg, agent, out.grid.geometry());
    out.annotated = annotate_trajectory(*out.path, out.grid, heights, cfg);
  }
  return out;
}

inline nlohmann::json episode_entry_json(const std::string& id, const std::string& instruction,
                                         const OccupancyGrid& grid, const AnnotatedTrajectory& a,
                                         const PipelineConfig& cfg) {
  const Vec2 target = target_in_episode(grid, a.origin);
  return {{"id", id},
          {"instruction", instruction},
          {"grid_pgm", id + "/grid.pgm"},
          {"grid_json", id + "/grid.json"},
          {"trajectory", id + "/trajectory.jsonl"},
          {"target_entrance", {target.x(), target.y()}},
          {"grid_origin", planar_to_json(a.origin)},
          {"max_steps", cfg.max_steps}};
}

inline BatchSummary cmd_annotate(const Manifest& m, const PipelineConfig& cfg, const fs::path& out, int jobs,
                                 Log& log) {
  BatchSummary summary;
  summary.results.resize(m.entries.size());
  std::vector<std::optional<nlohmann::json>> episodes(m.entries.size());
  parallel_for(m.entries.size(), jobs, [&](std::size_t i) {
    const ManifestEntry& e = m.entries[i];
    summary.results[i] = guarded(e.id, [&]() -> EntryResult {
      const SceneGeometry scene = load_scene(e, cfg.stride);
      const AnnotateProducts prod = annotate_scene(scene, e.target_world, cfg);
      const fs::path dir = out / e.id;
      write_grid(dir / "grid.pgm", dir / "grid.json", prod.grid);
      if (!prod.path) {
        log.line("annotate " + e.id + ": skipped (unreachable)");
        return {e.id, EntryStatus::Skipped, "unreachable"};
      }
      const AnnotatedTrajectory& a = *prod.annotated;
      write_path(dir / "path.json", *prod.path);
      write_trajectory(dir / "trajectory.jsonl", a.trajectory);
      nlohmann::json ann;
      ann["id"] = e.id;
      ann["instruction"] = e.instruction;
      ann["origin"] = planar_to_json(a.origin);
      ann["y0"] = a.y0;
      ann["target_cell"] = {prod.grid.target_cell().col, prod.grid.target_cell().row};
      ann["path_cells"] = prod.path->cells.size();
      ann["path_cost"] = prod.path->cost;
      ann["camera_height"] = cfg.camera_height;
      io::write_file_atomic(dir / "annotation.json", ann.dump(2) + "\n");
      episodes[i] = episode_entry_json(e.id, e.instruction, prod.grid, a, cfg);
      log.line("annotate " + e.id + ": ok (" + std::to_string(a.trajectory.size()) + " poses)");
      return {e.id, EntryStatus::Ok, ""};
    });
    if (summary.results[i].status == EntryStatus::Error)
      log.line("annotate " + e.id + ": error: " + summary.results[i].message);
  });
  nlohmann::json eps = nlohmann::json::array();
  for (const auto& ep : episodes)
    if (ep) eps.push_back(*ep);
  io::write_file_atomic(out / "episodes.json", nlohmann::json{{"episodes", eps}}.dump(2) + "\n");
  io::write_file_atomic(out / "annotate_summary.json", summary.to_json().dump(2) + "\n");
  return summary;
}

// ---------------------------------------------------------------------------
// Conditioning

inline BatchSummary cmd_condition(const Manifest& m, const PipelineConfig& cfg, const fs::path& out, int jobs,
                                  Log& log) {
  BatchSummary summary;
  summary.results.resize(m.entries.size());
  parallel_for(m.entries.size(), jobs, [&](std::size_t i) {
    const ManifestEntry& e = m.entries[i];
    summary.results[i] = guarded(e.id, [&]() -> EntryResult {
      const fs::path dir = out / e.id;
      if (!fs::exists(dir / "trajectory.jsonl")) return {e.id, EntryStatus::Skipped, "not annotated"};
      const Trajectory traj = read_trajectory(dir / "trajectory.jsonl");
      const auto ann = nlohmann::json::parse(io::read_file(dir / "annotation.json"));
      const SceneGeometry scene = load_scene(e, cfg.stride);
      std::vector<Rgb> colors;
      if (e.image_file) colors = colors_from_image(scene.depth, read_ppm(*e.image_file), cfg.stride);

      const RigidTransform agent = agent_pose_of(scene.camera, cfg.camera_height);
      const RigidTransform world_from_traj =
          world_from_trajectory(agent, planar_from_json(ann.at("origin")), ann.at("y0").get<double>());
      const auto poses = virtual_poses(traj, cfg.camera_height, world_from_traj);
      const fs::path cdir = dir / "condition";
      for (std::size_t p = 0; p < poses.size(); ++p) {
        char name[32];
        std::snprintf(name, sizeof(name), "plucker_%04zu.plk", p);
        write_plucker(cdir / name, plucker_embed(scene.camera.with_pose(poses[p])));
      }
      ReprojectOptions ropt;
      ropt.splat_radius = cfg.splat_radius;
      const auto frames = reproject_cloud(scene.cloud, scene.camera, poses, colors, ropt);
      write_constraint_frames(cdir, frames, scene.camera, poses);
      log.line("condition " + e.id + ": ok (" + std::to_string(frames.size()) + " frames)");
      return {e.id, EntryStatus::Ok, ""};
    });
    if (summary.results[i].status == EntryStatus::Error)
      log.line("condition " + e.id + ": error: " + summary.results[i].message);
    if (summary.results[i].status == EntryStatus::Skipped)
      log.line("condition " + e.id + ": skipped (" + summary.results[i].message + ")");
  });
  io::write_file_atomic(out / "condition_summary.json", summary.to_json().dump(2) + "\n");
  return summary;
}

// ---------------------------------------------------------------------------
// Flow masking

struct FlowJob {
  std::string id;   // output subdirectory
  fs::path file;
};

inline std::vector<FlowJob> flow_jobs_from_manifest(const Manifest& m) {
  std::vector<FlowJob> jobs;
  for (const auto& e : m.entries) {
    if (!e.flow_dir) continue;
    std::vector<fs::path> files;
    if (fs::is_directory(*e.flow_dir))
      for (const auto& f : fs::directory_iterator(*e.flow_dir))
        if (f.path().extension() == ".flo") files.push_back(f.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) jobs.push_back({e.id, f});
  }
  return jobs;
}

inline BatchSummary cmd_flowmask(const std::vector<FlowJob>& jobs_in, const PipelineConfig& cfg, const fs::path& out,
                                 int jobs, Log& log) {
  BatchSummary summary;
  summary.results.resize(jobs_in.size());
  std::vector<nlohmann::json> rows(jobs_in.size());
  parallel_for(jobs_in.size(), jobs, [&](std::size_t i) {
    const FlowJob& job = jobs_in[i];
    const std::string label = job.id.empty() ? job.file.filename().string() : job.id + "/" + job.file.filename().string();
    summary.results[i] = guarded(label, [&]() -> EntryResult {
      const FlowField f = read_flo(job.file);
      const MagnitudeMap mag = flow_magnitude(f);
      const SalientMask mask = topk_mask(mag, cfg.mask_ratio);
      const fs::path dir = job.id.empty() ? out / "flowmask" : out / job.id / "flowmask";
      const std::string stem = job.file.stem().string();
      DepthImage mimg(mag.width, mag.height);
      for (std::size_t p = 0; p < mag.values.size(); ++p) mimg.depth[p] = static_cast<float>(mag.values[p]);
      io::write_file_atomic(dir / (stem + "_magnitude.pfm"), encode_pfm(mimg));
      io::write_file_atomic(dir / (stem + "_mask.pbm"), encode_pbm(mask));
      io::write_file_atomic(dir / (stem + "_mask.json"), mask_sidecar(mask, cfg.mask_ratio).dump(2) + "\n");
      rows[i] = {{"entry", label}, {"k", mask.k}, {"width", mask.width}, {"height", mask.height}};
      log.line("flowmask " + label + ": k=" + std::to_string(mask.k));
      return {label, EntryStatus::Ok, ""};
    });
    if (summary.results[i].status == EntryStatus::Error)
      log.line("flowmask " + label + ": error: " + summary.results[i].message);
  });
  nlohmann::json j = summary.to_json();
  j["ratio"] = cfg.mask_ratio;
  j["masks"] = nlohmann::json::array();
  for (const auto& r : rows)
    if (!r.is_null()) j["masks"].push_back(r);
  io::write_file_atomic(out / "flowmask_summary.json", j.dump(2) + "\n");
  return summary;
}

// ---------------------------------------------------------------------------
// Evaluation and negatives

inline std::vector<Episode> apply_episode_overrides(std::vector<Episode> eps, const PipelineConfig& cfg) {
  for (auto& ep : eps) ep.max_steps = cfg.max_steps;
  return eps;
}

inline nlohmann::json cmd_eval(const fs::path& episodes_manifest, const PipelineConfig& cfg, const fs::path& out,
                               Log& log) {
  const auto episodes = apply_episode_overrides(read_episode_set(episodes_manifest), cfg);
  if (episodes.empty()) throw UsageError("eval: empty episode set");
  const EvalResult res = evaluate(episodes, cfg.policy, cfg.sigma, cfg.seed, cfg.sim_options());
  nlohmann::json j = report_to_json(res.report);
  j["policy"] = cfg.policy;
  j["sigma"] = cfg.sigma;
  j["seed"] = cfg.seed;
  j["episodes"] = nlohmann::json::array();
  for (std::size_t i = 0; i < episodes.size(); ++i)
    j["episodes"].push_back({{"id", episodes[i].id},
                             {"outcome", outcome_name(res.rollouts[i].outcome)},
                             {"steps", res.rollouts[i].states.size() - 1},
                             {"final_distance", res.final_distances[i]},
                             {"deviation", res.deviations[i]}});
  io::write_file_atomic(out / "metrics.json", j.dump(2) + "\n");
  log.line("eval: " + std::to_string(episodes.size()) + " episodes, SR(0.3m)=" + std::to_string(res.report.sr_030));
  return j;
}

inline std::vector<AlignmentSample> cmd_swap_negatives(const Manifest& m, std::uint64_t seed, const fs::path& out) {
  if (m.entries.size() < 2) throw UsageError("swap-negatives: needs at least 2 manifest entries");
  std::vector<AlignmentSample> pos;
  for (const auto& e : m.entries) pos.push_back({e.id, e.id, 1});
  auto all = swap_negatives(pos, seed);
  io::write_file_atomic(out / "alignment.jsonl", encode_alignment(all));
  return all;
}

}  // namespace entrynav
