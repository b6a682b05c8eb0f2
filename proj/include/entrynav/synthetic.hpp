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

// Analytic test scenes (ground plane plus axis-aligned boxes seen by a
// pinhole camera), their ego-motion flow, and random planning episodes.

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "entrynav/camera.hpp"
#include "entrynav/evalsim.hpp"
#include "entrynav/flowmask.hpp"
#include "entrynav/objectives.hpp"
#include "entrynav/pipeline.hpp"
#include "entrynav/pointcloud.hpp"
#include "entrynav/random.hpp"
#include "entrynav/reproject.hpp"

namespace entrynav::synth {

/// World-frame box; y is down, so a box standing on the ground spans y in [-height, 0].
struct Box {
  Vec3 lo, hi;
  Rgb color;
};

inline Box standing_box(double x0, double x1, double z0, double z1, double height, Rgb color) {
  return {{x0, -height, z0}, {x1, 0.0, z1}, color};
}

struct Scene {
  std::string id;
  std::string instruction;
  std::vector<Box> boxes;
  Vec3 target_world = Vec3::Zero();
  std::optional<Box> door;  // region the target bounding box is taken from
};

inline constexpr double kMaxRange = 30.0;
inline const Rgb kGroundColor{96, 96, 96};

inline CameraModel standard_camera(double camera_height = kDefaultCameraHeight) {
  return {40.0, 40.0, 48.0, 36.0, 96, 72, RigidTransform::from_translation({0.0, -camera_height, 0.0})};
}

/// Ray parameter of the first hit of o + t d with an axis-aligned box (slab test).
inline std::optional<double> ray_box(const Vec3& o, const Vec3& d, const Box& b) {
  double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < b.lo[a] || o[a] > b.hi[a]) return std::nullopt;
      continue;
    }
    double ta = (b.lo[a] - o[a]) / d[a], tb = (b.hi[a] - o[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return std::nullopt;
  }
  return t0 > 0.0 ? std::optional<double>(t0) : std::nullopt;
}

struct Rendered {
  DepthImage depth;
  RgbImage image;
};

/// Z-depth and color per pixel center; rays hitting nothing within range get depth 0.
inline Rendered render(const Scene& scene, const CameraModel& cam) {
  Rendered out{DepthImage(cam.width(), cam.height()), RgbImage{cam.width(), cam.height(), {}}};
  out.image.pixels.assign(static_cast<std::size_t>(cam.width()) * cam.height(), Rgb{135, 180, 230});
  const Vec3 o = cam.center();
  for (int row = 0; row < cam.height(); ++row) {
    for (int col = 0; col < cam.width(); ++col) {
      // With a unit-z camera-frame direction the ray parameter equals z-depth.
      const Vec3 dc{(col + 0.5 - cam.cx()) / cam.fx(), (row + 0.5 - cam.cy()) / cam.fy(), 1.0};
      const Vec3 d = cam.pose().rotation() * dc;
      double best = std::numeric_limits<double>::infinity();
      Rgb color{};
      if (d.y() > 0.0) {
        best = -o.y() / d.y();
        color = kGroundColor;
      }
      for (const Box& b : scene.boxes)
        if (auto t = ray_box(o, d, b); t && *t < best) {
          best = *t;
          color = b.color;
        }
      if (scene.door)
        if (auto t = ray_box(o, d, *scene.door); t && *t <= best + 1e-9) {
          best = *t;
          color = scene.door->color;
        }
      if (best <= kMaxRange) {
        out.depth.at(col, row) = static_cast<float>(best);
        out.image.pixels[static_cast<std::size_t>(row) * cam.width() + col] = color;
      }
    }
  }
  return out;
}

/// Flow induced by moving the camera `forward` meters along its optical axis.
inline FlowField ego_motion_flow(const DepthImage& depth, const CameraModel& cam, double forward) {
  FlowField f(depth.width, depth.height);
  for (int row = 0; row < depth.height; ++row)
    for (int col = 0; col < depth.width; ++col) {
      const double z = depth.at(col, row);
      if (!(z > 0.0) || z - forward <= 0.05) continue;
      const double u = col + 0.5, v = row + 0.5;
      const double x = (u - cam.cx()) * z / cam.fx(), y = (v - cam.cy()) * z / cam.fy();
      const std::size_t i = static_cast<std::size_t>(row) * depth.width + col;
      f.u[i] = static_cast<float>(cam.fx() * x / (z - forward) + cam.cx() - u);
      f.v[i] = static_cast<float>(cam.fy() * y / (z - forward) + cam.cy() - v);
    }
  return f;
}

/// Normalized image bounding box of a box's projected corners, clamped to the image.
inline std::optional<BBox> project_bbox(const Box& b, const CameraModel& cam) {
  double u0 = 1e9, u1 = -1e9, v0 = 1e9, v1 = -1e9;
  for (int k = 0; k < 8; ++k) {
    const Vec3 p{k & 1 ? b.hi.x() : b.lo.x(), k & 2 ? b.hi.y() : b.lo.y(), k & 4 ? b.hi.z() : b.lo.z()};
    const Vec3 pc = cam.pose().apply_inverse(p);
    if (!(pc.z() > 0.0)) return std::nullopt;
    const double u = cam.fx() * pc.x() / pc.z() + cam.cx(), v = cam.fy() * pc.y() / pc.z() + cam.cy();
    u0 = std::min(u0, u), u1 = std::max(u1, u), v0 = std::min(v0, v), v1 = std::max(v1, v);
  }
  const double w = cam.width(), h = cam.height();
  const BBox raw{0.5 * (u0 + u1) / w, 0.5 * (v0 + v1) / h, (u1 - u0) / w, (v1 - v0) / h};
  return raw.clamped();
}

/// Facade beyond the perception range with a box in the way; the target
/// lies past the far edge and gets anchored onto the last row.
inline Scene storefront() {
  Scene s;
  s.id = "storefront";
  s.instruction = "Walk to the glass door of the bakery and go inside.";
  s.boxes = {standing_box(-10.0, 10.0, 7.0, 7.5, 4.0, {180, 150, 120}),
             standing_box(0.25, 1.25, 2.25, 2.75, 1.8, {60, 120, 60})};
  s.door = Box{{0.0, -2.1, 6.98}, {0.9, 0.0, 7.0}, {40, 40, 160}};
  s.target_world = {0.45, 0.0, 7.0};
  return s;
}

/// Two pillars between the agent and an entrance inside the range.
inline Scene sidewalk() {
  Scene s;
  s.id = "sidewalk";
  s.instruction = "Pass between the pillars and enter the lobby on the right.";
  s.boxes = {standing_box(-10.0, 10.0, 5.6, 6.0, 4.0, {170, 170, 190}),
             standing_box(-0.95, -0.55, 2.35, 2.75, 2.5, {120, 80, 60}),
             standing_box(0.45, 0.85, 2.35, 2.75, 2.5, {120, 80, 60}),
             standing_box(1.2, 2.2, 3.55, 3.85, 1.5, {90, 60, 90})};
  s.door = Box{{0.8, -2.0, 5.58}, {1.6, 0.0, 5.6}, {40, 40, 160}};
  s.target_world = {1.2, 0.0, 4.45};
  return s;
}

/// A wall spanning the whole range width hides the target.
inline Scene blocked() {
  Scene s;
  s.id = "blocked";
  s.instruction = "Enter the courtyard gate behind the wall.";
  s.boxes = {standing_box(-8.0, 8.0, 2.55, 2.85, 3.0, {150, 140, 130})};
  s.target_world = {0.0, 0.0, 4.0};
  return s;
}

inline std::vector<Scene> bundled_scenes() { return {storefront(), sidewalk(), blocked()}; }

inline constexpr double kFlowSteps[] = {0.2, 0.4};

/// Writes depth, color, camera and flow files for every scene plus manifest.json.
inline void write_scene_set(const std::filesystem::path& dir, const std::vector<Scene>& scenes,
                            double camera_height = kDefaultCameraHeight) {
  const CameraModel cam = standard_camera(camera_height);
  nlohmann::json m;
  m["entries"] = nlohmann::json::array();
  for (const Scene& s : scenes) {
    const Rendered r = render(s, cam);
    const std::string sub = "scenes/" + s.id;
    io::write_file_atomic(dir / sub / "depth.pfm", encode_pfm(r.depth));
    io::write_file_atomic(dir / sub / "image.ppm", encode_ppm(r.image));
    write_camera(dir / sub / "camera.json", cam);
    for (std::size_t k = 0; k < std::size(kFlowSteps); ++k) {
      char name[32];
      std::snprintf(name, sizeof(name), "flow_%04zu.flo", k);
      write_flo(dir / sub / "flow" / name, ego_motion_flow(r.depth, cam, kFlowSteps[k]));
    }
    nlohmann::json e{{"id", s.id},
                     {"instruction", s.instruction},
                     {"depth_file", sub + "/depth.pfm"},
                     {"camera_file", sub + "/camera.json"},
                     {"image_file", sub + "/image.ppm"},
                     {"flow_dir", sub + "/flow"},
                     {"target_world", {s.target_world.x(), s.target_world.y(), s.target_world.z()}}};
    if (s.door)
      if (auto b = project_bbox(*s.door, cam)) e["target_bbox"] = {b->cx, b->cy, b->w, b->h};
    m["entries"].push_back(e);
  }
  io::write_file_atomic(dir / "manifest.json", m.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Random planning episodes

/// Free grid with random rectangular obstacles around a reachable target.
inline OccupancyGrid random_block_grid(std::mt19937_64& rng, int blocks) {
  OccupancyGrid g(GridGeometry::standard(), CellState::Free);
  for (int b = 0; b < blocks; ++b) {
    const int w = 1 + static_cast<int>(uniform_below(rng, 8));
    const int h = 1 + static_cast<int>(uniform_below(rng, 4));
    const int c0 = static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(50 - w + 1)));
    const int r0 = 4 + static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(44 - h)));
    for (int r = r0; r < r0 + h; ++r)
      for (int c = c0; c < c0 + w; ++c) g.set_state({c, r}, CellState::Occupied);
  }
  g.set_agent({25, 0});
  return g;
}

inline bool trajectory_clear(const OccupancyGrid& grid, const Trajectory& t, const PlanarPose& origin) {
  for (std::size_t i = 1; i < t.poses.size(); ++i)
    if (segment_collides(grid, origin.apply(t.poses[i - 1].xz()), origin.apply(t.poses[i].xz()))) return false;
  return true;
}

/// One solvable episode: the ground truth is planned on the inflated grid,
/// post-processed like the annotation pipeline, and collision-free on the raw grid.
inline Episode random_episode(std::uint64_t seed, const std::string& id, const PipelineConfig& cfg = {}) {
  std::mt19937_64 rng(seed);
  for (;;) {
    OccupancyGrid g = random_block_grid(rng, 6 + static_cast<int>(uniform_below(rng, 10)));
    const Cell target{5 + static_cast<int>(uniform_below(rng, 40)), 25 + static_cast<int>(uniform_below(rng, 25))};
    if (g.state(target) == CellState::Occupied) continue;
    g.set_target(target);
    g.set_target_world({g.geometry().center_of(target).x(), 0.0, g.geometry().center_of(target).y()});
    const auto path = astar(inflate_obstacles(g, cfg.inflation_radius), cfg.planner_options());
    if (!path || path->cells.size() < 3) continue;
    const AnnotatedTrajectory a = annotate_trajectory(*path, g, {}, cfg);
    if (!trajectory_clear(g, a.trajectory, a.origin)) continue;
    Episode ep;
    ep.id = id;
    ep.grid = g;
    ep.instruction = "Reach the entrance marked in cell (" + std::to_string(target.col) + ", " +
                     std::to_string(target.row) + ").";
    ep.gt_trajectory = a.trajectory;
    ep.grid_origin = a.origin;
    ep.target_entrance = target_in_episode(g, a.origin);
    ep.max_steps = cfg.max_steps;
    ep.validate();
    return ep;
  }
}

inline std::vector<Episode> random_suite(std::size_t count, std::uint64_t seed, const PipelineConfig& cfg = {}) {
  std::vector<Episode> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "ep%04zu", i);
    out.push_back(random_episode(derive_seed(seed, static_cast<std::uint64_t>(i)), id, cfg));
  }
  return out;
}

inline constexpr std::uint64_t kSuiteSeed = 20260601;

}  // namespace entrynav::synth
