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

// [x, y, z, yaw] trajectories: lifting grid paths into 3-D, origin
// normalization, arc-length resampling and Chaikin smoothing.
//
// Yaw is measured about the up axis, 0 facing +Z and positive toward +X, so a
// heading yaw has planar direction (sin yaw, cos yaw) in (x, z). Every
// operation that moves waypoints re-derives yaw from the direction to the
// next waypoint; the last pose copies its predecessor.

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "entrynav/error.hpp"
#include "entrynav/io.hpp"
#include "entrynav/occupancy.hpp"
#include "entrynav/planner.hpp"

namespace entrynav {

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double yaw = 0.0;

  Vec2 xz() const { return {x, z}; }
  bool operator==(const Pose&) const = default;
};

enum class Frame { AgentRaw, Normalized };

struct TrajectoryMeta {
  std::optional<int> resampled_to;
  bool smoothed = false;
  bool operator==(const TrajectoryMeta&) const = default;
};

struct Trajectory {
  std::vector<Pose> poses;
  Frame frame = Frame::AgentRaw;
  TrajectoryMeta meta;

  std::size_t size() const { return poses.size(); }
  bool operator==(const Trajectory&) const = default;

  void validate() const {
    if (poses.size() < 2) throw DomainError("Trajectory: needs at least 2 poses");
    for (const auto& p : poses) {
      if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z) || !std::isfinite(p.yaw))
        throw DomainError("Trajectory: non-finite value");
      if (!(p.yaw > -std::numbers::pi && p.yaw <= std::numbers::pi)) throw DomainError("Trajectory: yaw outside (-pi, pi]");
    }
    if (frame == Frame::Normalized) {
      const Pose& p0 = poses.front();
      if (std::abs(p0.x) > 1e-9 || std::abs(p0.y) > 1e-9 || std::abs(p0.z) > 1e-9 || std::abs(p0.yaw) > 1e-9)
        throw DomainError("Trajectory: normalized frame must start at the origin with zero yaw");
    }
  }
};

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * std::numbers::pi);
  if (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

inline double heading_of(double dx, double dz) { return wrap_angle(std::atan2(dx, dz)); }

/// Re-derives every yaw from the direction to the next waypoint. Zero-length
/// steps carry the previous heading (leading ones take the first real heading).
inline void assign_yaws(std::vector<Pose>& poses) {
  const std::size_t n = poses.size();
  if (n == 0) return;
  std::optional<double> carried;
  std::size_t pending = 0;  // leading poses still waiting for a heading
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double dx = poses[i + 1].x - poses[i].x, dz = poses[i + 1].z - poses[i].z;
    if (std::hypot(dx, dz) > 1e-12) {
      carried = heading_of(dx, dz);
      for (; pending < i; ++pending) poses[pending].yaw = *carried;
      poses[i].yaw = *carried;
      pending = i + 1;
    } else if (carried) {
      poses[i].yaw = *carried;
      pending = i + 1;
    }
  }
  const double fill = carried.value_or(0.0);
  for (; pending + 1 < n; ++pending) poses[pending].yaw = fill;
  poses[n - 1].yaw = n >= 2 ? poses[n - 2].yaw : fill;
}

/// Planar polyline length over (x, z).
inline double arc_length(const std::vector<Pose>& poses) {
  double s = 0.0;
  for (std::size_t i = 1; i < poses.size(); ++i) s += (poses[i].xz() - poses[i - 1].xz()).norm();
  return s;
}

/// Cell-center waypoints of a grid path with per-cell ground height (median
/// ground y, 0 where the cell saw no ground) and yaw from waypoint directions.
inline Trajectory lift_path(const GridPath& path, const OccupancyGrid& grid,
                            std::span<const std::optional<double>> ground_heights = {}) {
  if (path.cells.size() < 2) throw DomainError("lift_path: path needs at least 2 cells");
  const auto& geo = grid.geometry();
  if (!ground_heights.empty() && ground_heights.size() != geo.cell_count())
    throw DomainError("lift_path: ground height table does not match the grid");
  Trajectory traj;
  traj.frame = Frame::AgentRaw;
  for (const Cell& c : path.cells) {
    if (!geo.contains(c)) throw DomainError("lift_path: path cell outside the grid");
    const Vec2 center = geo.center_of(c);
    const double y = ground_heights.empty() ? 0.0 : ground_heights[geo.index(c)].value_or(0.0);
    traj.poses.push_back({center.x(), y, center.y(), 0.0});
  }
  assign_yaws(traj.poses);
  return traj;
}

enum class NormalizeMode { Full, TranslationOnly };

/// Planar transform that normalize_origin removes: the first pose's (x, z, yaw).
inline PlanarPose origin_of(const Trajectory& traj, NormalizeMode mode = NormalizeMode::Full) {
  if (traj.poses.empty()) throw DomainError("origin_of: empty trajectory");
  const Pose& p0 = traj.poses.front();
  return {p0.x, p0.z, mode == NormalizeMode::Full ? p0.yaw : 0.0};
}

/// Rigid re-expression so the first pose sits at the origin (and, in Full
/// mode, faces +Z). Distances between waypoints are preserved.
inline Trajectory normalize_origin(const Trajectory& traj, NormalizeMode mode = NormalizeMode::Full) {
  if (traj.poses.size() < 2) throw DomainError("normalize_origin: needs at least 2 poses");
  const PlanarPose origin = origin_of(traj, mode);
  const double y0 = traj.poses.front().y;
  Trajectory out = traj;
  out.frame = Frame::Normalized;
  for (std::size_t i = 0; i < out.poses.size(); ++i) {
    Pose& p = out.poses[i];
    const Vec2 local = i == 0 ? Vec2::Zero() : origin.apply_inverse(traj.poses[i].xz());
    p.x = local.x();
    p.z = local.y();
    p.y = i == 0 ? 0.0 : traj.poses[i].y - y0;
    p.yaw = i == 0 && mode == NormalizeMode::Full ? 0.0 : wrap_angle(traj.poses[i].yaw - origin.yaw);
  }
  return out;
}

/// Poses at the given arc-length stations along the (x, z) polyline; y is
/// interpolated linearly and yaw re-derived. Stations are clamped to [0, L].
inline Trajectory resample_at(const Trajectory& traj, std::span<const double> stations) {
  if (traj.poses.size() < 2) throw DomainError("resample: needs at least 2 poses");
  const auto& src = traj.poses;
  std::vector<double> s(src.size(), 0.0);
  for (std::size_t i = 1; i < src.size(); ++i) s[i] = s[i - 1] + (src[i].xz() - src[i - 1].xz()).norm();
  const double total = s.back();

  Trajectory out;
  out.frame = traj.frame;
  out.meta = traj.meta;
  out.poses.reserve(stations.size());
  for (double st : stations) {
    if (st <= 0.0) {
      out.poses.push_back(src.front());
      continue;
    }
    if (st >= total) {
      out.poses.push_back(src.back());
      continue;
    }
    const auto it = std::upper_bound(s.begin(), s.end(), st);
    const std::size_t k = static_cast<std::size_t>(it - s.begin()) - 1;
    const double len = s[k + 1] - s[k];
    const double t = (st - s[k]) / len;
    const Pose& a = src[k];
    const Pose& b = src[k + 1];
    out.poses.push_back({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y), a.z + t * (b.z - a.z), 0.0});
  }
  assign_yaws(out.poses);
  return out;
}

/// n poses at uniform arc-length spacing; both endpoints are kept exactly.
inline Trajectory resample(const Trajectory& traj, int n) {
  if (n < 2) throw DomainError("resample: target length must be >= 2");
  if (traj.poses.size() < 2) throw DomainError("resample: needs at least 2 poses");
  const double total = arc_length(traj.poses);
  std::vector<double> stations(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) stations[static_cast<std::size_t>(i)] = total * i / (n - 1);
  stations.front() = 0.0;
  stations.back() = total;
  Trajectory out = resample_at(traj, stations);
  out.poses.front() = traj.poses.front();
  out.poses.back() = traj.poses.back();
  assign_yaws(out.poses);
  out.meta.resampled_to = n;
  return out;
}

/// Sum of absolute heading changes between consecutive non-degenerate steps.
inline double total_turning(const std::vector<Pose>& poses) {
  double sum = 0.0;
  std::optional<Vec2> prev;
  for (std::size_t i = 0; i + 1 < poses.size(); ++i) {
    const Vec2 d = poses[i + 1].xz() - poses[i].xz();
    if (d.norm() <= 1e-12) continue;
    if (prev) sum += std::abs(std::atan2(prev->x() * d.y() - prev->y() * d.x(), prev->dot(d)));
    prev = d;
  }
  return sum;
}

/// Sum of squared heading changes; strictly drops when a corner is split.
inline double turning_sharpness(const std::vector<Pose>& poses) {
  double sum = 0.0;
  std::optional<Vec2> prev;
  for (std::size_t i = 0; i + 1 < poses.size(); ++i) {
    const Vec2 d = poses[i + 1].xz() - poses[i].xz();
    if (d.norm() <= 1e-12) continue;
    if (prev) {
      const double a = std::atan2(prev->x() * d.y() - prev->y() * d.x(), prev->dot(d));
      sum += a * a;
    }
    prev = d;
  }
  return sum;
}

inline constexpr int kChaikinIterations = 2;

/// Chaikin corner cutting with pinned endpoints. When `grid` is given, any
/// cut chord that would cross an Occupied cell keeps its original corner.
/// `grid_from_traj` places the trajectory frame inside the grid frame.
inline Trajectory smooth(const Trajectory& traj, const OccupancyGrid* grid = nullptr,
                         const PlanarPose& grid_from_traj = {}, int iterations = kChaikinIterations) {
  Trajectory out = traj;
  out.meta.smoothed = true;
  if (traj.poses.size() < 3) return out;

  auto lerp = [](const Pose& a, const Pose& b, double t) {
    return Pose{a.x + t * (b.x - a.x), a.y + t * (b.y - a.y), a.z + t * (b.z - a.z), 0.0};
  };
  auto blocked = [&](const Pose& a, const Pose& b) {
    return grid && segment_collides(*grid, grid_from_traj.apply(a.xz()), grid_from_traj.apply(b.xz()));
  };

  std::vector<Pose> pts = traj.poses;
  for (int it = 0; it < iterations; ++it) {
    const std::size_t n = pts.size();
    if (n < 3) break;
    std::vector<Pose> next;
    next.reserve(2 * n);
    next.push_back(pts.front());
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const Pose q = lerp(pts[i], pts[i + 1], 0.25);
      const Pose r = lerp(pts[i], pts[i + 1], 0.75);
      if (i > 0) {
        // The chord from the previous R to this Q replaces corner pts[i].
        if (blocked(next.back(), q)) next.push_back(pts[i]);
        next.push_back(q);
      }
      if (i + 2 < n) next.push_back(r);
    }
    next.push_back(pts.back());
    pts = std::move(next);
  }
  pts.front() = traj.poses.front();
  pts.back() = traj.poses.back();
  assign_yaws(pts);
  out.poses = std::move(pts);
  return out;
}

// ---------------------------------------------------------------------------
// JSONL: header {frame, resampled_to, smoothed}, then one {x, y, z, yaw} per line.

inline std::string frame_name(Frame f) { return f == Frame::Normalized ? "normalized" : "agent_raw"; }

inline Frame frame_from_name(const std::string& s) {
  if (s == "normalized") return Frame::Normalized;
  if (s == "agent_raw") return Frame::AgentRaw;
  throw FormatError("trajectory: unknown frame '" + s + "'");
}

inline std::string encode_trajectory(const Trajectory& traj) {
  nlohmann::json hdr;
  hdr["frame"] = frame_name(traj.frame);
  hdr["resampled_to"] = traj.meta.resampled_to ? nlohmann::json(*traj.meta.resampled_to) : nlohmann::json(nullptr);
  hdr["smoothed"] = traj.meta.smoothed;
  std::string out = hdr.dump() + "\n";
  for (const Pose& p : traj.poses) {
    nlohmann::json j;
    j["x"] = p.x;
    j["y"] = p.y;
    j["z"] = p.z;
    j["yaw"] = p.yaw;
    out += j.dump() + "\n";
  }
  return out;
}

inline Trajectory decode_trajectory(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  Trajectory traj;
  try {
    if (!std::getline(in, line)) throw FormatError("trajectory: missing header line");
    const auto hdr = nlohmann::json::parse(line);
    traj.frame = frame_from_name(hdr.at("frame").get<std::string>());
    if (!hdr.at("resampled_to").is_null()) traj.meta.resampled_to = hdr.at("resampled_to").get<int>();
    traj.meta.smoothed = hdr.at("smoothed").get<bool>();
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line);
      traj.poses.push_back(
          {j.at("x").get<double>(), j.at("y").get<double>(), j.at("z").get<double>(), j.at("yaw").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("trajectory: ") + e.what());
  }
  return traj;
}

inline void write_trajectory(const std::filesystem::path& path, const Trajectory& traj) {
  io::write_file_atomic(path, encode_trajectory(traj));
}

inline Trajectory read_trajectory(const std::filesystem::path& path) { return decode_trajectory(io::read_file(path)); }

}  // namespace entrynav
