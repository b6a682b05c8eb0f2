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

// Ground/obstacle segmentation and the agent-centric local occupancy grid.
//
// The agent frame shares the world's y-down convention: the agent stands at
// the origin on its local ground, faces +Z, and height above ground is -y.
// The standard grid covers X in [-2.5, 2.5] m and Z in [0, 5] m with 50x50
// cells of 0.1 m; the far boundaries belong to the last column/row.

#pragma once

#include <algorithm>
#include <cmath>
#include <cctype>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "entrynav/camera.hpp"
#include "entrynav/error.hpp"
#include "entrynav/io.hpp"
#include "entrynav/pointcloud.hpp"

namespace entrynav {

enum class CellState : std::uint8_t { Free = 0, Occupied = 1, Unknown = 2 };

struct Cell {
  int col = 0;
  int row = 0;
  auto operator<=>(const Cell&) const = default;
};

/// Lattice placement of a grid in the agent's X-Z plane.
struct GridGeometry {
  int cols = 50;
  int rows = 50;
  double resolution = 0.1;
  double x_min = -2.5;
  double z_min = 0.0;

  static GridGeometry standard() { return {}; }

  double x_max() const { return x_min + cols * resolution; }
  double z_max() const { return z_min + rows * resolution; }
  std::size_t cell_count() const { return static_cast<std::size_t>(cols) * rows; }

  bool contains(Cell c) const { return c.col >= 0 && c.col < cols && c.row >= 0 && c.row < rows; }
  std::size_t index(Cell c) const { return static_cast<std::size_t>(c.row) * cols + c.col; }
  Cell cell_at(std::size_t idx) const {
    return {static_cast<int>(idx % static_cast<std::size_t>(cols)), static_cast<int>(idx / static_cast<std::size_t>(cols))};
  }

  // Continuous lattice coordinates: cell (c, r) spans [c, c+1) x [r, r+1).
  double lattice_x(double x) const { return (x - x_min) * (1.0 / resolution); }
  double lattice_z(double z) const { return (z - z_min) * (1.0 / resolution); }

  /// Cell containing (x, z), with the closed far edges folded into the last
  /// column/row; none outside the perception range.
  std::optional<Cell> cell_of(double x, double z) const {
    if (!(x >= x_min && x <= x_max() && z >= z_min && z <= z_max())) return std::nullopt;
    return clamp_cell(static_cast<int>(std::floor(lattice_x(x))), static_cast<int>(std::floor(lattice_z(z))));
  }

  Cell clamp_cell(int col, int row) const { return {std::clamp(col, 0, cols - 1), std::clamp(row, 0, rows - 1)}; }

  Vec2 center_of(Cell c) const { return {x_min + (c.col + 0.5) * resolution, z_min + (c.row + 0.5) * resolution}; }
};

/// 2-D rigid placement of one planar frame inside another: a point (x, z)
/// given in the local frame maps to origin + R(yaw) * (x, z), where yaw is
/// measured from +Z toward +X.
struct PlanarPose {
  double x = 0.0;
  double z = 0.0;
  double yaw = 0.0;

  Vec2 apply(const Vec2& p) const {
    const double c = std::cos(yaw), s = std::sin(yaw);
    return {x + p.x() * c + p.y() * s, z - p.x() * s + p.y() * c};
  }
  Vec2 apply_inverse(const Vec2& p) const {
    const double c = std::cos(yaw), s = std::sin(yaw);
    const double dx = p.x() - x, dz = p.y() - z;
    return {dx * c - dz * s, dx * s + dz * c};
  }
};

/// a ∘ b: local frame of b, placed inside a's local frame, placed inside a's parent.
inline PlanarPose compose(const PlanarPose& a, const PlanarPose& b) {
  const Vec2 t = a.apply({b.x, b.z});
  double yaw = std::remainder(a.yaw + b.yaw, 2.0 * std::numbers::pi);
  if (yaw <= -std::numbers::pi) yaw += 2.0 * std::numbers::pi;
  return {t.x(), t.y(), yaw};
}

class OccupancyGrid {
 public:
  explicit OccupancyGrid(GridGeometry geometry = GridGeometry::standard(), CellState fill = CellState::Unknown)
      : geometry_(geometry), cells_(geometry.cell_count(), fill) {
    if (geometry.cols <= 0 || geometry.rows <= 0 || !(geometry.resolution > 0.0))
      throw DomainError("OccupancyGrid: invalid geometry");
    agent_cell_ = {geometry.cols / 2, 0};
    target_cell_ = agent_cell_;
  }

  const GridGeometry& geometry() const { return geometry_; }
  int cols() const { return geometry_.cols; }
  int rows() const { return geometry_.rows; }

  CellState state(Cell c) const { return cells_[geometry_.index(c)]; }
  void set_state(Cell c, CellState s) { cells_[geometry_.index(c)] = s; }
  bool contains(Cell c) const { return geometry_.contains(c); }
  bool occupied(Cell c) const { return contains(c) && state(c) == CellState::Occupied; }
  const std::vector<CellState>& cells() const { return cells_; }

  Cell agent_cell() const { return agent_cell_; }
  Cell target_cell() const { return target_cell_; }
  const Vec3& target_world() const { return target_world_; }

  /// Sets the agent cell and forces it Free.
  void set_agent(Cell c) {
    if (!contains(c)) throw DomainError("OccupancyGrid: agent cell outside the grid");
    agent_cell_ = c;
    set_state(c, CellState::Free);
  }
  /// Sets the target cell and forces it Free.
  void set_target(Cell c) {
    if (!contains(c)) throw DomainError("OccupancyGrid: target cell outside the grid");
    target_cell_ = c;
    set_state(c, CellState::Free);
  }
  void set_target_world(const Vec3& p) { target_world_ = p; }

  std::size_t count(CellState s) const { return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), s)); }

  bool operator==(const OccupancyGrid& o) const {
    return geometry_.cols == o.geometry_.cols && geometry_.rows == o.geometry_.rows &&
           geometry_.resolution == o.geometry_.resolution && geometry_.x_min == o.geometry_.x_min &&
           geometry_.z_min == o.geometry_.z_min && cells_ == o.cells_ && agent_cell_ == o.agent_cell_ &&
           target_cell_ == o.target_cell_ && target_world_ == o.target_world_;
  }

 private:
  GridGeometry geometry_;
  std::vector<CellState> cells_;
  Cell agent_cell_;
  Cell target_cell_;
  Vec3 target_world_ = Vec3::Zero();
};

// ---------------------------------------------------------------------------
// Segmentation

struct Segmentation {
  std::vector<std::size_t> ground;
  std::vector<std::size_t> obstacle;
};

struct SegmentParams {
  double theta_ground_deg = 25.0;    // max angle(n, up) for ground
  double theta_wall_deg = 65.0;      // angle(n, up) above this marks an obstacle
  double inconsistency_deg = 30.0;   // mean neighbor normal deviation above this marks an obstacle
  int neighbors = kDefaultNormalNeighbors;
};

inline double angle_deg(const Vec3& a, const Vec3& b) {
  const double c = std::clamp(a.dot(b) / (a.norm() * b.norm()), -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

/// Ground where the normal is within theta_ground of `up`; obstacle where it is
/// near-horizontal (beyond theta_wall) or disagrees with its neighborhood;
/// anything else stays unclassified.
inline Segmentation segment_cloud(const PointCloud& cloud, const Vec3& up, const SegmentParams& params = {}) {
  if (!cloud.normals) throw DomainError("segment_cloud: cloud has no normals");
  if (!(params.theta_ground_deg > 0.0 && params.theta_ground_deg < 90.0))
    throw DomainError("segment_cloud: theta_ground must lie in (0, 90) degrees");
  const auto& normals = *cloud.normals;
  const Vec3 u = up.normalized();
  Segmentation seg;
  std::vector<std::size_t> ambiguous;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const double a = angle_deg(normals[i], u);
    if (a <= params.theta_ground_deg) {
      seg.ground.push_back(i);
    } else if (a > params.theta_wall_deg) {
      seg.obstacle.push_back(i);
    } else {
      ambiguous.push_back(i);
    }
  }
  if (!ambiguous.empty() && cloud.size() > 1 && params.neighbors > 0) {
    const SpatialHash hash(cloud.points);
    for (std::size_t i : ambiguous) {
      const auto nbrs = hash.nearest(cloud.points[i], static_cast<std::size_t>(params.neighbors) + 1);
      double sum = 0.0;
      int n = 0;
      for (std::size_t j : nbrs) {
        if (j == i) continue;
        const double c = std::clamp(std::abs(normals[i].dot(normals[j])), 0.0, 1.0);
        sum += std::acos(c) * 180.0 / std::numbers::pi;
        ++n;
      }
      if (n > 0 && sum / n > params.inconsistency_deg) seg.obstacle.push_back(i);
    }
    std::sort(seg.obstacle.begin(), seg.obstacle.end());
  }
  return seg;
}

// ---------------------------------------------------------------------------
// Grid construction

struct GridParams {
  GridGeometry geometry = GridGeometry::standard();
  double obstacle_min_height = 0.1;  // above local ground, meters
  double obstacle_max_height = 2.0;
};

namespace detail {

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

/// Per-cell median y (agent frame) of ground points; none for cells without ground.
inline std::vector<std::optional<double>> cell_ground_heights(const PointCloud& cloud, const Segmentation& seg,
                                                              const RigidTransform& agent_pose,
                                                              const GridGeometry& geometry = GridGeometry::standard()) {
  std::vector<std::vector<double>> buckets(geometry.cell_count());
  for (std::size_t i : seg.ground) {
    const Vec3 p = agent_pose.apply_inverse(cloud.points[i]);
    if (auto c = geometry.cell_of(p.x(), p.z())) buckets[geometry.index(*c)].push_back(p.y());
  }
  std::vector<std::optional<double>> out(geometry.cell_count());
  for (std::size_t k = 0; k < buckets.size(); ++k)
    if (!buckets[k].empty()) out[k] = detail::median(std::move(buckets[k]));
  return out;
}

/// Grid cell for an agent-frame target. Out-of-range targets are clamped onto
/// the nearest edge (far row for z beyond the range); an Occupied result is
/// replaced by the nearest non-Occupied cell (ties: smaller row, then col).
inline Cell anchor_target(const OccupancyGrid& grid, const Vec3& target_agent) {
  const auto& g = grid.geometry();
  const double x = std::clamp(target_agent.x(), g.x_min, g.x_max());
  const double z = std::clamp(target_agent.z(), g.z_min, g.z_max());
  const Cell c = *g.cell_of(x, z);
  if (grid.state(c) != CellState::Occupied) return c;
  std::optional<Cell> best;
  long best_d2 = 0;
  for (int row = 0; row < g.rows; ++row) {
    for (int col = 0; col < g.cols; ++col) {
      const Cell cand{col, row};
      if (grid.state(cand) == CellState::Occupied) continue;
      const long d2 = static_cast<long>(col - c.col) * (col - c.col) + static_cast<long>(row - c.row) * (row - c.row);
      if (!best || d2 < best_d2) {
        best = cand;
        best_d2 = d2;
      }
    }
  }
  return best.value_or(c);
}

/// Projects a segmented cloud into the agent-centric grid. Obstacle points in
/// the height band mark Occupied, ground points mark Free, Occupied wins ties,
/// everything else stays Unknown. Result is independent of point order.
inline OccupancyGrid build_grid(const PointCloud& cloud, const Segmentation& seg, const RigidTransform& agent_pose,
                                const Vec3& target_world, const GridParams& params = {}) {
  const GridGeometry& geo = params.geometry;
  OccupancyGrid grid(geo, CellState::Unknown);

  const auto ground_y = cell_ground_heights(cloud, seg, agent_pose, geo);
  std::vector<double> all_ground;
  for (std::size_t i : seg.ground) {
    const Vec3 p = agent_pose.apply_inverse(cloud.points[i]);
    if (geo.cell_of(p.x(), p.z())) all_ground.push_back(p.y());
  }
  const double fallback_y = all_ground.empty() ? 0.0 : detail::median(std::move(all_ground));

  for (std::size_t i : seg.ground) {
    const Vec3 p = agent_pose.apply_inverse(cloud.points[i]);
    if (auto c = geo.cell_of(p.x(), p.z())) grid.set_state(*c, CellState::Free);
  }
  for (std::size_t i : seg.obstacle) {
    const Vec3 p = agent_pose.apply_inverse(cloud.points[i]);
    const auto c = geo.cell_of(p.x(), p.z());
    if (!c) continue;
    const double local_ground_y = ground_y[geo.index(*c)].value_or(fallback_y);
    const double height = local_ground_y - p.y();
    if (height >= params.obstacle_min_height && height <= params.obstacle_max_height)
      grid.set_state(*c, CellState::Occupied);
  }

  grid.set_agent({geo.cols / 2, 0});
  const Vec3 target_agent = agent_pose.apply_inverse(target_world);
  grid.set_target_world(target_agent);
  grid.set_target(anchor_target(grid, target_agent));
  return grid;
}

// ---------------------------------------------------------------------------
// Segment traversal

/// True when the segment a→b (grid-frame meters) passes through an Occupied
/// cell. Crossing exactly through a lattice corner only counts when both
/// flanking cells are Occupied, matching the planner's no-corner-cutting rule.
inline bool segment_collides(const OccupancyGrid& grid, const Vec2& a, const Vec2& b) {
  const auto& g = grid.geometry();
  double x = g.lattice_x(a.x()), z = g.lattice_z(a.y());
  const double ex = g.lattice_x(b.x()), ez = g.lattice_z(b.y());
  const double dx = ex - x, dz = ez - z;
  int col = static_cast<int>(std::floor(x)), row = static_cast<int>(std::floor(z));
  const int end_col = static_cast<int>(std::floor(ex)), end_row = static_cast<int>(std::floor(ez));
  const int step_c = dx > 0 ? 1 : (dx < 0 ? -1 : 0);
  const int step_r = dz > 0 ? 1 : (dz < 0 ? -1 : 0);
  constexpr double inf = std::numeric_limits<double>::infinity();
  const double t_delta_c = step_c != 0 ? 1.0 / std::abs(dx) : inf;
  const double t_delta_r = step_r != 0 ? 1.0 / std::abs(dz) : inf;
  double t_max_c = step_c > 0 ? (col + 1 - x) / dx : (step_c < 0 ? (x - col) / -dx : inf);
  double t_max_r = step_r > 0 ? (row + 1 - z) / dz : (step_r < 0 ? (z - row) / -dz : inf);

  if (grid.occupied({col, row})) return true;
  const std::size_t guard = static_cast<std::size_t>(std::abs(end_col - col) + std::abs(end_row - row)) + 4;
  for (std::size_t it = 0; it < guard && (col != end_col || row != end_row); ++it) {
    constexpr double eps = 1e-9;
    if (std::min(t_max_c, t_max_r) > 1.0) break;
    if (std::abs(t_max_c - t_max_r) <= eps) {
      if (grid.occupied({col + step_c, row}) && grid.occupied({col, row + step_r})) return true;
      col += step_c;
      row += step_r;
      t_max_c += t_delta_c;
      t_max_r += t_delta_r;
    } else if (t_max_c < t_max_r) {
      col += step_c;
      t_max_c += t_delta_c;
    } else {
      row += step_r;
      t_max_r += t_delta_r;
    }
    if (grid.occupied({col, row})) return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Serialization: PGM P5 (Free 0, Unknown 128, Occupied 255) plus JSON sidecar.
// PGM row 0 is grid row 0 (nearest the agent).

inline std::uint8_t cell_gray(CellState s) {
  switch (s) {
    case CellState::Free: return 0;
    case CellState::Occupied: return 255;
    default: return 128;
  }
}

inline std::string encode_grid_pgm(const OccupancyGrid& grid) {
  std::string out = "P5\n" + std::to_string(grid.cols()) + " " + std::to_string(grid.rows()) + "\n255\n";
  for (CellState s : grid.cells()) out.push_back(static_cast<char>(cell_gray(s)));
  return out;
}

inline nlohmann::json grid_sidecar(const OccupancyGrid& grid) {
  const auto& g = grid.geometry();
  nlohmann::json j;
  j["resolution"] = g.resolution;
  j["x_range"] = {g.x_min, g.x_max()};
  j["z_range"] = {g.z_min, g.z_max()};
  j["agent_cell"] = {grid.agent_cell().col, grid.agent_cell().row};
  j["target_cell"] = {grid.target_cell().col, grid.target_cell().row};
  j["target_world"] = {grid.target_world().x(), grid.target_world().y(), grid.target_world().z()};
  return j;
}

inline OccupancyGrid decode_grid(std::string_view pgm, const nlohmann::json& sidecar) {
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < pgm.size() && std::isspace(static_cast<unsigned char>(pgm[pos]))) ++pos;
    const std::size_t start = pos;
    while (pos < pgm.size() && !std::isspace(static_cast<unsigned char>(pgm[pos]))) ++pos;
    if (start == pos) throw FormatError("PGM: truncated header");
    return std::string(pgm.substr(start, pos - start));
  };
  if (token() != "P5") throw FormatError("PGM: expected P5");
  int cols = 0, rows = 0, maxval = 0;
  try {
    cols = std::stoi(token());
    rows = std::stoi(token());
    maxval = std::stoi(token());
  } catch (const std::logic_error&) {
    throw FormatError("PGM: malformed header");
  }
  if (maxval != 255 || cols <= 0 || rows <= 0) throw FormatError("PGM: unsupported header values");
  ++pos;
  if (pgm.size() - pos != static_cast<std::size_t>(cols) * rows) throw FormatError("PGM: payload size mismatch");

  GridGeometry geo;
  try {
    geo.cols = cols;
    geo.rows = rows;
    geo.resolution = sidecar.at("resolution").get<double>();
    geo.x_min = sidecar.at("x_range").at(0).get<double>();
    geo.z_min = sidecar.at("z_range").at(0).get<double>();
    OccupancyGrid grid(geo);
    for (std::size_t k = 0; k < geo.cell_count(); ++k) {
      const auto v = static_cast<std::uint8_t>(pgm[pos + k]);
      const CellState s = v == 0 ? CellState::Free : (v == 255 ? CellState::Occupied : CellState::Unknown);
      grid.set_state(geo.cell_at(k), s);
    }
    const auto& tw = sidecar.at("target_world");
    grid.set_target_world({tw.at(0).get<double>(), tw.at(1).get<double>(), tw.at(2).get<double>()});
    grid.set_target({sidecar.at("target_cell").at(0).get<int>(), sidecar.at("target_cell").at(1).get<int>()});
    grid.set_agent({sidecar.at("agent_cell").at(0).get<int>(), sidecar.at("agent_cell").at(1).get<int>()});
    return grid;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("grid sidecar: ") + e.what());
  } catch (const DomainError& e) {
    throw FormatError(std::string("grid sidecar: ") + e.what());
  }
}

inline void write_grid(const std::filesystem::path& pgm_path, const std::filesystem::path& json_path,
                       const OccupancyGrid& grid) {
  io::write_file_atomic(pgm_path, encode_grid_pgm(grid));
  io::write_file_atomic(json_path, grid_sidecar(grid).dump(2) + "\n");
}

inline OccupancyGrid read_grid(const std::filesystem::path& pgm_path, const std::filesystem::path& json_path) {
  nlohmann::json sidecar;
  try {
    sidecar = nlohmann::json::parse(io::read_file(json_path));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(json_path.string() + ": " + e.what());
  }
  return decode_grid(io::read_file(pgm_path), sidecar);
}

}  // namespace entrynav
