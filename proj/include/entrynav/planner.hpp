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

// 8-connected shortest paths over an OccupancyGrid.
//
// Path costs are carried as exact (straight, diagonal) move counts and only
// turned into straight + diagonal * sqrt(2) for ordering, so equal-cost paths
// found by different searches report bit-identical costs.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <numbers>
#include <optional>
#include <queue>
#include <vector>

#include <nlohmann/json.hpp>

#include "entrynav/error.hpp"
#include "entrynav/io.hpp"
#include "entrynav/occupancy.hpp"

namespace entrynav {

/// Exact path length as a count of unit and diagonal moves.
struct MoveCount {
  int straight = 0;
  int diagonal = 0;

  double value() const { return straight + diagonal * std::numbers::sqrt2; }
  MoveCount operator+(const MoveCount& o) const { return {straight + o.straight, diagonal + o.diagonal}; }
  bool operator==(const MoveCount&) const = default;
};

/// Octile distance between two cells.
inline MoveCount octile(Cell a, Cell b) {
  const int dx = std::abs(a.col - b.col), dz = std::abs(a.row - b.row);
  const int lo = std::min(dx, dz), hi = std::max(dx, dz);
  return {hi - lo, lo};
}

struct GridPath {
  std::vector<Cell> cells;
  double cost = 0.0;
  MoveCount moves;
};

struct PlannerOptions {
  bool unknown_is_occupied = false;
};

/// Optional instrumentation: every expanded cell with its heuristic value.
struct SearchTrace {
  std::vector<Cell> expanded;
  std::vector<double> heuristic;
};

inline bool traversable(const OccupancyGrid& grid, Cell c, const PlannerOptions& opt) {
  if (!grid.contains(c)) return false;
  const CellState s = grid.state(c);
  return s == CellState::Free || (s == CellState::Unknown && !opt.unknown_is_occupied);
}

namespace detail {

struct Step {
  int dc, dr;
};
inline constexpr Step kNeighbors8[8] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {-1, 1}, {1, -1}, {-1, -1}};

template <typename Heuristic>
std::optional<GridPath> best_first(const OccupancyGrid& grid, const PlannerOptions& opt, Heuristic&& h,
                                   SearchTrace* trace) {
  const auto& geo = grid.geometry();
  const Cell start = grid.agent_cell(), goal = grid.target_cell();
  if (!traversable(grid, start, opt) || !traversable(grid, goal, opt)) return std::nullopt;

  const std::size_t n = geo.cell_count();
  std::vector<MoveCount> g(n);
  std::vector<bool> seen(n, false), closed(n, false);
  std::vector<std::size_t> parent(n, std::numeric_limits<std::size_t>::max());

  struct Entry {
    double f, h;
    std::size_t idx;
    MoveCount g;
  };
  // Pop order: lower f, then lower h, then row-major index.
  auto later = [](const Entry& a, const Entry& b) {
    if (a.f != b.f) return a.f > b.f;
    if (a.h != b.h) return a.h > b.h;
    return a.idx > b.idx;
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(later)> open(later);

  const std::size_t s_idx = geo.index(start), goal_idx = geo.index(goal);
  seen[s_idx] = true;
  {
    const MoveCount hs = h(start);
    open.push({hs.value(), hs.value(), s_idx, {}});
  }
  while (!open.empty()) {
    const Entry top = open.top();
    open.pop();
    if (closed[top.idx] || !(top.g == g[top.idx])) continue;
    closed[top.idx] = true;
    const Cell cur = geo.cell_at(top.idx);
    if (trace) {
      trace->expanded.push_back(cur);
      trace->heuristic.push_back(top.h);
    }
    if (top.idx == goal_idx) break;
    for (const auto& st : kNeighbors8) {
      const Cell nb{cur.col + st.dc, cur.row + st.dr};
      if (!traversable(grid, nb, opt)) continue;
      const bool diag = st.dc != 0 && st.dr != 0;
      // No corner cutting: a diagonal is blocked when both flanking cells are Occupied.
      if (diag && grid.occupied({cur.col + st.dc, cur.row}) && grid.occupied({cur.col, cur.row + st.dr})) continue;
      const std::size_t ni = geo.index(nb);
      if (closed[ni]) continue;
      const MoveCount cand = g[top.idx] + MoveCount{diag ? 0 : 1, diag ? 1 : 0};
      if (!seen[ni] || cand.value() < g[ni].value()) {
        seen[ni] = true;
        g[ni] = cand;
        parent[ni] = top.idx;
        const MoveCount hn = h(nb);
        open.push({(cand + hn).value(), hn.value(), ni, cand});
      }
    }
  }
  if (!closed[goal_idx]) return std::nullopt;

  GridPath path;
  path.moves = g[goal_idx];
  path.cost = path.moves.value();
  for (std::size_t i = goal_idx;; i = parent[i]) {
    path.cells.push_back(geo.cell_at(i));
    if (i == s_idx) break;
  }
  std::reverse(path.cells.begin(), path.cells.end());
  return path;
}

}  // namespace detail

/// Minimum-cost path from the agent cell to the target cell with the octile
/// heuristic; none when the target is unreachable.
inline std::optional<GridPath> astar(const OccupancyGrid& grid, const PlannerOptions& opt = {},
                                     SearchTrace* trace = nullptr) {
  const Cell goal = grid.target_cell();
  return detail::best_first(grid, opt, [goal](Cell c) { return octile(c, goal); }, trace);
}

/// Uninformed reference search with the same contract as astar.
inline std::optional<GridPath> dijkstra_oracle(const OccupancyGrid& grid, const PlannerOptions& opt = {},
                                               SearchTrace* trace = nullptr) {
  return detail::best_first(grid, opt, [](Cell) { return MoveCount{}; }, trace);
}

/// Grows every Occupied cell by a Chebyshev radius; agent and target stay Free.
inline OccupancyGrid inflate_obstacles(const OccupancyGrid& grid, int radius_cells) {
  if (radius_cells < 0) throw DomainError("inflate_obstacles: radius must be >= 0");
  OccupancyGrid out = grid;
  if (radius_cells == 0) return out;
  const auto& geo = grid.geometry();
  for (int row = 0; row < geo.rows; ++row) {
    for (int col = 0; col < geo.cols; ++col) {
      if (grid.state({col, row}) != CellState::Occupied) continue;
      for (int dr = -radius_cells; dr <= radius_cells; ++dr)
        for (int dc = -radius_cells; dc <= radius_cells; ++dc) {
          const Cell c{col + dc, row + dr};
          if (geo.contains(c)) out.set_state(c, CellState::Occupied);
        }
    }
  }
  out.set_target(grid.target_cell());
  out.set_agent(grid.agent_cell());
  return out;
}

/// Checks the GridPath invariants against a grid; returns an empty string when valid.
inline std::string validate_path(const OccupancyGrid& grid, const GridPath& path, const PlannerOptions& opt = {}) {
  if (path.cells.empty()) return "empty path";
  if (path.cells.front() != grid.agent_cell()) return "path does not start at the agent cell";
  if (path.cells.back() != grid.target_cell()) return "path does not end at the target cell";
  std::vector<bool> visited(grid.geometry().cell_count(), false);
  MoveCount moves;
  for (std::size_t i = 0; i < path.cells.size(); ++i) {
    const Cell c = path.cells[i];
    if (!traversable(grid, c, opt)) return "path crosses a blocked cell";
    const std::size_t idx = grid.geometry().index(c);
    if (visited[idx]) return "path repeats a cell";
    visited[idx] = true;
    if (i == 0) continue;
    const Cell p = path.cells[i - 1];
    const int dc = c.col - p.col, dr = c.row - p.row;
    if (std::abs(dc) > 1 || std::abs(dr) > 1 || (dc == 0 && dr == 0)) return "consecutive cells are not 8-adjacent";
    if (dc != 0 && dr != 0) {
      if (grid.occupied({p.col + dc, p.row}) && grid.occupied({p.col, p.row + dr})) return "path cuts a corner";
      moves.diagonal++;
    } else {
      moves.straight++;
    }
  }
  if (!(moves == path.moves) || moves.value() != path.cost) return "path cost does not match its moves";
  return {};
}

inline nlohmann::json path_to_json(const GridPath& path) {
  nlohmann::json cells = nlohmann::json::array();
  for (const Cell& c : path.cells) cells.push_back({c.col, c.row});
  return {{"cells", cells}, {"cost", path.cost}};
}

inline GridPath path_from_json(const nlohmann::json& j) {
  GridPath path;
  try {
    for (const auto& c : j.at("cells")) path.cells.push_back({c.at(0).get<int>(), c.at(1).get<int>()});
    path.cost = j.at("cost").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("path JSON: ") + e.what());
  }
  for (std::size_t i = 1; i < path.cells.size(); ++i) {
    const bool diag = path.cells[i].col != path.cells[i - 1].col && path.cells[i].row != path.cells[i - 1].row;
    (diag ? path.moves.diagonal : path.moves.straight)++;
  }
  return path;
}

inline void write_path(const std::filesystem::path& p, const GridPath& path) {
  io::write_file_atomic(p, path_to_json(path).dump() + "\n");
}

}  // namespace entrynav
