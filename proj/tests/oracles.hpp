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

// Reference implementations used only by the tests. Each one is written
// from the definition, as plainly as possible, sharing no code with the
// library routine it checks.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

/// Unique scratch directory under the system temp dir, wiped on creation.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("entrynav_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Indices of the k nearest points by exhaustive scan, ordered by (distance², index).
inline std::vector<std::size_t> knn(const std::vector<Eigen::Vector3d>& pts, const Eigen::Vector3d& q, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> d;
  for (std::size_t i = 0; i < pts.size(); ++i) d.push_back({(pts[i] - q).squaredNorm(), i});
  std::sort(d.begin(), d.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < std::min(k, d.size()); ++i) out.push_back(d[i].second);
  return out;
}

/// Bellman-Ford style relaxation over an 8-connected grid until nothing
/// changes. blocked[r*cols+c] marks impassable cells, occupied[] marks the
/// cells that forbid cutting a corner.
inline std::vector<double> grid_distances(int cols, int rows, const std::vector<bool>& blocked,
                                          const std::vector<bool>& occupied, int sc, int sr) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(static_cast<std::size_t>(cols * rows), inf);
  auto at = [&](int c, int r) { return static_cast<std::size_t>(r * cols + c); };
  auto occ = [&](int c, int r) { return c >= 0 && c < cols && r >= 0 && r < rows && occupied[at(c, r)]; };
  if (blocked[at(sc, sr)]) return dist;
  dist[at(sc, sr)] = 0.0;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        if (blocked[at(c, r)] || dist[at(c, r)] == inf) continue;
        for (int dr = -1; dr <= 1; ++dr)
          for (int dc = -1; dc <= 1; ++dc) {
            if (!dc && !dr) continue;
            const int nc = c + dc, nr = r + dr;
            if (nc < 0 || nc >= cols || nr < 0 || nr >= rows || blocked[at(nc, nr)]) continue;
            if (dc && dr && occ(c + dc, r) && occ(c, r + dr)) continue;
            const double cand = dist[at(c, r)] + (dc && dr ? std::sqrt(2.0) : 1.0);
            if (cand < dist[at(nc, nr)] - 1e-12) {
              dist[at(nc, nr)] = cand;
              changed = true;
            }
          }
      }
  }
  return dist;
}

/// Top-k selection by a full stable sort on (-value, index).
inline std::vector<std::uint8_t> topk_by_sort(const std::vector<double>& v, std::size_t k) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] != v[b] ? v[a] > v[b] : a < b; });
  std::vector<std::uint8_t> bits(v.size(), 0);
  for (std::size_t i = 0; i < k; ++i) bits[idx[i]] = 1;
  return bits;
}

/// Point at arc length s along a 2-D polyline, by walking segments.
inline Eigen::Vector2d point_at(const std::vector<Eigen::Vector2d>& poly, double s) {
  for (std::size_t i = 1; i < poly.size(); ++i) {
    const double len = (poly[i] - poly[i - 1]).norm();
    if (s <= len || i + 1 == poly.size()) {
      if (len == 0.0) return poly[i];
      const double t = std::clamp(s / len, 0.0, 1.0);
      return poly[i - 1] + t * (poly[i] - poly[i - 1]);
    }
    s -= len;
  }
  return poly.back();
}

inline double polyline_length(const std::vector<Eigen::Vector2d>& poly) {
  double s = 0.0;
  for (std::size_t i = 1; i < poly.size(); ++i) s += (poly[i] - poly[i - 1]).norm();
  return s;
}

/// Mean pointwise distance of m uniform arc-length samples of two polylines.
inline double mean_deviation(const std::vector<Eigen::Vector2d>& a, const std::vector<Eigen::Vector2d>& b, int m) {
  const double la = polyline_length(a), lb = polyline_length(b);
  double sum = 0.0;
  for (int i = 0; i < m; ++i) {
    const double f = static_cast<double>(i) / (m - 1);
    sum += (point_at(a, f * la) - point_at(b, f * lb)).norm();
  }
  return sum / m;
}

/// True when segment a-b (lattice units) overlaps the interior of an occupied
/// unit square along a stretch of positive length (Liang-Barsky clipping).
/// Touching a corner or an edge does not count.
inline bool segment_hits_cells(const std::vector<bool>& occupied, int cols, int rows, Eigen::Vector2d a,
                               Eigen::Vector2d b) {
  const Eigen::Vector2d d = b - a;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      if (!occupied[static_cast<std::size_t>(r * cols + c)]) continue;
      double t0 = 0.0, t1 = 1.0;
      bool inside = true;
      const double p[4] = {-d.x(), d.x(), -d.y(), d.y()};
      const double q[4] = {a.x() - c, c + 1 - a.x(), a.y() - r, r + 1 - a.y()};
      for (int i = 0; i < 4 && inside; ++i) {
        if (p[i] == 0.0) {
          if (q[i] <= 0.0) inside = false;
        } else {
          const double t = q[i] / p[i];
          if (p[i] < 0.0) t0 = std::max(t0, t);
          else t1 = std::min(t1, t);
        }
      }
      if (inside && t1 - t0 > 1e-12) return true;
    }
  return false;
}

}  // namespace oracle
