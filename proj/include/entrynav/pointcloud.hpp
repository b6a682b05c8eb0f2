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

#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "entrynav/camera.hpp"
#include "entrynav/error.hpp"
#include "entrynav/io.hpp"

namespace entrynav {

/// Row-major z-depth in meters; 0 marks an invalid pixel.
struct DepthImage {
  int width = 0;
  int height = 0;
  std::vector<float> depth;

  DepthImage() = default;
  DepthImage(int w, int h, float fill = 0.0f)
      : width(w), height(h), depth(static_cast<std::size_t>(w) * h, fill) {}

  float at(int col, int row) const { return depth[static_cast<std::size_t>(row) * width + col]; }
  float& at(int col, int row) { return depth[static_cast<std::size_t>(row) * width + col]; }

  void validate() const {
    if (width <= 0 || height <= 0 || depth.size() != static_cast<std::size_t>(width) * height)
      throw DomainError("DepthImage: inconsistent dimensions");
    for (float d : depth)
      if (!std::isfinite(d) || d < 0.0f) throw DomainError("DepthImage: depth values must be finite and >= 0");
  }
};

struct PointCloud {
  std::vector<Vec3> points;
  std::optional<std::vector<Vec3>> normals;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_normals() const { return normals.has_value(); }

  void validate() const {
    for (const auto& p : points)
      if (!p.allFinite()) throw DomainError("PointCloud: non-finite coordinate");
    if (normals) {
      if (normals->size() != points.size()) throw DomainError("PointCloud: normal count differs from point count");
      for (const auto& n : *normals)
        if (!n.allFinite() || std::abs(n.norm() - 1.0) > 1e-6) throw DomainError("PointCloud: normal is not unit length");
    }
  }
};

/// One point per sampled pixel (every `stride`-th column and row) with depth > 0,
/// unprojected through the pixel center, in row-major order.
inline PointCloud cloud_from_depth(const DepthImage& depth, const CameraModel& model, int stride = 1) {
  if (stride < 1) throw DomainError("cloud_from_depth: stride must be >= 1");
  if (depth.width != model.width() || depth.height != model.height())
    throw DomainError("cloud_from_depth: depth image size does not match the camera");
  PointCloud cloud;
  for (int row = 0; row < depth.height; row += stride) {
    for (int col = 0; col < depth.width; col += stride) {
      const float d = depth.at(col, row);
      if (d > 0.0f) cloud.points.push_back(unproject(model, col + 0.5, row + 0.5, d));
    }
  }
  return cloud;
}

// ---------------------------------------------------------------------------
// Neighbor search

/// Uniform hash grid over a fixed point set answering exact k-nearest queries.
/// Results are ordered by (squared distance, index) so they never depend on
/// hash iteration order.
class SpatialHash {
 public:
  explicit SpatialHash(const std::vector<Vec3>& points, double cell_size = 0.2)
      : points_(points), cell_size_(cell_size) {
    if (!(cell_size > 0.0)) throw DomainError("SpatialHash: cell size must be positive");
    for (std::size_t i = 0; i < points_.size(); ++i) cells_[key_of(cell_of(points_[i]))].push_back(i);
    if (!points_.empty()) {
      lo_ = hi_ = cell_of(points_[0]);
      for (const auto& p : points_) {
        const auto c = cell_of(p);
        for (int a = 0; a < 3; ++a) {
          lo_[a] = std::min(lo_[a], c[a]);
          hi_[a] = std::max(hi_[a], c[a]);
        }
      }
    }
  }

  /// Indices of the `count` points closest to `query` (fewer if the set is smaller).
  std::vector<std::size_t> nearest(const Vec3& query, std::size_t count) const {
    count = std::min(count, points_.size());
    std::vector<Candidate> found;
    if (count == 0) return {};
    const auto qc = cell_of(query);
    int max_ring = 0;
    for (int a = 0; a < 3; ++a) max_ring = std::max({max_ring, std::abs(qc[a] - lo_[a]), std::abs(hi_[a] - qc[a])});

    for (int ring = 0; ring <= max_ring; ++ring) {
      const long long side = 2LL * ring + 1;
      const long long ring_cells = ring == 0 ? 1 : side * side * side - (side - 2) * (side - 2) * (side - 2);
      if (ring_cells > static_cast<long long>(cells_.size())) {
        // Sparse set relative to the search radius: a linear scan is cheaper.
        return brute_force(query, count);
      }
      visit_ring(qc, ring, [&](std::size_t idx) { found.push_back({(points_[idx] - query).squaredNorm(), idx}); });
      if (found.size() >= count) {
        std::nth_element(found.begin(), found.begin() + static_cast<std::ptrdiff_t>(count - 1), found.end());
        const double kth = found[count - 1].d2;
        // Anything not yet visited lies at least ring*cell_size away.
        const double reach = ring * cell_size_;
        if (kth < reach * reach) break;
      }
    }
    return finish(found, count);
  }

 private:
  using CellIdx = std::array<int, 3>;
  struct Candidate {
    double d2;
    std::size_t idx;
    bool operator<(const Candidate& o) const { return d2 < o.d2 || (d2 == o.d2 && idx < o.idx); }
  };

  CellIdx cell_of(const Vec3& p) const {
    return {static_cast<int>(std::floor(p.x() / cell_size_)), static_cast<int>(std::floor(p.y() / cell_size_)),
            static_cast<int>(std::floor(p.z() / cell_size_))};
  }

  static std::uint64_t key_of(const CellIdx& c) {
    const auto u = [](int v) { return static_cast<std::uint64_t>(static_cast<std::uint32_t>(v) & 0x1FFFFFu); };
    return (u(c[0]) << 42) | (u(c[1]) << 21) | u(c[2]);
  }

  template <typename Fn>
  void visit_cell(const CellIdx& c, Fn&& fn) const {
    auto it = cells_.find(key_of(c));
    if (it == cells_.end()) return;
    for (std::size_t idx : it->second) fn(idx);
  }

  // Visits every cell whose Chebyshev distance to `center` equals `ring`.
  template <typename Fn>
  void visit_ring(const CellIdx& center, int ring, Fn&& fn) const {
    for (int dx = -ring; dx <= ring; ++dx) {
      for (int dy = -ring; dy <= ring; ++dy) {
        const bool edge = std::abs(dx) == ring || std::abs(dy) == ring;
        if (edge) {
          for (int dz = -ring; dz <= ring; ++dz) visit_cell({center[0] + dx, center[1] + dy, center[2] + dz}, fn);
        } else {
          visit_cell({center[0] + dx, center[1] + dy, center[2] - ring}, fn);
          if (ring > 0) visit_cell({center[0] + dx, center[1] + dy, center[2] + ring}, fn);
        }
      }
    }
  }

  std::vector<std::size_t> brute_force(const Vec3& query, std::size_t count) const {
    std::vector<Candidate> all;
    all.reserve(points_.size());
    for (std::size_t i = 0; i < points_.size(); ++i) all.push_back({(points_[i] - query).squaredNorm(), i});
    return finish(all, count);
  }

  static std::vector<std::size_t> finish(std::vector<Candidate>& found, std::size_t count) {
    std::sort(found.begin(), found.end());
    std::vector<std::size_t> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count && i < found.size(); ++i) out.push_back(found[i].idx);
    return out;
  }

  const std::vector<Vec3>& points_;
  double cell_size_;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> cells_;
  CellIdx lo_{0, 0, 0};
  CellIdx hi_{0, 0, 0};
};

namespace detail {

inline bool lex_abs_greater(const Vec3& a, const Vec3& b) {
  for (int i = 0; i < 3; ++i) {
    const double x = std::abs(a[i]), y = std::abs(b[i]);
    if (x != y) return x > y;
  }
  return false;
}

// Unit normal of a neighborhood: eigenvector of the smallest covariance
// eigenvalue. When the smallest eigenvalues tie, the candidate with the
// lexicographically largest |component| pattern wins.
inline Vec3 pca_normal(const std::vector<Vec3>& points, const std::vector<std::size_t>& nbrs) {
  Vec3 mean = Vec3::Zero();
  for (std::size_t i : nbrs) mean += points[i];
  mean /= static_cast<double>(nbrs.size());
  Mat3 cov = Mat3::Zero();
  for (std::size_t i : nbrs) {
    const Vec3 d = points[i] - mean;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(nbrs.size());

  Eigen::SelfAdjointEigenSolver<Mat3> solver(cov);
  const Vec3 evals = solver.eigenvalues();  // ascending
  const Mat3 evecs = solver.eigenvectors();
  const double tol = 1e-10 * std::max(std::abs(evals[2]), 1e-300);
  Vec3 best = evecs.col(0).normalized();
  for (int c = 1; c < 3; ++c) {
    if (evals[c] - evals[0] > tol) break;
    const Vec3 cand = evecs.col(c).normalized();
    if (lex_abs_greater(cand, best)) best = cand;
  }
  return best;
}

}  // namespace detail

/// Default neighbor count for normal estimation.
inline constexpr int kDefaultNormalNeighbors = 16;

/// PCA normals from each point plus its k nearest neighbors, each flipped to
/// face `viewpoint` (n · (viewpoint - p) >= 0).
inline PointCloud estimate_normals(const PointCloud& cloud, int k, const Vec3& viewpoint,
                                   double hash_cell_size = 0.2) {
  if (k < 3) throw DomainError("estimate_normals: k must be >= 3");
  if (cloud.size() < static_cast<std::size_t>(k) + 1)
    throw DomainError("estimate_normals: cloud needs at least k+1 points");
  PointCloud out;
  out.points = cloud.points;
  std::vector<Vec3> normals(cloud.size());
  const SpatialHash hash(out.points, hash_cell_size);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto nbrs = hash.nearest(cloud.points[i], static_cast<std::size_t>(k) + 1);
    Vec3 n = detail::pca_normal(cloud.points, nbrs);
    if (n.dot(viewpoint - cloud.points[i]) < 0.0) n = -n;
    normals[i] = n;
  }
  out.normals = std::move(normals);
  return out;
}

// ---------------------------------------------------------------------------
// PFM depth images

inline std::string encode_pfm(const DepthImage& img) {
  std::string out = "Pf\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n-1.0\n";
  out.reserve(out.size() + img.depth.size() * 4);
  for (int row = img.height - 1; row >= 0; --row)
    for (int col = 0; col < img.width; ++col) io::put_le<float>(out, img.at(col, row));
  return out;
}

inline DepthImage decode_pfm(std::string_view bytes) {
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) throw FormatError("PFM: truncated header");
    return std::string(bytes.substr(start, pos - start));
  };
  const std::string magic = token();
  if (magic != "Pf") throw FormatError("PFM: expected single-channel 'Pf' header, got '" + magic + "'");
  DepthImage img;
  double scale = 0.0;
  try {
    img.width = std::stoi(token());
    img.height = std::stoi(token());
    scale = std::stod(token());
  } catch (const std::logic_error&) {
    throw FormatError("PFM: malformed header");
  }
  if (img.width <= 0 || img.height <= 0) throw FormatError("PFM: bad dimensions");
  if (scale >= 0.0) throw FormatError("PFM: big-endian data is not supported");
  ++pos;  // the single whitespace byte ending the header
  io::ByteReader in(bytes);
  in.seek(pos);
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  if (in.remaining() != n * 4) throw FormatError("PFM: payload size mismatch");
  img.depth.resize(n);
  for (int row = img.height - 1; row >= 0; --row)
    for (int col = 0; col < img.width; ++col) img.at(col, row) = in.get_le<float>();
  return img;
}

inline void write_pfm(const std::filesystem::path& path, const DepthImage& img) {
  io::write_file_atomic(path, encode_pfm(img));
}

inline DepthImage read_pfm(const std::filesystem::path& path) { return decode_pfm(io::read_file(path)); }

// ---------------------------------------------------------------------------
// Binary little-endian PLY, float32 x y z [nx ny nz]

inline std::string encode_ply(const PointCloud& cloud) {
  std::ostringstream hdr;
  hdr << "ply\nformat binary_little_endian 1.0\nelement vertex " << cloud.size()
      << "\nproperty float x\nproperty float y\nproperty float z\n";
  if (cloud.normals) hdr << "property float nx\nproperty float ny\nproperty float nz\n";
  hdr << "end_header\n";
  std::string out = hdr.str();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (int a = 0; a < 3; ++a) io::put_le<float>(out, static_cast<float>(cloud.points[i][a]));
    if (cloud.normals)
      for (int a = 0; a < 3; ++a) io::put_le<float>(out, static_cast<float>((*cloud.normals)[i][a]));
  }
  return out;
}

inline PointCloud decode_ply(std::string_view bytes) {
  io::ByteReader in(bytes);
  if (in.line() != "ply") throw FormatError("PLY: bad magic");
  std::size_t count = 0;
  bool have_count = false;
  std::vector<std::string> props;
  for (;;) {
    const std::string line(in.line());
    if (line == "end_header") break;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "binary_little_endian") throw FormatError("PLY: only binary_little_endian is supported");
    } else if (word == "element") {
      std::string name;
      ls >> name >> count;
      if (name != "vertex") throw FormatError("PLY: unexpected element '" + name + "'");
      have_count = true;
    } else if (word == "property") {
      std::string type, name;
      ls >> type >> name;
      if (type != "float" && type != "float32") throw FormatError("PLY: only float properties are supported");
      props.push_back(name);
    }
  }
  if (!have_count) throw FormatError("PLY: missing vertex element");
  auto find = [&](const std::string& n) -> int {
    auto it = std::find(props.begin(), props.end(), n);
    return it == props.end() ? -1 : static_cast<int>(it - props.begin());
  };
  const int ix = find("x"), iy = find("y"), iz = find("z");
  const int inx = find("nx"), iny = find("ny"), inz = find("nz");
  if (ix < 0 || iy < 0 || iz < 0) throw FormatError("PLY: missing x/y/z");
  const bool with_normals = inx >= 0 && iny >= 0 && inz >= 0;
  if (in.remaining() != count * props.size() * 4) throw FormatError("PLY: payload size mismatch");
  PointCloud cloud;
  cloud.points.reserve(count);
  if (with_normals) cloud.normals.emplace().reserve(count);
  std::vector<float> row(props.size());
  for (std::size_t i = 0; i < count; ++i) {
    for (auto& v : row) v = in.get_le<float>();
    cloud.points.emplace_back(row[ix], row[iy], row[iz]);
    if (with_normals) cloud.normals->emplace_back(row[inx], row[iny], row[inz]);
  }
  return cloud;
}

inline void write_ply(const std::filesystem::path& path, const PointCloud& cloud) {
  io::write_file_atomic(path, encode_ply(cloud));
}

inline PointCloud read_ply(const std::filesystem::path& path) { return decode_ply(io::read_file(path)); }

}  // namespace entrynav
