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

// Virtual camera poses along a trajectory and z-buffered point splatting
// into each of them.

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "entrynav/camera.hpp"
#include "entrynav/error.hpp"
#include "entrynav/io.hpp"
#include "entrynav/pointcloud.hpp"
#include "entrynav/trajectory.hpp"

namespace entrynav {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<Rgb> pixels;  // row-major
};

inline constexpr double kDefaultCameraHeight = 1.4;

/// Camera-to-world transform for every trajectory pose. The camera sits
/// `camera_height` above the pose (towards -y) and faces along its yaw.
inline std::vector<RigidTransform> virtual_poses(const Trajectory& traj, double camera_height = kDefaultCameraHeight,
                                                 const RigidTransform& world_from_traj = RigidTransform::identity()) {
  if (!(camera_height >= 0.0) || !std::isfinite(camera_height))
    throw DomainError("virtual_poses: camera height must be finite and >= 0");
  std::vector<RigidTransform> out;
  out.reserve(traj.poses.size());
  for (const Pose& p : traj.poses)
    out.push_back(compose(world_from_traj, RigidTransform::from_yaw(p.yaw, Vec3{p.x, p.y - camera_height, p.z})));
  return out;
}

struct ConstraintFrame {
  int width = 0;
  int height = 0;
  std::vector<double> depth;  // row-major z-depth, 0 = no point
  std::optional<std::vector<Rgb>> color;
  int pose_index = 0;

  double at(int col, int row) const { return depth[static_cast<std::size_t>(row) * width + col]; }
};

struct ReprojectOptions {
  int splat_radius = 0;  // 0 = one pixel per point
  double tie_epsilon = 1e-9;
};

/// Renders one frame: each point lands on the pixel containing its
/// projection and the nearest depth wins. Earlier points win depth ties.
inline ConstraintFrame render_frame(const PointCloud& cloud, const CameraModel& model, std::span<const Rgb> colors,
                                    const ReprojectOptions& opt = {}, int pose_index = 0) {
  ConstraintFrame f;
  f.width = model.width();
  f.height = model.height();
  f.pose_index = pose_index;
  const std::size_t n = static_cast<std::size_t>(f.width) * f.height;
  f.depth.assign(n, 0.0);
  if (!colors.empty()) f.color.emplace(n, Rgb{});
  const int r = opt.splat_radius;
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const auto proj = project(model, cloud.points[i]);
    if (!proj) continue;
    const int col0 = static_cast<int>(std::floor(proj->u)), row0 = static_cast<int>(std::floor(proj->v));
    for (int row = std::max(0, row0 - r); row <= std::min(f.height - 1, row0 + r); ++row) {
      for (int col = std::max(0, col0 - r); col <= std::min(f.width - 1, col0 + r); ++col) {
        const std::size_t idx = static_cast<std::size_t>(row) * f.width + col;
        double& d = f.depth[idx];
        if (d == 0.0 || proj->depth < d - opt.tie_epsilon) {
          d = proj->depth;
          if (f.color) (*f.color)[idx] = colors[i];
        }
      }
    }
  }
  return f;
}

/// One z-buffered frame per camera pose, all sharing the model's intrinsics.
inline std::vector<ConstraintFrame> reproject_cloud(const PointCloud& cloud, const CameraModel& model,
                                                    std::span<const RigidTransform> poses,
                                                    std::span<const Rgb> colors = {},
                                                    const ReprojectOptions& opt = {}) {
  if (cloud.empty()) throw DomainError("reproject_cloud: empty point cloud");
  if (!colors.empty() && colors.size() != cloud.size())
    throw DomainError("reproject_cloud: color count differs from point count");
  if (opt.splat_radius < 0) throw DomainError("reproject_cloud: splat radius must be >= 0");
  std::vector<ConstraintFrame> frames;
  frames.reserve(poses.size());
  for (std::size_t i = 0; i < poses.size(); ++i)
    frames.push_back(render_frame(cloud, model.with_pose(poses[i]), colors, opt, static_cast<int>(i)));
  return frames;
}

// ---------------------------------------------------------------------------
// PPM P6 color images and frame sequences

inline std::string encode_ppm(const RgbImage& img) {
  std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.reserve(out.size() + img.pixels.size() * 3);
  for (const Rgb& p : img.pixels) {
    out.push_back(static_cast<char>(p.r));
    out.push_back(static_cast<char>(p.g));
    out.push_back(static_cast<char>(p.b));
  }
  return out;
}

inline RgbImage decode_ppm(std::string_view bytes) {
  io::ByteReader in(bytes);
  if (in.line() != "P6") throw FormatError("PPM: expected P6");
  RgbImage img;
  const std::string dims(in.line());
  if (std::sscanf(dims.c_str(), "%d %d", &img.width, &img.height) != 2 || img.width <= 0 || img.height <= 0)
    throw FormatError("PPM: bad dimensions");
  if (in.line() != "255") throw FormatError("PPM: only maxval 255 is supported");
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  if (in.remaining() != n * 3) throw FormatError("PPM: payload size mismatch");
  img.pixels.resize(n);
  for (auto& p : img.pixels) {
    const auto px = in.take(3);
    p = {static_cast<std::uint8_t>(px[0]), static_cast<std::uint8_t>(px[1]), static_cast<std::uint8_t>(px[2])};
  }
  return img;
}

inline RgbImage read_ppm(const std::filesystem::path& path) { return decode_ppm(io::read_file(path)); }

/// Colors for the points cloud_from_depth produces from the same pixels.
inline std::vector<Rgb> colors_from_image(const DepthImage& depth, const RgbImage& image, int stride = 1) {
  if (image.width != depth.width || image.height != depth.height)
    throw DomainError("colors_from_image: image size does not match the depth map");
  std::vector<Rgb> out;
  for (int row = 0; row < depth.height; row += stride)
    for (int col = 0; col < depth.width; col += stride)
      if (depth.at(col, row) > 0.0f) out.push_back(image.pixels[static_cast<std::size_t>(row) * image.width + col]);
  return out;
}

inline std::string frame_stem(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%04d", index);
  return buf;
}

/// Writes frame_NNNN.pfm (+ .ppm when colored) and manifest.json into `dir`.
inline void write_constraint_frames(const std::filesystem::path& dir, const std::vector<ConstraintFrame>& frames,
                                    const CameraModel& model, std::span<const RigidTransform> poses) {
  nlohmann::json manifest;
  manifest["camera"] = camera_to_json(model);
  manifest["frames"] = nlohmann::json::array();
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const ConstraintFrame& f = frames[i];
    const std::string stem = frame_stem(f.pose_index);
    DepthImage img(f.width, f.height);
    for (std::size_t p = 0; p < f.depth.size(); ++p) img.depth[p] = static_cast<float>(f.depth[p]);
    io::write_file_atomic(dir / (stem + ".pfm"), encode_pfm(img));
    nlohmann::json entry{{"pose_index", f.pose_index}, {"depth", stem + ".pfm"}};
    if (f.color) {
      io::write_file_atomic(dir / (stem + ".ppm"), encode_ppm({f.width, f.height, *f.color}));
      entry["color"] = stem + ".ppm";
    }
    if (i < poses.size()) {
      const nlohmann::json cam = camera_to_json(model.with_pose(poses[i]));
      entry["R"] = cam["R"];
      entry["t"] = cam["t"];
    }
    manifest["frames"].push_back(entry);
  }
  io::write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace entrynav
