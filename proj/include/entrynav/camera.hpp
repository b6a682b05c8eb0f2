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

// Pinhole camera model, rigid pose algebra and per-pixel Plücker rays.
//
// Camera frame: x right, y down, z forward. The world frame uses the same
// handedness with "up" along -y, so the canonical level camera has identity
// rotation. Pixel (col, row) covers [col, col+1) x [row, row+1); its center
// sits at (col + 0.5, row + 0.5).

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "entrynav/error.hpp"
#include "entrynav/io.hpp"

namespace entrynav {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// World "up" for the y-down convention.
inline const Vec3 kWorldUp{0.0, -1.0, 0.0};

inline bool is_rotation(const Mat3& r, double tol = 1e-9) {
  if (!r.allFinite()) return false;
  if (((r.transpose() * r) - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(r.determinant() - 1.0) <= tol;
}

/// Rigid transform mapping points from a source frame into a target frame:
/// p_target = rotation * p_source + translation.
class RigidTransform {
 public:
  RigidTransform() = default;

  RigidTransform(const Mat3& rotation, const Vec3& translation)
      : rotation_(rotation), translation_(translation) {
    if (!is_rotation(rotation_)) throw DomainError("RigidTransform: rotation is not orthonormal with det +1");
    if (!translation_.allFinite()) throw DomainError("RigidTransform: non-finite translation");
  }

  static RigidTransform identity() { return {}; }
  static RigidTransform from_translation(const Vec3& t) { return {Mat3::Identity(), t}; }

  /// Rotation about the world up axis; yaw 0 faces +Z and positive yaw turns toward +X.
  static RigidTransform from_yaw(double yaw, const Vec3& t = Vec3::Zero()) {
    const double c = std::cos(yaw), s = std::sin(yaw);
    Mat3 r;
    r << c, 0.0, s,
         0.0, 1.0, 0.0,
         -s, 0.0, c;
    return {r, t};
  }

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }
  Vec3 apply_inverse(const Vec3& p) const { return rotation_.transpose() * (p - translation_); }

  bool approx_equal(const RigidTransform& o, double tol) const {
    return (rotation_ - o.rotation_).cwiseAbs().maxCoeff() <= tol &&
           (translation_ - o.translation_).cwiseAbs().maxCoeff() <= tol;
  }

 private:
  Mat3 rotation_ = Mat3::Identity();
  Vec3 translation_ = Vec3::Zero();
};

/// a ∘ b: apply b first, then a.
inline RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  return {a.rotation() * b.rotation(), a.rotation() * b.translation() + a.translation()};
}

inline RigidTransform invert(const RigidTransform& a) {
  const Mat3 rt = a.rotation().transpose();
  return {rt, -(rt * a.translation())};
}

/// Pinhole intrinsics plus the camera-to-world pose. Immutable once built.
class CameraModel {
 public:
  CameraModel(double fx, double fy, double cx, double cy, int width, int height,
              RigidTransform pose = RigidTransform::identity())
      : fx_(fx), fy_(fy), cx_(cx), cy_(cy), width_(width), height_(height), pose_(std::move(pose)) {
    if (!(fx > 0.0) || !(fy > 0.0)) throw DomainError("CameraModel: focal lengths must be positive");
    if (width <= 0 || height <= 0) throw DomainError("CameraModel: image size must be positive");
    if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height))
      throw DomainError("CameraModel: principal point outside the image");
  }

  double fx() const { return fx_; }
  double fy() const { return fy_; }
  double cx() const { return cx_; }
  double cy() const { return cy_; }
  int width() const { return width_; }
  int height() const { return height_; }
  const RigidTransform& pose() const { return pose_; }
  Vec3 center() const { return pose_.translation(); }

  CameraModel with_pose(RigidTransform pose) const {
    return {fx_, fy_, cx_, cy_, width_, height_, std::move(pose)};
  }

  bool in_frame(double u, double v) const { return u >= 0.0 && u < width_ && v >= 0.0 && v < height_; }

 private:
  double fx_, fy_, cx_, cy_;
  int width_, height_;
  RigidTransform pose_;
};

struct Projection {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;  // z in the camera frame, meters
};

/// Projects a world point; none when behind the camera or outside the image.
inline std::optional<Projection> project(const CameraModel& model, const Vec3& p_world) {
  const Vec3 pc = model.pose().apply_inverse(p_world);
  if (!(pc.z() > 0.0)) return std::nullopt;
  const double u = model.fx() * pc.x() / pc.z() + model.cx();
  const double v = model.fy() * pc.y() / pc.z() + model.cy();
  if (!model.in_frame(u, v)) return std::nullopt;
  return Projection{u, v, pc.z()};
}

/// Inverse of project for z-depth `depth` at pixel coordinate (u, v).
inline Vec3 unproject(const CameraModel& model, double u, double v, double depth) {
  if (!(depth > 0.0) || !std::isfinite(depth)) throw DomainError("unproject: depth must be positive and finite");
  if (!model.in_frame(u, v)) throw DomainError("unproject: pixel outside the image");
  const Vec3 pc{(u - model.cx()) * depth / model.fx(), (v - model.cy()) * depth / model.fy(), depth};
  return model.pose().apply(pc);
}

/// Unit world-frame direction of the ray through the center of pixel (col, row).
inline Vec3 pixel_ray(const CameraModel& model, int col, int row) {
  const Vec3 dc{(col + 0.5 - model.cx()) / model.fx(), (row + 0.5 - model.cy()) / model.fy(), 1.0};
  return (model.pose().rotation() * dc).normalized();
}

struct PluckerRay {
  Vec3 direction;  // unit, world frame
  Vec3 moment;     // origin x direction, meters
};

/// Per-pixel 6-D ray embedding of one camera pose, row-major.
struct PluckerMap {
  int width = 0;
  int height = 0;
  std::vector<PluckerRay> rays;

  const PluckerRay& at(int col, int row) const { return rays[static_cast<std::size_t>(row) * width + col]; }
};

inline Vec3 plucker_moment(const Vec3& point_on_ray, const Vec3& direction) {
  return point_on_ray.cross(direction);
}

inline PluckerMap plucker_embed(const CameraModel& model) {
  PluckerMap map;
  map.width = model.width();
  map.height = model.height();
  map.rays.reserve(static_cast<std::size_t>(map.width) * map.height);
  const Vec3 c = model.center();
  for (int row = 0; row < map.height; ++row) {
    for (int col = 0; col < map.width; ++col) {
      const Vec3 d = pixel_ray(model, col, row);
      map.rays.push_back({d, plucker_moment(c, d)});
    }
  }
  return map;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json camera_to_json(const CameraModel& m) {
  nlohmann::json j;
  j["fx"] = m.fx();
  j["fy"] = m.fy();
  j["cx"] = m.cx();
  j["cy"] = m.cy();
  j["width"] = m.width();
  j["height"] = m.height();
  std::vector<double> r;
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) r.push_back(m.pose().rotation()(i, k));
  j["R"] = r;
  const Vec3& t = m.pose().translation();
  j["t"] = std::vector<double>{t.x(), t.y(), t.z()};
  return j;
}

inline CameraModel camera_from_json(const nlohmann::json& j) {
  try {
    const auto r = j.at("R").get<std::vector<double>>();
    const auto t = j.at("t").get<std::vector<double>>();
    if (r.size() != 9 || t.size() != 3) throw FormatError("camera JSON: R needs 9 values and t needs 3");
    Mat3 rot;
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 3; ++k) rot(i, k) = r[static_cast<std::size_t>(i * 3 + k)];
    return CameraModel(j.at("fx").get<double>(), j.at("fy").get<double>(), j.at("cx").get<double>(),
                       j.at("cy").get<double>(), j.at("width").get<int>(), j.at("height").get<int>(),
                       RigidTransform(rot, Vec3{t[0], t[1], t[2]}));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("camera JSON: ") + e.what());
  }
}

inline CameraModel read_camera(const std::filesystem::path& path) {
  try {
    return camera_from_json(nlohmann::json::parse(io::read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline void write_camera(const std::filesystem::path& path, const CameraModel& m) {
  io::write_file_atomic(path, camera_to_json(m).dump(2) + "\n");
}

inline std::string encode_plucker(const PluckerMap& map) {
  std::string out = "PLK1";
  out.reserve(12 + map.rays.size() * 24);
  io::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(map.width));
  io::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(map.height));
  for (const auto& ray : map.rays) {
    for (int i = 0; i < 3; ++i) io::put_le<float>(out, static_cast<float>(ray.direction[i]));
    for (int i = 0; i < 3; ++i) io::put_le<float>(out, static_cast<float>(ray.moment[i]));
  }
  return out;
}

/// Decodes a PLK1 blob. Values come back at float32 precision.
inline PluckerMap decode_plucker(std::string_view bytes) {
  io::ByteReader in(bytes);
  if (in.take(4) != "PLK1") throw FormatError("Plücker map: bad magic");
  PluckerMap map;
  map.width = static_cast<int>(in.get_le<std::uint32_t>());
  map.height = static_cast<int>(in.get_le<std::uint32_t>());
  const std::size_t n = static_cast<std::size_t>(map.width) * map.height;
  if (in.remaining() != n * 24) throw FormatError("Plücker map: payload size mismatch");
  map.rays.resize(n);
  for (auto& ray : map.rays) {
    for (int i = 0; i < 3; ++i) ray.direction[i] = in.get_le<float>();
    for (int i = 0; i < 3; ++i) ray.moment[i] = in.get_le<float>();
  }
  return map;
}

inline void write_plucker(const std::filesystem::path& path, const PluckerMap& map) {
  io::write_file_atomic(path, encode_plucker(map));
}

inline PluckerMap read_plucker(const std::filesystem::path& path) { return decode_plucker(io::read_file(path)); }

}  // namespace entrynav
