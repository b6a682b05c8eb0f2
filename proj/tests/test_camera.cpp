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

#include <random>

#include <gtest/gtest.h>

#include "entrynav/camera.hpp"
#include "oracles.hpp"

using namespace entrynav;

namespace {

CameraModel model100(RigidTransform pose = {}) { return {100, 100, 50, 50, 100, 100, pose}; }

RigidTransform random_pose(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Eigen::Quaterniond q = Eigen::Quaterniond(u(rng), u(rng), u(rng), u(rng)).normalized();
  return {q.toRotationMatrix(), Vec3{3 * u(rng), 3 * u(rng), 3 * u(rng)}};
}

}  // namespace

TEST(Camera, ProjectOpticalAxis) {
  const auto p = project(model100(), {0, 0, 1});
  ASSERT_TRUE(p);
  EXPECT_DOUBLE_EQ(p->u, 50.0);
  EXPECT_DOUBLE_EQ(p->v, 50.0);
  EXPECT_DOUBLE_EQ(p->depth, 1.0);
}

TEST(Camera, ProjectBehindIsNone) { EXPECT_FALSE(project(model100(), {0, 0, -1})); }

TEST(Camera, ProjectOffAxisHandEvaluated) {
  // u = 100 * 0.5 / 1 + 50 = 100 lies on the open right edge, so use a wider image.
  const CameraModel wide(100, 100, 50, 50, 101, 100);
  const auto p = project(wide, {0.5, 0, 1});
  ASSERT_TRUE(p);
  EXPECT_DOUBLE_EQ(p->u, 100.0);
  EXPECT_DOUBLE_EQ(p->v, 50.0);
  EXPECT_FALSE(project(model100(), {0.5, 0, 1})) << "u = width is outside [0, width)";
}

TEST(Camera, UnprojectExamples) {
  EXPECT_TRUE(unproject(model100(), 50, 50, 2).isApprox(Vec3(0, 0, 2)));
  const Vec3 p = unproject(model100(), 99.99, 50, 1);
  EXPECT_NEAR(p.x(), 0.4999, 1e-12);
  const CameraModel wide(100, 100, 50, 50, 101, 100);
  EXPECT_TRUE(unproject(wide, 100, 50, 1).isApprox(Vec3(0.5, 0, 1)));
}

TEST(Camera, UnprojectRejectsBadDepth) {
  EXPECT_THROW(unproject(model100(), 10, 10, 0.0), DomainError);
  EXPECT_THROW(unproject(model100(), 10, 10, -1.0), DomainError);
  EXPECT_THROW(unproject(model100(), 100, 10, 1.0), DomainError);
}

TEST(Camera, RoundTripRandomPosesAndPixels) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uu(0.0, 640.0), vv(0.0, 480.0), dd(1e-3, 100.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const CameraModel m(500, 480, 320, 240, 640, 480, random_pose(rng));
    const double u = uu(rng), v = vv(rng), d = dd(rng);
    const auto p = project(m, unproject(m, u, v, d));
    ASSERT_TRUE(p);
    worst = std::max({worst, std::abs(p->u - u), std::abs(p->v - v), std::abs(p->depth - d)});
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(Camera, ModelValidation) {
  EXPECT_THROW(CameraModel(0, 1, 0, 0, 1, 1), DomainError);
  EXPECT_THROW(CameraModel(1, 1, 1, 0, 1, 1), DomainError);
  EXPECT_THROW(CameraModel(1, 1, 0, 0, 0, 1), DomainError);
  Mat3 bad = Mat3::Identity();
  bad(0, 0) = -1.0;  // reflection
  EXPECT_THROW(RigidTransform(bad, Vec3::Zero()), DomainError);
  EXPECT_THROW(RigidTransform(Mat3::Identity() * 1.01, Vec3::Zero()), DomainError);
}

TEST(Camera, ComposeInvert) {
  EXPECT_TRUE(invert(RigidTransform::identity()).approx_equal(RigidTransform::identity(), 0.0));
  std::mt19937_64 rng(11);
  for (int i = 0; i < 100; ++i) {
    const RigidTransform t = random_pose(rng);
    EXPECT_TRUE(compose(t, invert(t)).approx_equal(RigidTransform::identity(), 1e-9));
    EXPECT_TRUE(compose(invert(t), t).approx_equal(RigidTransform::identity(), 1e-9));
  }
  const auto tr = RigidTransform::from_translation({0.3, -1, 2});
  EXPECT_TRUE(compose(tr, tr).approx_equal(RigidTransform::from_translation({0.6, -2, 4}), 1e-15));
}

TEST(Camera, ComposeAppliesRightOperandFirst) {
  std::mt19937_64 rng(12);
  const RigidTransform a = random_pose(rng), b = random_pose(rng);
  const Vec3 p{0.1, 0.2, 0.3};
  EXPECT_LT((compose(a, b).apply(p) - a.apply(b.apply(p))).norm(), 1e-12);
}

TEST(Camera, YawConvention) {
  const auto r = RigidTransform::from_yaw(std::numbers::pi / 2);
  EXPECT_LT((r.apply({0, 0, 1}) - Vec3(1, 0, 0)).norm(), 1e-12);
  EXPECT_LT((r.apply({0, -1, 0}) - Vec3(0, -1, 0)).norm(), 1e-12);
}

TEST(Plucker, OriginCameraHasZeroMoment) {
  const auto map = plucker_embed(CameraModel(40, 40, 8, 6, 16, 12));
  for (const auto& ray : map.rays) EXPECT_EQ(ray.moment.norm(), 0.0);
}

TEST(Plucker, HandCrossProduct) {
  // Principal pixel center sits exactly on the optical axis when cx, cy are half-integers.
  const CameraModel m(40, 40, 8.5, 6.5, 16, 12, RigidTransform::from_translation({1, 0, 0}));
  const auto& ray = plucker_embed(m).at(8, 6);
  EXPECT_LT((ray.direction - Vec3(0, 0, 1)).norm(), 1e-12);
  EXPECT_LT((ray.moment - Vec3(0, -1, 0)).norm(), 1e-12);
}

TEST(Plucker, UnitDirectionAndOrthogonalMomentOnRandomPoses) {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 20; ++i) {
    const CameraModel m(60, 55, 16, 12, 32, 24, random_pose(rng));
    for (const auto& ray : plucker_embed(m).rays) {
      EXPECT_NEAR(ray.direction.norm(), 1.0, 1e-9);
      EXPECT_NEAR(ray.direction.dot(ray.moment), 0.0, 1e-9);
    }
  }
}

TEST(Plucker, MomentIndependentOfPointAlongRay) {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> s(-50.0, 50.0);
  const CameraModel m(60, 55, 16, 12, 32, 24, random_pose(rng));
  const auto map = plucker_embed(m);
  for (int row = 0; row < m.height(); row += 5)
    for (int col = 0; col < m.width(); col += 5) {
      const auto& ray = map.at(col, row);
      const Vec3 p = m.center() + s(rng) * ray.direction;
      EXPECT_LT((plucker_moment(p, ray.direction) - ray.moment).norm(), 1e-9);
    }
}

TEST(Plucker, DirectionMatchesUnprojectedPixelCenter) {
  std::mt19937_64 rng(15);
  const CameraModel m(60, 55, 16, 12, 32, 24, random_pose(rng));
  const auto map = plucker_embed(m);
  const Vec3 through = unproject(m, 3.5, 7.5, 2.0);
  EXPECT_LT((map.at(3, 7).direction - (through - m.center()).normalized()).norm(), 1e-12);
}

TEST(CameraIO, JsonRoundTrip) {
  std::mt19937_64 rng(16);
  const CameraModel m(500, 480, 320, 240, 640, 480, random_pose(rng));
  const CameraModel back = camera_from_json(camera_to_json(m));
  EXPECT_EQ(back.fx(), m.fx());
  EXPECT_EQ(back.width(), m.width());
  EXPECT_TRUE(back.pose().approx_equal(m.pose(), 0.0));
  EXPECT_THROW(camera_from_json(nlohmann::json{{"fx", 1}}), FormatError);
}

TEST(CameraIO, PluckerBinaryRoundTrip) {
  const CameraModel m(40, 40, 4, 3, 8, 6, RigidTransform::from_yaw(0.3, {1, -1.4, 2}));
  const auto map = plucker_embed(m);
  const std::string bytes = encode_plucker(map);
  ASSERT_EQ(bytes.size(), 12u + 8 * 6 * 24);
  EXPECT_EQ(bytes.substr(0, 4), "PLK1");
  const auto back = decode_plucker(bytes);
  ASSERT_EQ(back.rays.size(), map.rays.size());
  for (std::size_t i = 0; i < map.rays.size(); ++i) {
    EXPECT_NEAR((back.rays[i].direction - map.rays[i].direction).norm(), 0.0, 1e-6);
    EXPECT_NEAR((back.rays[i].moment - map.rays[i].moment).norm(), 0.0, 1e-6);
  }
  EXPECT_THROW(decode_plucker("PLK2xxxxxxxx"), FormatError);
  EXPECT_THROW(decode_plucker(bytes.substr(0, bytes.size() - 1)), FormatError);
}
