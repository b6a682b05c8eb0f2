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

#include <numbers>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "entrynav/objectives.hpp"
#include "entrynav/random.hpp"

using namespace entrynav;

namespace {

std::vector<AlignmentSample> positives(int n) {
  std::vector<AlignmentSample> out;
  for (int i = 0; i < n; ++i) out.push_back({"ins" + std::to_string(i), "obs" + std::to_string(i), 1});
  return out;
}

}  // namespace

TEST(LossWpts, ZeroOneAndOracle) {
  Eigen::MatrixXd a(5, 2);
  a << 0, 0.1, 0, 0.2, 0.05, 0.3, 0.1, 0.4, 0.1, 0.5;
  EXPECT_EQ(loss_wpts(a, a), 0.0);
  EXPECT_DOUBLE_EQ(loss_wpts(a.array() + 1.0, a), 1.0);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  Eigen::MatrixXd p(5, 2), g(5, 2);
  double sum = 0.0;
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 2; ++c) {
      p(r, c) = n(rng);
      g(r, c) = n(rng);
      sum += std::abs(p(r, c) - g(r, c));
    }
  EXPECT_NEAR(loss_wpts(p, g), sum / 10.0, 1e-9);
  EXPECT_THROW(loss_wpts(Eigen::MatrixXd(4, 2), a), DomainError);
}

TEST(LossRecon, ZeroOneAndOracle) {
  const std::vector<double> a{1, 2, 3, 4.5};
  std::vector<double> b = a;
  EXPECT_EQ(loss_recon(a, a), 0.0);
  for (auto& x : b) x += 1.0;
  EXPECT_DOUBLE_EQ(loss_recon(b, a), 1.0);
  const std::vector<double> c{0, 0, 0, 0};
  EXPECT_NEAR(loss_recon(a, c), (1 + 2 + 3 + 4.5) / 4, 1e-12);
  EXPECT_THROW(loss_recon(a, std::vector<double>{1}), DomainError);
  EXPECT_THROW(loss_recon(std::vector<double>{}, std::vector<double>{}), DomainError);
}

TEST(LossFlag, AnalyticValues) {
  EXPECT_NEAR(loss_flag(0.5, 0), std::numbers::ln2, 1e-12);
  EXPECT_NEAR(loss_flag(0.5, 1), std::numbers::ln2, 1e-12);
  EXPECT_NEAR(loss_flag(0.9, 1), 0.105360515657826, 1e-12);
  EXPECT_LT(loss_flag(1.0, 1), 1e-6);
  EXPECT_LT(loss_flag(0.0, 0), 1e-6);
  EXPECT_TRUE(std::isfinite(loss_flag(0.0, 1)));
  EXPECT_THROW(loss_flag(0.5, 2), DomainError);
}

TEST(BBoxLoss, Examples) {
  const BBox a{0.5, 0.5, 0.5, 0.5}, b{0.5, 0.5, 0.25, 0.25};
  EXPECT_EQ(iou(a, a), 1.0);
  EXPECT_EQ(loss_bbox(a, a), 0.0);
  EXPECT_DOUBLE_EQ(iou(a, b), 0.25);
  EXPECT_EQ(iou(BBox{0.2, 0.2, 0.2, 0.2}, BBox{0.8, 0.8, 0.2, 0.2}), 0.0);
  EXPECT_DOUBLE_EQ(loss_bbox(a, b), (0.25 + 0.25) / 4 + 0.75);
}

TEST(BBoxLoss, IouSymmetricAndBounded) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.05, 0.95), s(0.01, 0.5);
  for (int i = 0; i < 500; ++i) {
    const BBox a{u(rng), u(rng), s(rng), s(rng)}, b{u(rng), u(rng), s(rng), s(rng)};
    EXPECT_EQ(iou(a, b), iou(b, a));
    EXPECT_GE(iou(a, b), 0.0);
    EXPECT_LE(iou(a, b), 1.0);
    EXPECT_GE(loss_bbox(a, b), 0.0);
  }
}

TEST(BBox, ValidateAndClamp) {
  EXPECT_THROW((BBox{1.2, 0.5, 0.1, 0.1}).validate(), DomainError);
  EXPECT_THROW((BBox{0.5, 0.5, 0.0, 0.1}).validate(), DomainError);
  const BBox c = BBox{0.95, 0.5, 0.2, 0.2}.clamped();
  EXPECT_NEAR(c.x1(), 1.0, 1e-12);
  EXPECT_NEAR(c.w, 0.15, 1e-12);
}

TEST(TotalLoss, StageSwitch) {
  EXPECT_DOUBLE_EQ(total_loss(2, {{"wpts", 0.2}, {"recon", 0.3}, {"flag", 0.5}}), 1.0);
  EXPECT_EQ(total_loss(1, {{"bbox", 0.0}}), 0.0);
  EXPECT_DOUBLE_EQ(total_loss(2, {{"wpts", 0.2}, {"recon", 0.3}, {"flag", 0.5}, {"bbox", 9.0}}), 1.0);
  EXPECT_EQ(total_loss(1, {{"bbox", 0.4}, {"wpts", 9.0}}), 0.4);
  EXPECT_DOUBLE_EQ(total_loss(2, {{"wpts", 1}, {"recon", 1}, {"flag", 1}}, {2.0, 0.5, 0.25}), 2.75);
  EXPECT_THROW(total_loss(2, {{"wpts", 0.2}, {"recon", 0.3}}), DomainError);
  EXPECT_THROW(total_loss(1, {{"wpts", 0.2}}), DomainError);
  EXPECT_THROW(total_loss(3, {{"bbox", 0.2}}), DomainError);
}

TEST(SwapNegatives, TwoSamplesSwap) {
  const auto out = swap_negatives(positives(2), 123);
  ASSERT_EQ(out.size(), 4u);
  EXPECT_EQ(out[2], (AlignmentSample{"ins0", "obs1", 0}));
  EXPECT_EQ(out[3], (AlignmentSample{"ins1", "obs0", 0}));
}

TEST(SwapNegatives, FixedPointFreeBalancedDeterministic) {
  for (int n : {2, 3, 5, 17, 100}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto p = positives(n);
      const auto out = swap_negatives(p, seed);
      ASSERT_EQ(out.size(), static_cast<std::size_t>(2 * n));
      int pos = 0, neg = 0;
      std::set<std::string> obs_used;
      for (std::size_t i = 0; i < out.size(); ++i) {
        if (out[i].label == 1) {
          ++pos;
          EXPECT_EQ(out[i].instruction_id.substr(3), out[i].observation_id.substr(3));
        } else {
          ++neg;
          EXPECT_NE(out[i].instruction_id.substr(3), out[i].observation_id.substr(3));
          obs_used.insert(out[i].observation_id);
        }
      }
      EXPECT_EQ(pos, neg);
      EXPECT_EQ(obs_used.size(), static_cast<std::size_t>(n)) << "negatives form a permutation";
      EXPECT_EQ(swap_negatives(p, seed), out);
    }
  }
  EXPECT_THROW(swap_negatives(positives(1), 0), DomainError);
}

TEST(SwapNegatives, SeedsDiffer) {
  const auto p = positives(30);
  EXPECT_NE(swap_negatives(p, 1), swap_negatives(p, 2));
}

TEST(Alignment, JsonlRoundTrip) {
  const auto out = swap_negatives(positives(4), 9);
  EXPECT_EQ(decode_alignment(encode_alignment(out)), out);
  EXPECT_THROW(decode_alignment(R"({"instruction_id":"a","observation_id":"b","label":3})"), FormatError);
}

TEST(Random, KnownVectorsAndDerivation) {
  // splitmix64 reference output for state 0 (first draw of the published generator).
  EXPECT_EQ(splitmix64(0), 0xE220A8397B1DCDAFull);
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cull);
  EXPECT_NE(derive_seed(1, "ep0000"), derive_seed(1, "ep0001"));
  EXPECT_NE(derive_seed(1, "ep0000"), derive_seed(2, "ep0000"));
  EXPECT_EQ(derive_seed(5, "x"), derive_seed(5, "x"));
}

TEST(Random, UniformBelowAndNormalMoments) {
  std::mt19937_64 rng(3);
  std::vector<int> hist(7, 0);
  for (int i = 0; i < 70000; ++i) ++hist[uniform_below(rng, 7)];
  for (int h : hist) EXPECT_NEAR(h, 10000, 500);
  double s = 0, s2 = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double x = standard_normal(rng);
    s += x;
    s2 += x * x;
  }
  EXPECT_NEAR(s / n, 0.0, 0.02);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
  for (int i = 0; i < 1000; ++i) {
    const double u = uniform_unit(rng);
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}
