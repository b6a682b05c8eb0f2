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

// Reference scalar objectives and alignment negative sampling.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "entrynav/error.hpp"
#include "entrynav/io.hpp"
#include "entrynav/random.hpp"

namespace entrynav {

/// Normalized center/size box relative to the image.
struct BBox {
  double cx = 0.5, cy = 0.5, w = 1.0, h = 1.0;

  double x0() const { return cx - 0.5 * w; }
  double x1() const { return cx + 0.5 * w; }
  double y0() const { return cy - 0.5 * h; }
  double y1() const { return cy + 0.5 * h; }

  void validate() const {
    if (!(cx >= 0.0 && cx <= 1.0 && cy >= 0.0 && cy <= 1.0)) throw DomainError("BBox: center outside [0, 1]");
    if (!(w > 0.0 && w <= 1.0 && h > 0.0 && h <= 1.0)) throw DomainError("BBox: size outside (0, 1]");
  }

  /// Shrinks the box to its intersection with the unit square.
  BBox clamped() const {
    const double a = std::clamp(x0(), 0.0, 1.0), b = std::clamp(x1(), 0.0, 1.0);
    const double c = std::clamp(y0(), 0.0, 1.0), d = std::clamp(y1(), 0.0, 1.0);
    if (!(b > a && d > c)) throw DomainError("BBox: no overlap with the unit square");
    return {0.5 * (a + b), 0.5 * (c + d), b - a, d - c};
  }

  bool operator==(const BBox&) const = default;
};

inline double bbox_l1(const BBox& p, const BBox& g) {
  return (std::abs(p.cx - g.cx) + std::abs(p.cy - g.cy) + std::abs(p.w - g.w) + std::abs(p.h - g.h)) / 4.0;
}

inline double iou(const BBox& a, const BBox& b) {
  // Areas come from the same corner arithmetic as the intersection so that
  // identical boxes give exactly 1.
  const double area_a = (a.x1() - a.x0()) * (a.y1() - a.y0());
  const double area_b = (b.x1() - b.x0()) * (b.y1() - b.y0());
  const double iw = std::min(a.x1(), b.x1()) - std::max(a.x0(), b.x0());
  const double ih = std::min(a.y1(), b.y1()) - std::max(a.y0(), b.y0());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = area_a + area_b - inter;
  return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

inline double loss_bbox(const BBox& pred, const BBox& gt) { return bbox_l1(pred, gt) + (1.0 - iou(pred, gt)); }

/// Mean absolute element-wise difference of two waypoint matrices (one row per waypoint).
inline double loss_wpts(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt) {
  if (pred.rows() != gt.rows() || pred.cols() != gt.cols()) throw DomainError("loss_wpts: shape mismatch");
  if (pred.size() == 0) throw DomainError("loss_wpts: empty input");
  return (pred - gt).cwiseAbs().sum() / static_cast<double>(pred.size());
}

inline double loss_recon(std::span<const double> pred, std::span<const double> gt) {
  if (pred.size() != gt.size()) throw DomainError("loss_recon: length mismatch");
  if (pred.empty()) throw DomainError("loss_recon: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - gt[i]);
  return s / static_cast<double>(pred.size());
}

inline constexpr double kBceClamp = 1e-7;

inline double loss_flag(double p, int y) {
  if (y != 0 && y != 1) throw DomainError("loss_flag: label must be 0 or 1");
  p = std::clamp(p, kBceClamp, 1.0 - kBceClamp);
  return y == 1 ? -std::log(p) : -std::log1p(-p);
}

struct LossWeights {
  double wpts = 1.0, recon = 1.0, flag = 1.0;
};

/// Stage 1 returns the "bbox" part; stage 2 the weighted sum of "wpts",
/// "recon" and "flag". Other parts are ignored.
inline double total_loss(int stage, const std::map<std::string, double>& parts, const LossWeights& w = {}) {
  auto need = [&](const char* key) {
    const auto it = parts.find(key);
    if (it == parts.end()) throw DomainError(std::string("total_loss: missing part '") + key + "'");
    return it->second;
  };
  if (stage == 1) return need("bbox");
  if (stage == 2) return w.wpts * need("wpts") + w.recon * need("recon") + w.flag * need("flag");
  throw DomainError("total_loss: stage must be 1 or 2");
}

// ---------------------------------------------------------------------------
// Alignment samples

struct AlignmentSample {
  std::string instruction_id;
  std::string observation_id;
  int label = 1;
  bool operator==(const AlignmentSample&) const = default;
};

/// Uniform random derangement of 0..n-1 (rejection over Fisher-Yates shuffles).
inline std::vector<std::size_t> random_derangement(std::size_t n, std::mt19937_64& rng) {
  if (n < 2) throw DomainError("random_derangement: needs n >= 2");
  std::vector<std::size_t> perm(n);
  for (;;) {
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[uniform_below(rng, i + 1)]);
    bool fixed = false;
    for (std::size_t i = 0; i < n && !fixed; ++i) fixed = perm[i] == i;
    if (!fixed) return perm;
  }
}

/// The positives followed by one negative per positive: the i-th
/// instruction paired with the observation of a deranged partner.
inline std::vector<AlignmentSample> swap_negatives(const std::vector<AlignmentSample>& positives,
                                                   std::uint64_t seed) {
  if (positives.size() < 2) throw DomainError("swap_negatives: needs at least 2 samples");
  std::mt19937_64 rng(seed);
  const auto perm = random_derangement(positives.size(), rng);
  std::vector<AlignmentSample> out;
  out.reserve(2 * positives.size());
  for (const auto& s : positives) out.push_back({s.instruction_id, s.observation_id, 1});
  for (std::size_t i = 0; i < positives.size(); ++i)
    out.push_back({positives[i].instruction_id, positives[perm[i]].observation_id, 0});
  return out;
}

inline std::string encode_alignment(const std::vector<AlignmentSample>& samples) {
  std::string out;
  for (const auto& s : samples) {
    nlohmann::json j;
    j["instruction_id"] = s.instruction_id;
    j["observation_id"] = s.observation_id;
    j["label"] = s.label;
    out += j.dump() + "\n";
  }
  return out;
}

inline std::vector<AlignmentSample> decode_alignment(std::string_view text) {
  std::vector<AlignmentSample> out;
  std::istringstream in{std::string(text)};
  std::string line;
  try {
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line);
      AlignmentSample s{j.at("instruction_id").get<std::string>(), j.at("observation_id").get<std::string>(),
                        j.at("label").get<int>()};
      if (s.label != 0 && s.label != 1) throw FormatError("alignment JSONL: label must be 0 or 1");
      out.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("alignment JSONL: ") + e.what());
  }
  return out;
}

}  // namespace entrynav
