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

// Receding-horizon waypoint simulator, scripted policies and the success
// rate / trajectory deviation metrics.
//
// Episode coordinates live in the normalized trajectory frame: the agent
// starts at (0, 0) facing +Z. `grid_origin` places that frame inside the
// occupancy grid's agent frame for collision checks.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "entrynav/error.hpp"
#include "entrynav/io.hpp"
#include "entrynav/occupancy.hpp"
#include "entrynav/random.hpp"
#include "entrynav/trajectory.hpp"

namespace entrynav {

inline constexpr int kHistoryLength = 10;
inline constexpr int kActionLength = 5;
inline constexpr int kCropSize = 11;

struct Episode {
  std::string id;
  OccupancyGrid grid;
  std::string instruction;
  Vec2 target_entrance = Vec2::Zero();  // episode frame
  Trajectory gt_trajectory;             // episode frame
  PlanarPose grid_origin;               // episode frame inside the grid frame
  int max_steps = 100;

  void validate() const {
    if (gt_trajectory.poses.size() < 2) throw DomainError("Episode: ground-truth trajectory needs >= 2 poses");
    if ((gt_trajectory.poses.back().xz() - target_entrance).norm() > 0.05)
      throw DomainError("Episode: ground-truth endpoint is not at the target entrance");
    if (max_steps < 1) throw DomainError("Episode: max_steps must be >= 1");
  }
};

/// Target entrance of a grid expressed in the episode frame.
inline Vec2 target_in_episode(const OccupancyGrid& grid, const PlanarPose& grid_origin) {
  return grid_origin.apply_inverse(grid.geometry().center_of(grid.target_cell()));
}

struct AgentState {
  double x = 0.0, z = 0.0, yaw = 0.0;
  Vec2 xz() const { return {x, z}; }
  PlanarPose frame() const { return {x, z, yaw}; }
  bool operator==(const AgentState&) const = default;
};

struct Observation {
  AgentState pose;
  std::array<CellState, kCropSize * kCropSize> crop{};  // row-major, centered on the agent cell
};

struct PolicyInput {
  std::span<const Observation> history;  // oldest first, exactly kHistoryLength
  const std::string* instruction = nullptr;
  int step = 0;
};

/// Policy contract: kActionLength waypoints (x, z) in the agent's current frame.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual void reset(std::uint64_t seed) = 0;
  virtual std::vector<Vec2> act(const PolicyInput& in) = 0;
};

enum class Outcome { Reached, MaxSteps, Collision, Stopped };

inline std::string outcome_name(Outcome o) {
  switch (o) {
    case Outcome::Reached: return "reached";
    case Outcome::MaxSteps: return "max_steps";
    case Outcome::Collision: return "collision";
    default: return "stopped";
  }
}

struct Rollout {
  std::vector<AgentState> states;
  Outcome outcome = Outcome::MaxSteps;
};

struct SimOptions {
  double reach_radius = 0.1;
  double stop_epsilon = 1e-3;
  bool execute_all = false;  // run all 5 waypoints per query instead of the first
};

inline Observation observe(const Episode& ep, const AgentState& s) {
  Observation obs;
  obs.pose = s;
  const auto& g = ep.grid.geometry();
  const Vec2 p = ep.grid_origin.apply(s.xz());
  const int col0 = static_cast<int>(std::floor(g.lattice_x(p.x()))), row0 = static_cast<int>(std::floor(g.lattice_z(p.y())));
  constexpr int half = kCropSize / 2;
  for (int dr = -half; dr <= half; ++dr)
    for (int dc = -half; dc <= half; ++dc) {
      const Cell c{col0 + dc, row0 + dr};
      obs.crop[static_cast<std::size_t>((dr + half) * kCropSize + dc + half)] =
          ep.grid.contains(c) ? ep.grid.state(c) : CellState::Unknown;
    }
  return obs;
}

inline Rollout run_episode(const Episode& ep, Policy& policy, std::uint64_t seed, const SimOptions& opt = {}) {
  Rollout out;
  out.states.push_back({});
  policy.reset(seed);
  std::vector<Observation> seen;
  std::vector<Observation> window(kHistoryLength);
  auto reached = [&](const AgentState& s) { return (s.xz() - ep.target_entrance).norm() <= opt.reach_radius; };

  for (int step = 0; step < ep.max_steps; ++step) {
    const AgentState cur = out.states.back();
    if (reached(cur)) {
      out.outcome = Outcome::Reached;
      return out;
    }
    seen.push_back(observe(ep, cur));
    // The window holds the latest observations; before enough exist it is
    // padded at the front with the first one.
    const int have = static_cast<int>(seen.size());
    for (int i = 0; i < kHistoryLength; ++i) {
      const int src = have - kHistoryLength + i;
      window[static_cast<std::size_t>(i)] = seen[static_cast<std::size_t>(std::max(src, 0))];
    }
    const auto action = policy.act({window, &ep.instruction, step});
    if (action.size() != static_cast<std::size_t>(kActionLength))
      throw ProtocolError("policy emitted " + std::to_string(action.size()) + " waypoints, expected 5");
    for (const Vec2& w : action)
      if (!w.allFinite()) throw ProtocolError("policy emitted a non-finite waypoint");

    const PlanarPose frame = cur.frame();
    const std::size_t count = opt.execute_all ? action.size() : 1;
    for (std::size_t i = 0; i < count; ++i) {
      const AgentState here = out.states.back();
      const Vec2 goal = frame.apply(action[i]);
      const Vec2 d = goal - here.xz();
      if (d.norm() < opt.stop_epsilon) {
        if (i == 0) {
          out.outcome = Outcome::Stopped;
          return out;
        }
        continue;
      }
      if (segment_collides(ep.grid, ep.grid_origin.apply(here.xz()), ep.grid_origin.apply(goal))) {
        out.outcome = Outcome::Collision;
        return out;
      }
      out.states.push_back({goal.x(), goal.y(), heading_of(d.x(), d.y())});
      if (reached(out.states.back())) {
        out.outcome = Outcome::Reached;
        return out;
      }
    }
  }
  out.outcome = reached(out.states.back()) ? Outcome::Reached : Outcome::MaxSteps;
  return out;
}

// ---------------------------------------------------------------------------
// Scripted policies

namespace detail {

inline std::vector<Vec2> to_local(const AgentState& s, const std::vector<Vec2>& world) {
  std::vector<Vec2> out;
  out.reserve(world.size());
  const PlanarPose f = s.frame();
  for (const Vec2& w : world) out.push_back(f.apply_inverse(w));
  return out;
}

/// Ground-truth vertices with duplicates and straight-through points removed.
inline std::vector<Vec2> route_vertices(const Trajectory& gt) {
  std::vector<Vec2> pts;
  for (const Pose& p : gt.poses)
    if (pts.empty() || (p.xz() - pts.back()).norm() > 1e-9) pts.push_back(p.xz());
  if (pts.size() < 3) return pts;
  std::vector<Vec2> out{pts.front()};
  for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
    const Vec2 a = pts[i] - out.back(), b = pts[i + 1] - pts[i];
    const double cross = a.x() * b.y() - a.y() * b.x();
    if (std::abs(cross) > 1e-12 * a.norm() * b.norm() || a.dot(b) <= 0.0) out.push_back(pts[i]);
  }
  out.push_back(pts.back());
  return out;
}

}  // namespace detail

/// Follows the ground-truth route vertex by vertex, optionally with Gaussian
/// noise added to every emitted waypoint.
class OraclePolicy : public Policy {
 public:
  OraclePolicy(const Episode& ep, double sigma = 0.0, SimOptions opt = {}) : sigma_(sigma) {
    if (!(sigma >= 0.0)) throw DomainError("noisy_oracle: sigma must be >= 0");
    auto v = detail::route_vertices(ep.gt_trajectory);
    // Vertices already inside the reach disk would end the episode short of
    // the endpoint; skip them when the direct hop to the endpoint is clear.
    if (v.size() >= 3) {
      std::vector<Vec2> kept{v.front()};
      for (std::size_t i = 1; i + 1 < v.size(); ++i) {
        const bool inside = (v[i] - ep.target_entrance).norm() <= opt.reach_radius;
        if (inside && !segment_collides(ep.grid, ep.grid_origin.apply(kept.back()), ep.grid_origin.apply(v.back())))
          continue;
        kept.push_back(v[i]);
      }
      kept.push_back(v.back());
      v = std::move(kept);
    }
    vertices_ = std::move(v);
  }

  void reset(std::uint64_t seed) override {
    rng_.seed(seed);
    progress_ = 0;
  }

  std::vector<Vec2> act(const PolicyInput& in) override {
    const AgentState& s = in.history.back().pose;
    std::size_t best = progress_;
    double best_d = (vertices_[progress_] - s.xz()).norm();
    for (std::size_t i = progress_ + 1; i < vertices_.size(); ++i) {
      const double d = (vertices_[i] - s.xz()).norm();
      if (d < best_d) {
        best = i;
        best_d = d;
      }
    }
    progress_ = best;
    std::vector<Vec2> world;
    for (int k = 1; k <= kActionLength; ++k)
      world.push_back(vertices_[std::min(progress_ + static_cast<std::size_t>(k), vertices_.size() - 1)]);
    auto local = detail::to_local(s, world);
    if (sigma_ > 0.0)
      for (Vec2& w : local) w += sigma_ * Vec2{standard_normal(rng_), standard_normal(rng_)};
    return local;
  }

  const std::vector<Vec2>& vertices() const { return vertices_; }

 private:
  double sigma_;
  std::vector<Vec2> vertices_;
  std::size_t progress_ = 0;
  std::mt19937_64 rng_;
};

/// Walks the straight line to the target in 0.1 m increments.
class GreedyStraightPolicy : public Policy {
 public:
  explicit GreedyStraightPolicy(const Episode& ep, double spacing = 0.1) : target_(ep.target_entrance), spacing_(spacing) {}
  void reset(std::uint64_t) override {}
  std::vector<Vec2> act(const PolicyInput& in) override {
    const AgentState& s = in.history.back().pose;
    const Vec2 d = target_ - s.xz();
    const double len = d.norm();
    std::vector<Vec2> world;
    for (int k = 1; k <= kActionLength; ++k)
      world.push_back(len <= spacing_ * k ? target_ : Vec2(s.xz() + d * (spacing_ * k / len)));
    return detail::to_local(s, world);
  }

 private:
  Vec2 target_;
  double spacing_;
};

/// Always emits zero displacement.
class FrozenPolicy : public Policy {
 public:
  void reset(std::uint64_t) override {}
  std::vector<Vec2> act(const PolicyInput&) override { return std::vector<Vec2>(kActionLength, Vec2::Zero()); }
};

inline std::unique_ptr<Policy> oracle_policy(const Episode& ep) { return std::make_unique<OraclePolicy>(ep, 0.0); }
inline std::unique_ptr<Policy> noisy_oracle(const Episode& ep, double sigma) {
  return std::make_unique<OraclePolicy>(ep, sigma);
}
inline std::unique_ptr<Policy> greedy_straight(const Episode& ep) { return std::make_unique<GreedyStraightPolicy>(ep); }

/// Builds a named scripted policy: "oracle", "noisy_oracle", "greedy_straight" or "frozen".
inline std::unique_ptr<Policy> make_policy(const std::string& name, const Episode& ep, double sigma) {
  if (name == "oracle") return oracle_policy(ep);
  if (name == "noisy_oracle") return noisy_oracle(ep, sigma);
  if (name == "greedy_straight") return greedy_straight(ep);
  if (name == "frozen") return std::make_unique<FrozenPolicy>();
  throw UsageError("unknown policy '" + name + "'");
}

// ---------------------------------------------------------------------------
// Metrics

inline double final_distance(const Rollout& r, const Episode& ep) {
  if (r.states.empty()) throw DomainError("final_distance: empty rollout");
  return (r.states.back().xz() - ep.target_entrance).norm();
}

inline double success_rate(std::span<const Rollout> rollouts, std::span<const Episode> episodes, double radius) {
  if (rollouts.size() != episodes.size()) throw DomainError("success_rate: rollouts and episodes are misaligned");
  if (rollouts.empty()) throw DomainError("success_rate: empty batch");
  std::size_t ok = 0;
  for (std::size_t i = 0; i < rollouts.size(); ++i) ok += final_distance(rollouts[i], episodes[i]) <= radius;
  return static_cast<double>(ok) / static_cast<double>(rollouts.size());
}

inline constexpr int kDeviationSamples = 100;

inline Trajectory rollout_trajectory(const Rollout& r) {
  Trajectory t;
  t.frame = Frame::Normalized;
  for (const AgentState& s : r.states) t.poses.push_back({s.x, 0.0, s.z, s.yaw});
  if (t.poses.size() == 1) t.poses.push_back(t.poses.front());
  return t;
}

/// Mean distance between m arc-length-uniform samples of both polylines.
inline double trajectory_deviation(const Rollout& r, const Trajectory& gt, int m = kDeviationSamples) {
  if (r.states.empty()) throw DomainError("trajectory_deviation: empty rollout");
  if (gt.poses.size() < 2) throw DomainError("trajectory_deviation: ground truth needs >= 2 poses");
  const Trajectory a = resample(rollout_trajectory(r), m);
  const Trajectory b = resample(gt, m);
  std::vector<double> d(static_cast<std::size_t>(m));
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = (a.poses[i].xz() - b.poses[i].xz()).norm();
  double s = 0.0;
  for (double x : d) s += x;
  return s / m;
}

struct MetricReport {
  double sr_010 = 0.0, sr_020 = 0.0, sr_030 = 0.0;
  double tr_mean = 0.0, tr_best = 0.0, tr_worst = 0.0;
  std::size_t episode_count = 0;
};

/// Order-independent summary: sums run over sorted values.
inline MetricReport aggregate(std::span<const double> deviations, std::span<const double> final_distances) {
  if (deviations.empty()) throw DomainError("aggregate: empty input");
  if (deviations.size() != final_distances.size()) throw DomainError("aggregate: misaligned inputs");
  std::vector<double> dev(deviations.begin(), deviations.end());
  std::sort(dev.begin(), dev.end());
  double sum = 0.0;
  for (double x : dev) sum += x;
  MetricReport rep;
  rep.episode_count = dev.size();
  rep.tr_mean = std::clamp(sum / static_cast<double>(dev.size()), dev.front(), dev.back());
  rep.tr_best = dev.front();
  rep.tr_worst = dev.back();
  auto sr = [&](double r) {
    std::size_t ok = 0;
    for (double d : final_distances) ok += d <= r;
    return static_cast<double>(ok) / static_cast<double>(final_distances.size());
  };
  rep.sr_010 = sr(0.1);
  rep.sr_020 = sr(0.2);
  rep.sr_030 = sr(0.3);
  return rep;
}

inline nlohmann::json report_to_json(const MetricReport& r) {
  nlohmann::json j;
  j["SR (0.1m)"] = r.sr_010;
  j["SR (0.2m)"] = r.sr_020;
  j["SR (0.3m)"] = r.sr_030;
  j["TR (mean)"] = r.tr_mean;
  j["TR (best)"] = r.tr_best;
  j["TR (worst)"] = r.tr_worst;
  j["episode_count"] = r.episode_count;
  return j;
}

struct EvalResult {
  MetricReport report;
  std::vector<Rollout> rollouts;
  std::vector<double> deviations;
  std::vector<double> final_distances;
};

/// Runs one named policy over every episode with per-episode derived seeds.
inline EvalResult evaluate(std::span<const Episode> episodes, const std::string& policy_name, double sigma,
                           std::uint64_t seed, const SimOptions& opt = {}) {
  if (episodes.empty()) throw UsageError("evaluate: empty episode set");
  EvalResult res;
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    const Episode& ep = episodes[i];
    auto policy = make_policy(policy_name, ep, sigma);
    Rollout r = run_episode(ep, *policy, derive_seed(seed, ep.id.empty() ? std::to_string(i) : ep.id), opt);
    res.deviations.push_back(trajectory_deviation(r, ep.gt_trajectory));
    res.final_distances.push_back(final_distance(r, ep));
    res.rollouts.push_back(std::move(r));
  }
  res.report = aggregate(res.deviations, res.final_distances);
  return res;
}

// ---------------------------------------------------------------------------
// Episode sets on disk: manifest JSON with per-episode grid PGM + sidecar and
// ground-truth trajectory JSONL, paths relative to the manifest.

inline nlohmann::json planar_to_json(const PlanarPose& p) { return {{"x", p.x}, {"z", p.z}, {"yaw", p.yaw}}; }

inline PlanarPose planar_from_json(const nlohmann::json& j) {
  return {j.at("x").get<double>(), j.at("z").get<double>(), j.at("yaw").get<double>()};
}

inline void write_episode_set(const std::filesystem::path& dir, std::span<const Episode> episodes) {
  nlohmann::json manifest;
  manifest["episodes"] = nlohmann::json::array();
  for (const Episode& ep : episodes) {
    const std::string stem = "episodes/" + ep.id;
    write_grid(dir / (stem + "_grid.pgm"), dir / (stem + "_grid.json"), ep.grid);
    write_trajectory(dir / (stem + "_gt.jsonl"), ep.gt_trajectory);
    manifest["episodes"].push_back({{"id", ep.id},
                                    {"instruction", ep.instruction},
                                    {"grid_pgm", stem + "_grid.pgm"},
                                    {"grid_json", stem + "_grid.json"},
                                    {"trajectory", stem + "_gt.jsonl"},
                                    {"target_entrance", {ep.target_entrance.x(), ep.target_entrance.y()}},
                                    {"grid_origin", planar_to_json(ep.grid_origin)},
                                    {"max_steps", ep.max_steps}});
  }
  io::write_file_atomic(dir / "episodes.json", manifest.dump(2) + "\n");
}

inline std::vector<Episode> read_episode_set(const std::filesystem::path& manifest_path) {
  std::vector<Episode> out;
  const auto base = manifest_path.parent_path();
  try {
    const auto manifest = nlohmann::json::parse(io::read_file(manifest_path));
    for (const auto& e : manifest.at("episodes")) {
      Episode ep;
      ep.id = e.at("id").get<std::string>();
      ep.instruction = e.value("instruction", "");
      ep.grid = read_grid(base / e.at("grid_pgm").get<std::string>(), base / e.at("grid_json").get<std::string>());
      ep.gt_trajectory = read_trajectory(base / e.at("trajectory").get<std::string>());
      ep.target_entrance = {e.at("target_entrance").at(0).get<double>(), e.at("target_entrance").at(1).get<double>()};
      ep.grid_origin = planar_from_json(e.at("grid_origin"));
      ep.max_steps = e.value("max_steps", 100);
      ep.validate();
      out.push_back(std::move(ep));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }
  return out;
}

}  // namespace entrynav
