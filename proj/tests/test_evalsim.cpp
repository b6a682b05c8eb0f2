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

#include "entrynav/evalsim.hpp"
#include "oracles.hpp"

using namespace entrynav;

namespace {

/// Episode whose frame starts at the agent cell center facing the first path step.
Episode make_episode(OccupancyGrid grid, Cell target, const std::string& id = "t") {
  grid.set_target(target);
  const auto path = astar(grid);
  if (!path) throw std::runtime_error("test episode unreachable");
  const Trajectory raw = lift_path(*path, grid);
  Episode ep;
  ep.id = id;
  ep.grid_origin = origin_of(raw);
  ep.gt_trajectory = normalize_origin(raw);
  ep.target_entrance = target_in_episode(grid, ep.grid_origin);
  ep.grid = std::move(grid);
  ep.validate();
  return ep;
}

OccupancyGrid free_grid() { return OccupancyGrid(GridGeometry::standard(), CellState::Free); }

Rollout rollout_of(std::vector<Vec2> pts) {
  Rollout r;
  for (const auto& p : pts) r.states.push_back({p.x(), p.y(), 0.0});
  return r;
}

class ScriptedPolicy : public Policy {
 public:
  std::function<std::vector<Vec2>(const PolicyInput&)> fn;
  void reset(std::uint64_t) override {}
  std::vector<Vec2> act(const PolicyInput& in) override { return fn(in); }
};

}  // namespace

TEST(Episode, Constants) {
  EXPECT_EQ(kHistoryLength, 10);
  EXPECT_EQ(kActionLength, 5);
}

TEST(RunEpisode, OracleReachesOnFreeGrid) {
  for (Cell target : {Cell{25, 30}, Cell{40, 45}, Cell{3, 20}}) {
    const Episode ep = make_episode(free_grid(), target);
    auto pol = oracle_policy(ep);
    const Rollout r = run_episode(ep, *pol, 1);
    EXPECT_EQ(r.outcome, Outcome::Reached);
    EXPECT_LT(final_distance(r, ep), 0.1);
    EXPECT_LT(trajectory_deviation(r, ep.gt_trajectory), 0.05);
  }
}

TEST(RunEpisode, OracleAroundObstacle) {
  OccupancyGrid g = free_grid();
  for (int c = 15; c <= 35; ++c) g.set_state({c, 15}, CellState::Occupied);
  const Episode ep = make_episode(g, {25, 30});
  auto pol = oracle_policy(ep);
  const Rollout r = run_episode(ep, *pol, 1);
  EXPECT_EQ(r.outcome, Outcome::Reached);
  EXPECT_LT(final_distance(r, ep), 0.1);
}

TEST(RunEpisode, FrozenStopsAtOrigin) {
  const Episode ep = make_episode(free_grid(), {25, 30});
  FrozenPolicy frozen;
  const Rollout r = run_episode(ep, frozen, 1);
  EXPECT_EQ(r.outcome, Outcome::Stopped);
  ASSERT_EQ(r.states.size(), 1u);
  EXPECT_EQ(r.states[0], AgentState{});
}

TEST(RunEpisode, StraightLineIntoWallCollides) {
  OccupancyGrid g = free_grid();
  for (int c = 0; c < 50; ++c)
    if (c != 0) g.set_state({c, 20}, CellState::Occupied);
  const Episode ep = make_episode(g, {25, 30});
  auto pol = greedy_straight(ep);
  const Rollout r = run_episode(ep, *pol, 1);
  EXPECT_EQ(r.outcome, Outcome::Collision);
}

TEST(RunEpisode, ProtocolViolations) {
  const Episode ep = make_episode(free_grid(), {25, 30});
  ScriptedPolicy p;
  p.fn = [](const PolicyInput&) { return std::vector<Vec2>(4, Vec2(0, 0.1)); };
  EXPECT_THROW(run_episode(ep, p, 1), ProtocolError);
  p.fn = [](const PolicyInput&) {
    return std::vector<Vec2>(5, Vec2(std::numeric_limits<double>::quiet_NaN(), 0.1));
  };
  EXPECT_THROW(run_episode(ep, p, 1), ProtocolError);
}

TEST(RunEpisode, HistoryWindowPaddedWithFirstObservation) {
  const Episode ep = make_episode(free_grid(), {25, 45});
  ScriptedPolicy p;
  std::vector<std::vector<double>> seen_z;
  p.fn = [&](const PolicyInput& in) {
    EXPECT_EQ(in.history.size(), 10u);
    EXPECT_EQ(*in.instruction, ep.instruction);
    std::vector<double> z;
    for (const auto& o : in.history) z.push_back(o.pose.z);
    seen_z.push_back(z);
    return std::vector<Vec2>(5, Vec2(0, 0.1));
  };
  Episode short_ep = ep;
  short_ep.max_steps = 12;
  const Rollout r = run_episode(short_ep, p, 1);
  EXPECT_EQ(r.outcome, Outcome::MaxSteps);
  EXPECT_EQ(r.states.size(), 13u);
  ASSERT_EQ(seen_z.size(), 12u);
  for (double z : seen_z[0]) EXPECT_EQ(z, 0.0);
  // Step 2: eight padded copies of the first, then the two real ones.
  EXPECT_EQ(seen_z[2][7], 0.0);
  EXPECT_NEAR(seen_z[2][8], 0.1, 1e-12);
  EXPECT_NEAR(seen_z[2][9], 0.2, 1e-12);
  EXPECT_NEAR(seen_z[11][0], 0.2, 1e-12);
  EXPECT_NEAR(seen_z[11][9], 1.1, 1e-12);
}

TEST(RunEpisode, ExecuteAllRunsFiveWaypoints) {
  const Episode ep = make_episode(free_grid(), {25, 45});
  ScriptedPolicy p;
  p.fn = [](const PolicyInput&) {
    return std::vector<Vec2>{{0, 0.1}, {0, 0.2}, {0, 0.3}, {0, 0.4}, {0, 0.5}};
  };
  SimOptions opt;
  opt.execute_all = true;
  Episode one = ep;
  one.max_steps = 1;
  const Rollout r = run_episode(one, p, 1, opt);
  EXPECT_EQ(r.states.size(), 6u);
  EXPECT_NEAR(r.states.back().z, 0.5, 1e-12);
}

TEST(Observe, CropCenteredAndUnknownOutside) {
  OccupancyGrid g = free_grid();
  g.set_state({26, 1}, CellState::Occupied);
  const Episode ep = make_episode(g, {25, 30});
  const Observation o = observe(ep, {});
  EXPECT_EQ(o.crop[5 * 11 + 5], CellState::Free);
  EXPECT_EQ(o.crop[6 * 11 + 6], CellState::Occupied);
  EXPECT_EQ(o.crop[0], CellState::Unknown);  // row -5 is outside the grid
}

TEST(Metrics, SuccessRateThresholds) {
  Episode ep;
  ep.target_entrance = {0, 0};
  const std::vector<Episode> eps(4, ep);
  const std::vector<Rollout> rs{rollout_of({{0.05, 0}}), rollout_of({{0.15, 0}}), rollout_of({{0, 0.25}}),
                                rollout_of({{0.5, 0}})};
  EXPECT_DOUBLE_EQ(success_rate(rs, eps, 0.1), 0.25);
  EXPECT_DOUBLE_EQ(success_rate(rs, eps, 0.2), 0.5);
  EXPECT_DOUBLE_EQ(success_rate(rs, eps, 0.3), 0.75);
  const std::vector<Rollout> exact{rollout_of({{0, 0}})};
  EXPECT_EQ(success_rate(exact, std::span(eps).first(1), 0.1), 1.0);
  EXPECT_THROW(success_rate(rs, std::span(eps).first(3), 0.1), DomainError);
}

TEST(Metrics, DeviationExamplesAndOracle) {
  Trajectory gt;
  gt.poses = {{0, 0, 0, 0}, {0, 0, 1, 0}, {0.5, 0, 2, 0}};
  const Rollout same = rollout_of({{0, 0}, {0, 1}, {0.5, 2}});
  EXPECT_NEAR(trajectory_deviation(same, gt), 0.0, 1e-12);
  const Rollout shifted = rollout_of({{0.5, 0}, {0.5, 1}, {1.0, 2}});
  Trajectory straight;
  straight.poses = {{0, 0, 0, 0}, {0, 0, 3, 0}};
  EXPECT_NEAR(trajectory_deviation(rollout_of({{0.5, 0}, {0.5, 3}}), straight), 0.5, 1e-12);
  EXPECT_NEAR(trajectory_deviation(shifted, gt), 0.5, 1e-12);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int k = 0; k < 30; ++k) {
    std::vector<Vec2> a{{0, 0}}, b{{0, 0}};
    for (int i = 0; i < 7; ++i) {
      a.push_back(a.back() + Vec2(u(rng), 1 + u(rng)));
      b.push_back(b.back() + Vec2(u(rng), 1 + u(rng)));
    }
    Trajectory t;
    for (const auto& p : b) t.poses.push_back({p.x(), 0, p.y(), 0});
    std::vector<Eigen::Vector2d> ao(a.begin(), a.end()), bo(b.begin(), b.end());
    EXPECT_NEAR(trajectory_deviation(rollout_of(a), t, 100), oracle::mean_deviation(ao, bo, 100), 1e-9);
  }
}

TEST(Metrics, DeviationFromStationaryRollout) {
  Trajectory gt;
  gt.poses = {{0, 0, 0, 0}, {0, 0, 2, 0}};
  EXPECT_NEAR(trajectory_deviation(rollout_of({{0, 0}}), gt, 101), 1.0, 1e-12);
}

TEST(Metrics, Aggregate) {
  const std::vector<double> dev{3, 1, 2}, fd{0.05, 0.5, 0.15};
  const auto r = aggregate(dev, fd);
  EXPECT_DOUBLE_EQ(r.tr_mean, 2.0);
  EXPECT_EQ(r.tr_best, 1.0);
  EXPECT_EQ(r.tr_worst, 3.0);
  EXPECT_LE(r.sr_010, r.sr_020);
  EXPECT_LE(r.sr_020, r.sr_030);
  const std::vector<double> one{0.7}, z{0.0};
  const auto s = aggregate(one, z);
  EXPECT_EQ(s.tr_mean, s.tr_best);
  EXPECT_EQ(s.tr_best, s.tr_worst);
  EXPECT_THROW(aggregate(std::vector<double>{}, std::vector<double>{}), DomainError);
  const auto j = report_to_json(r);
  for (const char* key : {"SR (0.1m)", "SR (0.2m)", "SR (0.3m)", "TR (mean)", "TR (best)", "TR (worst)"})
    EXPECT_TRUE(j.contains(key)) << key;
}

TEST(Metrics, AggregateIsOrderIndependent) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> dev(500), fd(500);
  for (auto& x : dev) x = u(rng) * 1e3;
  for (auto& x : fd) x = u(rng);
  const auto a = aggregate(dev, fd);
  std::reverse(dev.begin(), dev.end());
  std::reverse(fd.begin(), fd.end());
  const auto b = aggregate(dev, fd);
  EXPECT_EQ(a.tr_mean, b.tr_mean);
  EXPECT_EQ(a.sr_010, b.sr_010);
}

TEST(Policies, FactoryAndDeterminism) {
  const Episode ep = make_episode(free_grid(), {35, 40}, "ep");
  EXPECT_THROW(make_policy("teleport", ep, 0.0), UsageError);
  EXPECT_THROW(noisy_oracle(ep, -0.1), DomainError);
  const std::vector<Episode> eps{ep};
  const auto a = evaluate(eps, "noisy_oracle", 0.1, 7);
  const auto b = evaluate(eps, "noisy_oracle", 0.1, 7);
  const auto c = evaluate(eps, "noisy_oracle", 0.1, 8);
  ASSERT_EQ(a.rollouts[0].states.size(), b.rollouts[0].states.size());
  for (std::size_t i = 0; i < a.rollouts[0].states.size(); ++i) EXPECT_EQ(a.rollouts[0].states[i], b.rollouts[0].states[i]);
  EXPECT_NE(a.rollouts[0].states[1], c.rollouts[0].states[1]);
  EXPECT_THROW(evaluate(std::vector<Episode>{}, "oracle", 0.0, 1), UsageError);
}

TEST(EpisodeIO, RoundTrip) {
  const std::vector<Episode> eps{make_episode(free_grid(), {35, 40}, "a"), make_episode(free_grid(), {10, 20}, "b")};
  const auto dir = oracle::scratch_dir("episodes");
  write_episode_set(dir, eps);
  const auto back = read_episode_set(dir / "episodes.json");
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].id, eps[i].id);
    EXPECT_TRUE(back[i].grid == eps[i].grid);
    EXPECT_TRUE(back[i].gt_trajectory == eps[i].gt_trajectory);
    EXPECT_EQ(back[i].target_entrance, eps[i].target_entrance);
    EXPECT_EQ(back[i].grid_origin.yaw, eps[i].grid_origin.yaw);
  }
}
