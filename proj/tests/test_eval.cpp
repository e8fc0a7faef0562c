#include <gtest/gtest.h>

#include <sstream>

#include "support.hpp"
#include "tamm/eval.hpp"
#include "tamm/trajectory_io.hpp"

using namespace tamm;
using namespace tamm::test;

TEST(Accuracy, SetArithmetic) {
  EXPECT_DOUBLE_EQ(accuracy(std::set<SegmentId>{1, 2, 3, 4}, {1, 2, 3, 4}), 1.0);
  EXPECT_DOUBLE_EQ(accuracy(std::set<SegmentId>{1, 2, 4, 9}, {1, 2, 3, 4}), 0.75);
  EXPECT_DOUBLE_EQ(accuracy(std::set<SegmentId>{7, 8}, {1, 2, 3, 4}), 0.0);
  EXPECT_DOUBLE_EQ(accuracy(std::set<SegmentId>{1}, {1, 1, 1}), 1.0);
  EXPECT_THROW(accuracy(std::set<SegmentId>{1}, {}), Error);
}

TEST(Accuracy, MatchedTrajectory) {
  const auto net = detour_road();
  const Trajectory t{"t", "u", {fix_at(0, {100, 0}, 90.0), fix_at(60, {700, 0}, 90.0), fix_at(120, {1300, 0}, 90.0)}};
  const auto m = match_trajectory(net, t, Heuristic::shortest);
  EXPECT_DOUBLE_EQ(accuracy(net, m, {1, 2, 3}), 1.0);
  EXPECT_DOUBLE_EQ(accuracy(net, m, {1, 2, 3, 4}), 0.75);
}

TEST(MiddlePoint, StraightRoadCoveredByEveryHeuristic) {
  const auto net = detour_road();
  const Trajectory t{"t", "u", {fix_at(0, {100, 0}, 90.0), fix_at(60, {700, 0}, 90.0), fix_at(120, {1300, 0}, 90.0)}};
  for (Heuristic h : {Heuristic::time_aware, Heuristic::shortest, Heuristic::fastest}) {
    const auto s = middle_point_test(net, t, h);
    ASSERT_TRUE(s);
    EXPECT_EQ(s->hidden, 1u);
    EXPECT_DOUBLE_EQ(s->ratio(), 1.0);
  }
}

TEST(MiddlePoint, HiddenFixOnDetour) {
  const auto net = detour_road();
  // 1 m before the block, on the detour's second leg, 1 m past the block
  const Trajectory t{"t", "u",
                     {fix_at(0, {2399, 0}, 90.0), fix_at(54.1, {2850, 100}, bearing({2700, 200}, {3000, 0})),
                      fix_at(72.2, {3001, 0}, 90.0)}};
  EXPECT_DOUBLE_EQ(middle_point_test(net, t, Heuristic::shortest)->ratio(), 0.0);
  EXPECT_DOUBLE_EQ(middle_point_test(net, t, Heuristic::time_aware)->ratio(), 1.0);
}

TEST(MiddlePoint, HidesOddIndicesWithSuccessor) {
  const auto net = detour_road();
  Trajectory t{"t", "u", {}};
  for (int i = 0; i < 6; ++i) t.fixes.push_back(fix_at(60.0 * i, {100.0 + 600.0 * i, 0}, 90.0));
  EXPECT_EQ(middle_point_test(net, t, Heuristic::shortest)->hidden, 2u);  // indices 1 and 3
  t.fixes.push_back(fix_at(360, {3700, 0}, 90.0));
  EXPECT_EQ(middle_point_test(net, t, Heuristic::shortest)->hidden, 3u);  // 1, 3, 5
}

TEST(MiddlePoint, TwoFixesSkipped) {
  const auto net = detour_road();
  const Trajectory t{"t", "u", {fix_at(0, {100, 0}, 90.0), fix_at(60, {700, 0}, 90.0)}};
  EXPECT_FALSE(middle_point_test(net, t, Heuristic::time_aware));
}

TEST(Alignment, Formula) {
  std::vector<PairRecord> recs{{"a", 0, 100, 60, Heuristic::shortest, {1}, PairFlag::ok},
                               {"a", 1, 100, 140, Heuristic::shortest, {2}, PairFlag::ok},
                               {"a", 2, 40, 0, Heuristic::shortest, {}, PairFlag::stay},
                               {"a", 3, 40, 0, Heuristic::shortest, {}, PairFlag::no_path}};
  const auto rep = alignment_report(recs);
  EXPECT_DOUBLE_EQ(rep.mean_delta_pct, 40.0);
  EXPECT_EQ(rep.pairs, 2u);
  ASSERT_EQ(rep.bins.size(), 1u);
  EXPECT_DOUBLE_EQ(rep.bins[0].start, 90.0);
  EXPECT_DOUBLE_EQ(rep.bins[0].mean_path_time, 100.0);
  EXPECT_DOUBLE_EQ(rep.bins[0].std_path_time, 40.0);
  EXPECT_EQ(rep.bins[0].count, 2u);
}

TEST(Alignment, PerfectAndEmpty) {
  std::vector<PairRecord> recs{{"a", 0, 31, 31, Heuristic::time_aware, {1}, PairFlag::ok},
                               {"a", 1, 95, 95, Heuristic::time_aware, {2}, PairFlag::ok}};
  const auto rep = alignment_report(recs);
  EXPECT_DOUBLE_EQ(rep.mean_delta_pct, 0.0);
  EXPECT_EQ(rep.bins.size(), 2u);
  const auto empty = alignment_report({});
  EXPECT_TRUE(empty.bins.empty());
  EXPECT_EQ(empty.mean_delta_pct, 0.0);
  std::ostringstream out;
  write_alignment_csv(out, empty);
  EXPECT_EQ(out.str(), "bin_start_s,mean_path_time_s,std_s,count\n");
}

TEST(Synth, Deterministic) {
  SynthConfig cfg;
  cfg.trajectories = 50;
  const auto a = synth_world(cfg), b = synth_world(cfg);
  std::ostringstream na, nb, ta, tb, ga, gb;
  write_network(na, a.network);
  write_network(nb, b.network);
  write_trajectories(ta, a.trajectories, a.network.projection());
  write_trajectories(tb, b.trajectories, b.network.projection());
  write_truth(ga, a.truth);
  write_truth(gb, b.truth);
  EXPECT_EQ(na.str(), nb.str());
  EXPECT_EQ(ta.str(), tb.str());
  EXPECT_EQ(ga.str(), gb.str());
  cfg.seed = 43;
  std::ostringstream tc;
  const auto c = synth_world(cfg);
  write_trajectories(tc, c.trajectories, c.network.projection());
  EXPECT_NE(ta.str(), tc.str());
}

TEST(Synth, FilesRoundTrip) {
  SynthConfig cfg;
  cfg.trajectories = 30;
  const auto w = synth_world(cfg);
  std::ostringstream n, t, g;
  write_network(n, w.network);
  write_trajectories(t, w.trajectories, w.network.projection());
  write_truth(g, w.truth);
  std::istringstream ni(n.str());
  const auto net = load_network(ni);
  ASSERT_EQ(net.segment_count(), w.network.segment_count());
  std::istringstream ti(t.str());
  const auto trajs = read_trajectories(ti, net.projection());
  ASSERT_EQ(trajs.size(), w.trajectories.size());
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    ASSERT_EQ(trajs[i].fixes.size(), w.trajectories[i].fixes.size());
    for (std::size_t j = 0; j < trajs[i].fixes.size(); ++j) {
      const auto& x = trajs[i].fixes[j];
      const auto& y = w.trajectories[i].fixes[j];
      EXPECT_EQ(x.timestamp, y.timestamp);
      EXPECT_LT(distance(x.position, y.position), 1e-6);
      EXPECT_EQ(x.speed, y.speed);
      EXPECT_EQ(x.heading, y.heading);
    }
  }
  std::istringstream gi(g.str());
  EXPECT_EQ(read_truth(gi), w.truth);
}

TEST(Synth, InterFixDistanceRegime) {
  SynthConfig cfg;
  cfg.grid_n = 40;
  cfg.trajectories = 300;
  cfg.sampling_interval_s = 90;
  cfg.speed_classes = {{"primary", 15.0}};
  cfg.min_trip_blocks = 30;
  const auto w = synth_world(cfg);
  double along = 0.0;
  std::size_t pairs = 0;
  for (const auto& odo : w.fix_odometer) {
    for (std::size_t i = 0; i + 1 < odo.size(); ++i) {
      along += odo[i + 1] - odo[i];
      ++pairs;
    }
  }
  ASSERT_GT(pairs, 300u);
  EXPECT_NEAR(along / static_cast<double>(pairs), 1350.0, 0.15 * 1350.0);
}

TEST(Synth, NoiselessShortestDriversMatchedExactly) {
  SynthConfig cfg;
  cfg.trajectories = 100;
  cfg.noise_sigma_m = 0.0;
  cfg.detour_fraction = 0.0;
  cfg.fastest_fraction = 0.0;
  cfg.sampling_interval_s = 5.0;
  cfg.min_fixes = 2;
  const auto w = synth_world(cfg);
  for (std::size_t i = 0; i < w.trajectories.size(); ++i) {
    const auto m = match_trajectory(w.network, w.trajectories[i], Heuristic::shortest);
    EXPECT_DOUBLE_EQ(accuracy(w.network, m, w.truth.at(w.trajectories[i].id)), 1.0) << w.trajectories[i].id;
  }
}

TEST(Synth, ProfilesFollowFractions) {
  SynthConfig cfg;
  cfg.trajectories = 400;
  cfg.detour_fraction = 0.3;
  const auto w = synth_world(cfg);
  std::size_t detours = 0;
  for (auto p : w.profiles) detours += p == DriverProfile::detour ? 1 : 0;
  EXPECT_NEAR(static_cast<double>(detours) / 400.0, 0.3, 0.06);
  ASSERT_EQ(w.fix_truth.size(), w.trajectories.size());
  for (std::size_t i = 0; i < w.trajectories.size(); ++i) {
    EXPECT_GE(w.trajectories[i].fixes.size(), cfg.min_fixes);
    EXPECT_EQ(w.fix_truth[i].size(), w.trajectories[i].fixes.size());
  }
}

TEST(TruthFile, MalformedIds) {
  std::istringstream in("traj_id,segment_ids\nt1,1;x;3\n");
  EXPECT_THROW(read_truth(in), FormatError);
}

TEST(TrajectoryFile, Validation) {
  const Projection p({43.7, 10.4});
  const std::string head = "user_id,traj_id,timestamp_s,lat,lon,speed_mps,heading_deg\n";
  auto read = [&](const std::string& body) {
    std::istringstream in(head + body);
    return read_trajectories(in, p);
  };
  const auto ok = read("u,a,0,43.7,10.4,,\nu,a,10,43.701,10.4,5,-10\nu,b,0,43.7,10.4,,\n");
  ASSERT_EQ(ok.size(), 2u);
  EXPECT_FALSE(ok[0].fixes[0].speed);
  EXPECT_DOUBLE_EQ(*ok[0].fixes[1].heading, 350.0);
  EXPECT_THROW(read("u,a,10,43.7,10.4,,\nu,a,10,43.701,10.4,,\n"), FormatError);
  EXPECT_THROW(read("u,a,0,43.7,10.4,,\nu,b,0,43.7,10.4,,\nu,a,20,43.7,10.4,,\n"), FormatError);
  EXPECT_THROW(read("u,a,0,95,10.4,,\n"), FormatError);
  EXPECT_THROW(read("u,a,0,43.7,10.4,-1,\n"), FormatError);
  EXPECT_TRUE(read("").empty());
}
