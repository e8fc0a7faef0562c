#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "support.hpp"
#include "tamm/pipeline.hpp"

using namespace tamm;
using namespace tamm::test;

namespace {

// Ten fixes driving east along the detour road at 10 m/s; between fixes 4
// and 5 the driver takes the 72 s detour around the block 2400..3000.
Trajectory detour_trip() {
  Trajectory t{"detour", "driver", {}};
  const std::vector<double> xs{100, 700, 1300, 1900, 2399, 3001, 3601, 4201, 4801, 5401};
  double time = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i > 0) time += i == 5 ? 0.1 + 72.0 + 0.1 : (xs[i] - xs[i - 1]) / 10.0;
    t.fixes.push_back(fix_at(time, {xs[i], 0.0}, 90.0, 10.0));
  }
  return t;
}

bool contains(const std::vector<SegmentId>& v, SegmentId id) { return std::find(v.begin(), v.end(), id) != v.end(); }

std::string serialize(const std::vector<BatchItem>& items) {
  std::ostringstream out;
  write_matched_header(out);
  for (const auto& it : items) {
    if (it.result) write_matched(out, *it.result);
    else out << "error," << it.error << "\n";
  }
  return out.str();
}

}  // namespace

TEST(MatchTrajectory, TwoFixesOnOneSegment) {
  const auto net = make_network({{1, {0, 0}}, {2, {1000, 0}}}, {{1, 1, 2, 10.0}});
  const Trajectory t{"t", "u", {fix_at(0, {100, 2}, 90.0), fix_at(50, {500, -3}, 90.0)}};
  const auto m = match_trajectory(net, t, Heuristic::time_aware);
  ASSERT_EQ(m.pairs.size(), 1u);
  const auto& p = m.pairs[0];
  EXPECT_EQ(p.flag, PairFlag::ok);
  EXPECT_EQ(p.segment_ids, (std::vector<SegmentId>{1}));
  EXPECT_NEAR(p.path.length, 400.0, 1e-9);
  EXPECT_NEAR(p.path_time, 40.0, 1e-9);
  EXPECT_NEAR(p.delta(), 10.0, 1e-9);
  EXPECT_EQ(m.search.searches, 1u);
}

TEST(MatchTrajectory, StayPair) {
  const auto net = make_network({{1, {0, 0}}, {2, {1000, 0}}}, {{1, 1, 2, 10.0}});
  const Trajectory t{"t", "u", {fix_at(0, {100, 0}, 90.0), fix_at(60, {105, 0}, 90.0)}};
  const auto m = match_trajectory(net, t, Heuristic::time_aware);
  ASSERT_EQ(m.pairs.size(), 1u);
  EXPECT_EQ(m.pairs[0].flag, PairFlag::stay);
  EXPECT_TRUE(m.pairs[0].segment_ids.empty());
  EXPECT_EQ(m.search.searches, 0u);
}

TEST(MatchTrajectory, NoPathFlagged) {
  const auto net = make_network({{1, {0, 0}}, {2, {1000, 0}}}, {{1, 1, 2, 10.0}});
  const Trajectory t{"t", "u", {fix_at(0, {500, 0}, 90.0), fix_at(30, {200, 0}, 90.0)}};
  const auto m = match_trajectory(net, t, Heuristic::shortest);
  EXPECT_EQ(m.pairs[0].flag, PairFlag::no_path);
}

TEST(MatchTrajectory, DetourTripFollowedOnlyByTimeAware) {
  const auto net = detour_road();
  const auto trip = detour_trip();
  const auto ta = match_trajectory(net, trip, Heuristic::time_aware);
  const auto sp = match_trajectory(net, trip, Heuristic::shortest);
  ASSERT_EQ(ta.pairs.size(), 9u);
  for (const auto* m : {&ta, &sp}) {
    for (const auto& p : m->pairs) EXPECT_EQ(p.flag, PairFlag::ok);
  }
  EXPECT_TRUE(contains(ta.pairs[4].segment_ids, 101));
  EXPECT_TRUE(contains(ta.pairs[4].segment_ids, 102));
  EXPECT_FALSE(contains(ta.pairs[4].segment_ids, 5));
  EXPECT_FALSE(contains(sp.pairs[4].segment_ids, 101));
  EXPECT_TRUE(contains(sp.pairs[4].segment_ids, 5));
  for (std::size_t i = 0; i < 9; ++i) {
    if (i == 4) continue;
    EXPECT_EQ(ta.pairs[i].segment_ids, sp.pairs[i].segment_ids) << i;
  }
  EXPECT_LT(std::abs(ta.pairs[4].delta()), std::abs(sp.pairs[4].delta()));
}

TEST(MatchTrajectory, RejectsBadTimestamps) {
  const auto net = detour_road();
  Trajectory t = detour_trip();
  t.fixes[3].timestamp = t.fixes[2].timestamp;
  EXPECT_THROW(match_trajectory(net, t, Heuristic::time_aware), Error);
}

TEST(BatchMatch, WorkerCountDoesNotChangeOutput) {
  SynthConfig cfg;
  cfg.trajectories = 100;
  const auto w = synth_world(cfg);
  const auto one = serialize(batch_match(w.network, w.trajectories, Heuristic::time_aware, kDefaultKnn, 1));
  const auto eight = serialize(batch_match(w.network, w.trajectories, Heuristic::time_aware, kDefaultKnn, 8));
  EXPECT_EQ(one, eight);
  EXPECT_GT(one.size(), 1000u);
}

TEST(BatchMatch, EmptyStream) {
  const auto net = detour_road();
  EXPECT_TRUE(batch_match(net, {}, Heuristic::time_aware, kDefaultKnn, 4).empty());
}

TEST(BatchMatch, RejectedTrajectoryKeepsPosition) {
  const auto net = detour_road();
  Trajectory bad = detour_trip();
  bad.id = "bad";
  bad.fixes[1].timestamp = 0.0;
  const auto out = batch_match(net, {detour_trip(), bad, detour_trip()}, Heuristic::shortest, kDefaultKnn, 3);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_TRUE(out[0].result && out[2].result);
  EXPECT_FALSE(out[1].result);
  EXPECT_NE(out[1].error.find("bad"), std::string::npos);
}

TEST(BatchMatch, OneSearchPerNonStayPair) {
  SynthConfig cfg;
  cfg.grid_n = 4;
  cfg.trajectories = 1000;
  cfg.min_trip_blocks = 3;
  cfg.sampling_interval_s = 10;
  cfg.min_fixes = 2;
  const auto w = synth_world(cfg);
  ASSERT_EQ(w.network.segment_count(), 48u);
  std::size_t expected = 0, searches = 0, stays = 0;
  for (const auto& t : w.trajectories) {
    for (std::size_t i = 0; i + 1 < t.fixes.size(); ++i) {
      if (distance(t.fixes[i].position, t.fixes[i + 1].position) < kStayDistanceM) ++stays;
      else ++expected;
    }
  }
  for (const auto& it : batch_match(w.network, w.trajectories, Heuristic::time_aware, kDefaultKnn, 4)) {
    ASSERT_TRUE(it.result) << it.error;
    searches += it.result->search.searches;
  }
  EXPECT_EQ(searches, expected);
  EXPECT_GT(expected, 1000u);
  (void)stays;
}

TEST(MatchedFile, RoundTrip) {
  const auto net = detour_road();
  const auto m = match_trajectory(net, detour_trip(), Heuristic::time_aware);
  std::ostringstream out;
  write_matched_header(out);
  write_matched(out, m);
  std::istringstream in(out.str());
  const auto recs = read_matched(in);
  const auto direct = to_records(m);
  ASSERT_EQ(recs.size(), direct.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    EXPECT_EQ(recs[i].trajectory_id, "detour");
    EXPECT_EQ(recs[i].pair_index, i);
    EXPECT_EQ(recs[i].segment_ids, direct[i].segment_ids);
    EXPECT_EQ(recs[i].flag, direct[i].flag);
    EXPECT_EQ(recs[i].heuristic, Heuristic::time_aware);
    EXPECT_NEAR(recs[i].path_time, direct[i].path_time, 5e-4);
  }
}
