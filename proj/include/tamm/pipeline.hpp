#ifndef TAMM_PIPELINE_HPP
#define TAMM_PIPELINE_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>

#include "tamm/csv.hpp"
#include "tamm/matcher.hpp"
#include "tamm/roadnet.hpp"
#include "tamm/router.hpp"

namespace tamm {

/// Consecutive fixes closer than this (m) are a stay: no path is reconstructed.
inline constexpr double kStayDistanceM = 10.0;

enum class PairFlag { ok, stay, no_path };

inline std::string_view to_string(PairFlag f) {
  switch (f) {
    case PairFlag::ok: return "ok";
    case PairFlag::stay: return "stay";
    case PairFlag::no_path: return "no_path";
  }
  return "?";
}

/// Reconstruction between fixes i and i+1.
struct PairResult {
  std::size_t index = 0;
  PairFlag flag = PairFlag::ok;
  double gps_time = 0.0;   // s
  double path_time = 0.0;  // s
  MatchedPath path;        // segment indices refer to the pair's overlay
  std::vector<SegmentId> segment_ids;

  double delta() const { return gps_time - path_time; }
};

struct MatchedTrajectory {
  std::string trajectory_id;
  Heuristic heuristic = Heuristic::time_aware;
  std::vector<MatchedPoint> points;
  std::vector<PairResult> pairs;
  SearchStats search;
};

/// Checks the trajectory invariants: finite positions, strictly increasing timestamps.
inline void validate(const Trajectory& traj) {
  for (std::size_t i = 0; i < traj.fixes.size(); ++i) {
    const GpsFix& f = traj.fixes[i];
    if (!std::isfinite(f.timestamp) || !std::isfinite(f.position.x) || !std::isfinite(f.position.y)) {
      throw Error(fmt::format("trajectory {}: fix {} is not finite", traj.id, i));
    }
    if (i > 0 && !(f.timestamp > traj.fixes[i - 1].timestamp)) {
      throw Error(fmt::format("trajectory {}: timestamps must strictly increase at fix {}", traj.id, i));
    }
  }
}

/// Matches every fix, then reconstructs each consecutive pair independently
/// on its own split overlay. `net` must already carry the learned speeds.
inline MatchedTrajectory match_trajectory(const RoadNetwork& net, const Trajectory& raw, Heuristic heuristic,
                                          std::size_t k = kDefaultKnn) {
  validate(raw);
  MatchedTrajectory out;
  out.trajectory_id = raw.id;
  out.heuristic = heuristic;
  if (raw.fixes.empty()) return out;

  const Trajectory traj = derive_headings(raw);
  out.points.reserve(traj.fixes.size());
  for (std::size_t i = 0; i < traj.fixes.size(); ++i) {
    try {
      out.points.push_back(match_point(net, traj.fixes[i], k));
    } catch (const Error& e) {
      throw Error(fmt::format("trajectory {}: fix {} could not be matched: {}", traj.id, i, e.what()));
    }
  }

  for (std::size_t i = 0; i + 1 < out.points.size(); ++i) {
    const MatchedPoint& a = out.points[i];
    const MatchedPoint& b = out.points[i + 1];
    PairResult pr;
    pr.index = i;
    pr.gps_time = b.fix.timestamp - a.fix.timestamp;
    if (distance(a.fix.position, b.fix.position) < kStayDistanceM) {
      pr.flag = PairFlag::stay;
      pr.path.found = true;
      out.pairs.push_back(std::move(pr));
      continue;
    }
    SplitOverlay overlay(net);
    const NodeIndex source = overlay.split(a.segment, a.projection);
    const NodeIndex target = overlay.split(b.segment, b.projection);
    const PairQuery q = make_pair_query(source, target, a.fix, b.fix);
    pr.path = route(overlay, heuristic, q, &out.search);
    if (!pr.path.found) {
      pr.flag = PairFlag::no_path;
    } else {
      pr.path_time = pr.path.travel_time;
      pr.segment_ids = parent_ids(overlay, std::span<const SegmentIndex>(pr.path.segments));
    }
    out.pairs.push_back(std::move(pr));
  }
  return out;
}

struct BatchItem {
  std::optional<MatchedTrajectory> result;
  std::string error;  // set when the trajectory was rejected
};

/// Matches trajectories on `workers` threads. Output order equals input
/// order and is independent of the worker count.
inline std::vector<BatchItem> batch_match(const RoadNetwork& net, const std::vector<Trajectory>& trajectories,
                                          Heuristic heuristic, std::size_t k = kDefaultKnn,
                                          std::size_t workers = 1) {
  std::vector<BatchItem> out(trajectories.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < trajectories.size(); i = next++) {
      try {
        out[i].result = match_trajectory(net, trajectories[i], heuristic, k);
      } catch (const std::exception& e) {
        out[i].error = e.what();
      }
    }
  };
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(1, trajectories.size()));
  if (workers == 1) {
    work();
    return out;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  return out;
}

// ---------------------------------------------------------------------------
// Matched output: `traj_id,pair_index,gps_time_s,path_time_s,heuristic,segment_ids,flag`
// with ';'-joined segment ids.

inline const std::vector<std::string>& matched_header() {
  static const std::vector<std::string> h{"traj_id",   "pair_index", "gps_time_s", "path_time_s",
                                          "heuristic", "segment_ids", "flag"};
  return h;
}

inline void write_matched_header(std::ostream& out) { out << fmt::format("{}\n", fmt::join(matched_header(), ",")); }

inline void write_matched(std::ostream& out, const MatchedTrajectory& m) {
  for (const auto& p : m.pairs) {
    out << fmt::format("{},{},{:.3f},{:.3f},{},{},{}\n", csv::quote(m.trajectory_id), p.index, p.gps_time,
                       p.path_time, to_string(m.heuristic), fmt::join(p.segment_ids, ";"), to_string(p.flag));
  }
}

/// One row of the matched output file.
struct PairRecord {
  std::string trajectory_id;
  std::size_t pair_index = 0;
  double gps_time = 0.0;
  double path_time = 0.0;
  Heuristic heuristic = Heuristic::time_aware;
  std::vector<SegmentId> segment_ids;
  PairFlag flag = PairFlag::ok;
};

inline std::vector<PairRecord> read_matched(std::istream& in, const std::string& source = "matched") {
  csv::Reader reader(in, source);
  reader.expect_header(matched_header());
  std::vector<PairRecord> out;
  while (auto rec = reader.next()) {
    PairRecord r;
    r.trajectory_id = std::string(csv::trim((*rec)[0]));
    const auto idx = reader.integer(*rec, 1);
    if (idx < 0) reader.fail(1, "pair index must be non-negative");
    r.pair_index = static_cast<std::size_t>(idx);
    r.gps_time = reader.number(*rec, 2);
    r.path_time = reader.number(*rec, 3);
    auto h = parse_heuristic(csv::trim((*rec)[4]));
    if (!h) reader.fail(4, fmt::format("unknown heuristic '{}'", (*rec)[4]));
    r.heuristic = *h;
    std::string_view ids = csv::trim((*rec)[5]);
    while (!ids.empty()) {
      const auto semi = ids.find(';');
      auto v = csv::to_int(ids.substr(0, semi));
      if (!v) reader.fail(5, "malformed segment id list");
      r.segment_ids.push_back(*v);
      ids = semi == std::string_view::npos ? std::string_view{} : ids.substr(semi + 1);
    }
    const auto flag = csv::trim((*rec)[6]);
    if (flag == "ok") r.flag = PairFlag::ok;
    else if (flag == "stay") r.flag = PairFlag::stay;
    else if (flag == "no_path") r.flag = PairFlag::no_path;
    else reader.fail(6, fmt::format("unknown flag '{}'", flag));
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<PairRecord> to_records(const MatchedTrajectory& m) {
  std::vector<PairRecord> out;
  for (const auto& p : m.pairs) {
    out.push_back({m.trajectory_id, p.index, p.gps_time, p.path_time, m.heuristic, p.segment_ids, p.flag});
  }
  return out;
}

}  // namespace tamm

#endif  // TAMM_PIPELINE_HPP
