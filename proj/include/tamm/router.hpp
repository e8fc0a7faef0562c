#ifndef TAMM_ROUTER_HPP
#define TAMM_ROUTER_HPP

#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "tamm/geo.hpp"
#include "tamm/matcher.hpp"
#include "tamm/roadnet.hpp"

namespace tamm {

/// Anything the searches can walk: RoadNetwork and SplitOverlay both qualify.
template <class G>
concept RouteGraph = requires(const G& g, NodeIndex n, SegmentIndex s) {
  { g.node_count() } -> std::convertible_to<std::size_t>;
  { g.position(n) } -> std::convertible_to<const GeoPoint&>;
  { g.segment(s) } -> std::convertible_to<const RoadSegment&>;
  { g.out_segments(n) } -> std::convertible_to<std::span<const SegmentIndex>>;
};

enum class Heuristic { time_aware, shortest, fastest };

inline std::string_view to_string(Heuristic h) {
  switch (h) {
    case Heuristic::time_aware: return "time-aware";
    case Heuristic::shortest: return "shortest";
    case Heuristic::fastest: return "fastest";
  }
  return "?";
}

inline std::optional<Heuristic> parse_heuristic(std::string_view s) {
  if (s == "time-aware" || s == "time_aware") return Heuristic::time_aware;
  if (s == "shortest") return Heuristic::shortest;
  if (s == "fastest") return Heuristic::fastest;
  return std::nullopt;
}

/// Remaining time (s) at or below which the adaptive linespeed is abandoned
/// for the pair's global linespeed.
inline constexpr double kTimeLeftEpsilon = 1.0;
/// Labels whose travel time exceeds this multiple of the GPS time are pruned.
inline constexpr double kSearchCutoffFactor = 10.0;

/// Mismatch (m) between a segment's length and the length it would have if
/// traversed at `linespeed` along `heading`:
///   projected = length * cos(alpha); t_exp = projected / linespeed;
///   expected = length * t_exp / travel_time; cost = |expected - length|.
/// alpha beyond 90 degrees gives a negative projection and a large cost.
inline double timecost(const RoadSegment& seg, double heading, double linespeed) {
  if (!(linespeed > 0.0)) throw Error(fmt::format("timecost: linespeed must be positive (got {})", linespeed));
  if (!(seg.travel_time > 0.0)) throw Error(fmt::format("timecost: segment {} has no travel time", seg.id));
  const double alpha = deg2rad(angular_difference(seg.heading, heading));
  const double length_projected = seg.length * std::cos(alpha);
  const double time_expected = length_projected / linespeed;
  const double length_expected = seg.length * time_expected / seg.travel_time;
  return std::abs(length_expected - seg.length);
}

struct PairQuery {
  NodeIndex source = kNoNode;
  NodeIndex target = kNoNode;
  double gps_travel_time = 0.0;  // s
  double straight_line = 0.0;    // m, between the two fixes
  double linespeed = 0.0;        // straight_line / gps_travel_time
  double heading = 0.0;          // bearing from the first fix to the second
};

inline PairQuery make_pair_query(NodeIndex source, NodeIndex target, const GpsFix& a, const GpsFix& b) {
  PairQuery q;
  q.source = source;
  q.target = target;
  q.gps_travel_time = b.timestamp - a.timestamp;
  if (!(q.gps_travel_time > 0.0)) throw Error("pair query needs increasing timestamps");
  q.straight_line = distance(a.position, b.position);
  q.linespeed = q.straight_line / q.gps_travel_time;
  q.heading = bearing(a.position, b.position);
  return q;
}

struct MatchedPath {
  bool found = false;
  std::vector<SegmentIndex> segments;
  double travel_time = 0.0;     // s, sum over segments
  double length = 0.0;          // m
  double total_timecost = 0.0;  // accumulated search cost (metric depends on heuristic)

  /// Straight-line speed implied by the path's travel time.
  double lspeed(double straight_line) const { return travel_time > 0.0 ? straight_line / travel_time : 0.0; }
};

struct SearchStats {
  std::size_t searches = 0;
  std::size_t settled = 0;
  std::size_t relaxed = 0;
};

namespace detail {

struct Label {
  double cost = std::numeric_limits<double>::infinity();
  double time = 0.0;
  std::uint32_t edges = 0;
  SegmentIndex via = kNoSegment;
  bool settled = false;
};

template <RouteGraph G>
std::vector<SegmentIndex> walk_back(const G& g, const std::vector<Label>& labels, NodeIndex v) {
  std::vector<SegmentIndex> path;
  while (labels[v].via != kNoSegment) {
    path.push_back(labels[v].via);
    v = g.segment(labels[v].via).from;
  }
  return {path.rbegin(), path.rend()};
}

/// Label-setting search from q.source to q.target. `edge_cost(seg, label)`
/// returns the cost of extending the label at seg.from by seg, or nullopt to
/// prune. Equal costs prefer fewer edges, then the lexicographically smaller
/// segment sequence.
template <RouteGraph G, class EdgeCost>
MatchedPath label_setting(const G& g, NodeIndex source, NodeIndex target, EdgeCost&& edge_cost,
                          SearchStats* stats) {
  if (stats) ++stats->searches;
  MatchedPath out;
  if (source == target) {
    out.found = true;
    return out;
  }

  std::vector<Label> labels(g.node_count());
  struct Entry {
    double cost;
    std::uint32_t edges;
    NodeIndex node;
  };
  auto worse = [](const Entry& a, const Entry& b) {
    if (a.cost != b.cost) return a.cost > b.cost;
    if (a.edges != b.edges) return a.edges > b.edges;
    return a.node > b.node;
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(worse)> heap(worse);
  labels[source].cost = 0.0;
  heap.push({0.0, 0, source});

  while (!heap.empty()) {
    const Entry e = heap.top();
    heap.pop();
    Label& at = labels[e.node];
    if (at.settled || e.cost != at.cost || e.edges != at.edges) continue;
    at.settled = true;
    if (stats) ++stats->settled;
    if (e.node == target) break;

    for (SegmentIndex s : g.out_segments(e.node)) {
      const RoadSegment& seg = g.segment(s);
      Label& next = labels[seg.to];
      if (next.settled) continue;
      const std::optional<double> w = edge_cost(seg, at);
      if (!w) continue;
      if (stats) ++stats->relaxed;
      const double cost = at.cost + *w;
      const std::uint32_t edges = at.edges + 1;
      bool better = cost < next.cost || (cost == next.cost && edges < next.edges);
      if (!better && cost == next.cost && edges == next.edges) {
        auto mine = walk_back(g, labels, e.node);
        mine.push_back(s);
        better = mine < walk_back(g, labels, seg.to);
      }
      if (better) {
        next.cost = cost;
        next.edges = edges;
        next.time = at.time + seg.travel_time;
        next.via = s;
        heap.push({cost, edges, seg.to});
      }
    }
  }

  if (!labels[target].settled) return out;
  out.found = true;
  out.segments = walk_back(g, labels, target);
  out.total_timecost = labels[target].cost;
  for (SegmentIndex s : out.segments) {
    out.travel_time += g.segment(s).travel_time;
    out.length += g.segment(s).length;
  }
  return out;
}

}  // namespace detail

/// Linespeed used to price an edge leaving a node reached after `elapsed`
/// seconds: the speed still needed to cover the straight line from `from`
/// to the target in the remaining time, or the pair's global linespeed once
/// the remaining time is exhausted.
inline double goal_linespeed(const PairQuery& q, const GeoPoint& from, const GeoPoint& target, double elapsed) {
  const double timeleft = q.gps_travel_time - elapsed;
  if (timeleft > kTimeLeftEpsilon) {
    const double ls = distance(from, target) / timeleft;
    if (ls > 0.0) return ls;
  }
  return q.linespeed;
}

/// Best-first search minimizing accumulated timecost, with the goal
/// linespeed re-estimated at every expanded node.
template <RouteGraph G>
MatchedPath time_aware_dijkstra(const G& g, const PairQuery& q, SearchStats* stats = nullptr) {
  if (!(q.gps_travel_time > 0.0) || !std::isfinite(q.linespeed)) throw Error("invalid pair query");
  const GeoPoint target_pos = g.position(q.target);
  const double time_limit = kSearchCutoffFactor * q.gps_travel_time;
  return detail::label_setting(
      g, q.source, q.target,
      [&](const RoadSegment& seg, const detail::Label& at) -> std::optional<double> {
        if (at.time + seg.travel_time > time_limit) return std::nullopt;
        const double ls = goal_linespeed(q, g.position(seg.from), target_pos, at.time);
        return timecost(seg, q.heading, ls);
      },
      stats);
}

template <RouteGraph G>
MatchedPath shortest_path(const G& g, NodeIndex source, NodeIndex target, SearchStats* stats = nullptr) {
  return detail::label_setting(
      g, source, target, [](const RoadSegment& seg, const detail::Label&) -> std::optional<double> { return seg.length; },
      stats);
}

template <RouteGraph G>
MatchedPath fastest_path(const G& g, NodeIndex source, NodeIndex target, SearchStats* stats = nullptr) {
  return detail::label_setting(
      g, source, target,
      [](const RoadSegment& seg, const detail::Label&) -> std::optional<double> { return seg.travel_time; }, stats);
}

template <RouteGraph G>
MatchedPath route(const G& g, Heuristic h, const PairQuery& q, SearchStats* stats = nullptr) {
  switch (h) {
    case Heuristic::time_aware: return time_aware_dijkstra(g, q, stats);
    case Heuristic::shortest: return shortest_path(g, q.source, q.target, stats);
    case Heuristic::fastest: return fastest_path(g, q.source, q.target, stats);
  }
  throw Error("unknown heuristic");
}

/// External segment ids along a path with consecutive pieces of the same
/// base segment collapsed.
template <RouteGraph G>
std::vector<SegmentId> parent_ids(const G& g, std::span<const SegmentIndex> path) {
  std::vector<SegmentId> ids;
  for (SegmentIndex s : path) {
    const SegmentId id = g.segment(s).id;
    if (ids.empty() || ids.back() != id) ids.push_back(id);
  }
  return ids;
}

}  // namespace tamm

#endif  // TAMM_ROUTER_HPP
