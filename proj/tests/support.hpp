#ifndef TAMM_TESTS_SUPPORT_HPP
#define TAMM_TESTS_SUPPORT_HPP

// Network builders and independent oracles shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "tamm/eval.hpp"
#include "tamm/pipeline.hpp"
#include "tamm/roadnet.hpp"
#include "tamm/router.hpp"

namespace tamm::test {

inline const Projection kPisa{LatLon{43.7160, 10.4019}};

struct EdgeSpec {
  SegmentId id = 0;
  NodeId from = 0;
  NodeId to = 0;
  double speed = 10.0;
  std::string road_class = "primary";
  std::vector<GeoPoint> via = {};
};

/// Network with straight (or `via`-bent) segments between the given nodes.
/// Speed limit and speed both equal EdgeSpec::speed.
inline RoadNetwork make_network(const std::map<NodeId, GeoPoint>& nodes, const std::vector<EdgeSpec>& edges) {
  std::vector<SegmentRecord> recs;
  for (const auto& e : edges) {
    SegmentRecord r;
    r.id = e.id;
    r.from = e.from;
    r.to = e.to;
    r.road_class = e.road_class;
    r.speed_limit = e.speed;
    r.polyline.push_back(nodes.at(e.from));
    r.polyline.insert(r.polyline.end(), e.via.begin(), e.via.end());
    r.polyline.push_back(nodes.at(e.to));
    recs.push_back(std::move(r));
  }
  return RoadNetwork::build(kPisa, nodes, std::move(recs));
}

inline NodeIndex node_of(const RoadNetwork& net, NodeId id) { return *net.find_node(id); }
inline SegmentIndex seg_of(const RoadNetwork& net, SegmentId id) { return *net.find_segment(id); }

inline GpsFix fix_at(double t, GeoPoint p, std::optional<double> heading = std::nullopt,
                     std::optional<double> speed = std::nullopt) {
  GpsFix f;
  f.timestamp = t;
  f.position = p;
  f.heading = heading;
  f.speed = speed;
  return f;
}

// ---------------------------------------------------------------------------
// Geometry oracle: plain clamped point-to-segment distance, no shared code.

inline double point_segment_distance(GeoPoint p, GeoPoint a, GeoPoint b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double wx = p.x - a.x, wy = p.y - a.y;
  const double vv = vx * vx + vy * vy;
  double t = vv > 0 ? (wx * vx + wy * vy) / vv : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(p.x - (a.x + t * vx), p.y - (a.y + t * vy));
}

inline double point_polyline_distance(GeoPoint p, const std::vector<GeoPoint>& line) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < line.size(); ++i) best = std::min(best, point_segment_distance(p, line[i], line[i + 1]));
  return best;
}

/// Exhaustive k-nearest scan: ascending distance, ties by ascending segment id.
inline std::vector<std::pair<SegmentId, double>> brute_knn(const RoadNetwork& net, GeoPoint p, std::size_t k) {
  std::vector<std::pair<SegmentId, double>> all;
  for (const auto& s : net.segments()) all.emplace_back(s.id, point_polyline_distance(p, s.polyline));
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second < b.second : a.first < b.first;
  });
  all.resize(std::min(k, all.size()));
  return all;
}

// ---------------------------------------------------------------------------
// Gravity oracle over a given candidate set of (id, dist, ang).

struct GravityInput {
  SegmentId id;
  double dist;
  double ang;
};

inline std::vector<double> gravity_scores(const std::vector<GravityInput>& c) {
  double sd = 0, sa = 0;
  for (const auto& x : c) {
    sd += x.dist;
    sa += x.ang;
  }
  std::vector<double> out;
  for (const auto& x : c) {
    const double wd = sd > 0 ? 1.0 - x.dist / sd : 1.0;
    const double wa = sa > 0 ? 1.0 - x.ang / sa : 1.0;
    out.push_back(wd * wa);
  }
  return out;
}

inline SegmentId gravity_argmax(const std::vector<GravityInput>& c) {
  const auto gf = gravity_scores(c);
  std::size_t best = 0;
  for (std::size_t i = 1; i < c.size(); ++i) {
    const auto key = std::tuple(-gf[i], c[i].dist, c[i].id);
    const auto cur = std::tuple(-gf[best], c[best].dist, c[best].id);
    if (key < cur) best = i;
  }
  return c[best].id;
}

// ---------------------------------------------------------------------------
// Timecost oracles.

/// Step-by-step evaluation of the four Timecost lines.
inline double timecost_steps(double length, double travel_time, double alpha_deg, double linespeed) {
  const double alpha = alpha_deg * std::numbers::pi / 180.0;
  const double length_projected = length * std::cos(alpha);
  const double time_expected = length_projected / linespeed;
  const double length_expected = length * time_expected / travel_time;
  return std::abs(length_expected - length);
}

/// Closed form: length * |cos(alpha) * speed / linespeed - 1|.
inline double timecost_closed(double length, double speed, double alpha_deg, double linespeed) {
  return length * std::abs(std::cos(alpha_deg * std::numbers::pi / 180.0) * speed / linespeed - 1.0);
}

inline double heading_gap(double a, double b) {
  double d = std::fmod(std::abs(a - b), 360.0);
  return d > 180.0 ? 360.0 - d : d;
}

// ---------------------------------------------------------------------------
// Path enumeration oracle.

/// Every simple path (no repeated node) from s to t, as segment index lists.
template <RouteGraph G>
std::vector<std::vector<SegmentIndex>> simple_paths(const G& g, NodeIndex s, NodeIndex t) {
  std::vector<std::vector<SegmentIndex>> out;
  std::vector<SegmentIndex> cur;
  std::vector<bool> on(g.node_count(), false);
  std::function<void(NodeIndex)> dfs = [&](NodeIndex v) {
    if (v == t) {
      out.push_back(cur);
      return;
    }
    on[v] = true;
    for (SegmentIndex e : g.out_segments(v)) {
      const NodeIndex w = g.segment(e).to;
      if (on[w]) continue;
      cur.push_back(e);
      dfs(w);
      cur.pop_back();
    }
    on[v] = false;
  };
  dfs(s);
  return out;
}

/// Sequential time-aware cost of a path: each segment is priced with the
/// linespeed still needed from its tail node given the time spent so far.
/// Returns nullopt when the path exceeds the search's time budget.
template <RouteGraph G>
std::optional<double> sequential_timecost(const G& g, const std::vector<SegmentIndex>& path, const PairQuery& q) {
  const GeoPoint target = g.position(q.target);
  double elapsed = 0.0, cost = 0.0;
  for (SegmentIndex e : path) {
    const RoadSegment& s = g.segment(e);
    if (elapsed + s.travel_time > 10.0 * q.gps_travel_time) return std::nullopt;
    const double timeleft = q.gps_travel_time - elapsed;
    double ls = q.linespeed;
    if (timeleft > 1.0) {
      const GeoPoint from = g.position(s.from);
      const double rem = std::hypot(target.x - from.x, target.y - from.y) / timeleft;
      if (rem > 0.0) ls = rem;
    }
    cost += timecost_closed(s.length, s.speed, heading_gap(s.heading, q.heading), ls);
    elapsed += s.travel_time;
  }
  return cost;
}

struct OracleBest {
  std::vector<SegmentIndex> path;
  double cost = std::numeric_limits<double>::infinity();
  bool found = false;
};

/// Minimum of `cost(path)` over all simple paths; ties prefer fewer segments,
/// then the lexicographically smaller index sequence.
template <RouteGraph G, class Cost>
OracleBest enumerate_best(const G& g, NodeIndex s, NodeIndex t, Cost&& cost) {
  OracleBest best;
  for (auto& p : simple_paths(g, s, t)) {
    const std::optional<double> c = cost(p);
    if (!c) continue;
    const bool better = !best.found || *c < best.cost ||
                        (*c == best.cost && (p.size() < best.path.size() || (p.size() == best.path.size() && p < best.path)));
    if (better) {
      best.found = true;
      best.cost = *c;
      best.path = p;
    }
  }
  return best;
}

template <RouteGraph G>
double path_sum(const G& g, const std::vector<SegmentIndex>& p, double RoadSegment::*field) {
  double s = 0.0;
  for (SegmentIndex e : p) s += g.segment(e).*field;
  return s;
}

/// Random directed graph with up to `max_nodes` nodes in a 1 km square.
/// Segments are straight or bent through one interior vertex.
inline RoadNetwork random_graph(std::mt19937_64& rng, std::size_t max_nodes = 12, double edge_p = 0.3) {
  std::uniform_int_distribution<std::size_t> nn(4, max_nodes);
  std::uniform_real_distribution<double> coord(0.0, 1000.0), speed(3.0, 25.0), u(0.0, 1.0);
  const std::size_t n = nn(rng);
  std::map<NodeId, GeoPoint> nodes;
  for (std::size_t i = 0; i < n; ++i) nodes[static_cast<NodeId>(i + 1)] = {coord(rng), coord(rng)};
  std::vector<EdgeSpec> edges;
  SegmentId id = 1;
  for (const auto& [a, pa] : nodes) {
    for (const auto& [b, pb] : nodes) {
      if (a == b || u(rng) >= edge_p) continue;
      EdgeSpec e{id++, a, b, speed(rng)};
      if (u(rng) < 0.3) {
        const GeoPoint mid{(pa.x + pb.x) / 2, (pa.y + pb.y) / 2};
        e.via = {{mid.x + (u(rng) - 0.5) * 200.0, mid.y + (u(rng) - 0.5) * 200.0}};
      }
      edges.push_back(std::move(e));
    }
  }
  return make_network(nodes, edges);
}

/// Fixed reference world used by the detour tests: an eastbound road of
/// 600 m blocks at 10 m/s (nodes 1..11 at x = 0, 600, ...) with a bent
/// detour 5 -> 100 -> 6 above the block from x = 2400 to 3000, calibrated
/// so the detour takes 72 s against 60 s for the block.
inline RoadNetwork detour_road() {
  std::map<NodeId, GeoPoint> nodes;
  for (int i = 0; i <= 10; ++i) nodes[i + 1] = {600.0 * i, 0.0};
  nodes[100] = {2700.0, 200.0};
  std::vector<EdgeSpec> edges;
  for (int i = 0; i < 10; ++i) edges.push_back({i + 1, i + 1, i + 2, 10.0});
  const double leg = std::hypot(300.0, 200.0);
  const double detour_speed = 2.0 * leg / 72.0;
  edges.push_back({101, 5, 100, detour_speed});
  edges.push_back({102, 100, 6, detour_speed});
  return make_network(nodes, edges);
}

}  // namespace tamm::test

#endif  // TAMM_TESTS_SUPPORT_HPP
