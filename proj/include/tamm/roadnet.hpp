#ifndef TAMM_ROADNET_HPP
#define TAMM_ROADNET_HPP

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "tamm/csv.hpp"
#include "tamm/geo.hpp"
#include "tamm/rtree.hpp"

namespace tamm {

using NodeIndex = std::uint32_t;
using SegmentIndex = std::uint32_t;
using NodeId = std::int64_t;
using SegmentId = std::int64_t;

inline constexpr NodeIndex kNoNode = static_cast<NodeIndex>(-1);
inline constexpr SegmentIndex kNoSegment = static_cast<SegmentIndex>(-1);

/// A directed road segment. Two-way streets are two opposite segments.
struct RoadSegment {
  SegmentId id = 0;
  NodeIndex from = kNoNode;
  NodeIndex to = kNoNode;
  std::vector<GeoPoint> polyline;
  double length = 0.0;      // meters
  double heading = 0.0;     // degrees, bearing from first to last vertex
  std::string road_class;
  double speed_limit = 0.0; // m/s, from the network file
  double speed = 0.0;       // m/s, estimated or default
  double travel_time = 0.0; // seconds, length / speed
  // Base segment this one was cut from; equals its own index for base segments.
  SegmentIndex parent = kNoSegment;

  void set_speed(double mps) {
    speed = mps;
    travel_time = length / speed;
  }
};

struct RoadNode {
  NodeId id = 0;
  GeoPoint position;
};

/// Input record for building a network in planar coordinates.
struct SegmentRecord {
  SegmentId id = 0;
  NodeId from = 0;
  NodeId to = 0;
  std::string road_class;
  double speed_limit = 0.0;
  std::vector<GeoPoint> polyline;
};

/// Directed road graph with a spatial index over its segments. Immutable
/// after construction except for segment speeds.
class RoadNetwork {
 public:
  RoadNetwork() = default;

  /// Builds from planar records. Node positions come from the first/last
  /// polyline vertices. Zero-length segments are dropped with a warning.
  static RoadNetwork build(const Projection& projection, std::vector<SegmentRecord> records,
                           std::vector<std::string>* warnings = nullptr,
                           double node_tolerance_m = 0.5) {
    return build(projection, std::nullopt, std::move(records), warnings, node_tolerance_m);
  }

  /// Builds against an explicit node table; every segment endpoint must
  /// reference a listed node lying within tolerance of the polyline end.
  static RoadNetwork build(const Projection& projection, std::optional<std::map<NodeId, GeoPoint>> nodes,
                           std::vector<SegmentRecord> records,
                           std::vector<std::string>* warnings = nullptr,
                           double node_tolerance_m = 0.5) {
    RoadNetwork net;
    net.projection_ = projection;
    std::sort(records.begin(), records.end(),
              [](const SegmentRecord& a, const SegmentRecord& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < records.size(); ++i) {
      if (records[i].id == records[i - 1].id) {
        throw Error(fmt::format("duplicate segment id {}", records[i].id));
      }
    }

    const bool explicit_nodes = nodes.has_value();
    std::map<NodeId, GeoPoint> node_pos = explicit_nodes ? std::move(*nodes) : std::map<NodeId, GeoPoint>{};
    auto bind_node = [&](NodeId id, const GeoPoint& p, SegmentId seg) {
      if (explicit_nodes && !node_pos.contains(id)) {
        throw Error(fmt::format("segment {} references missing node {}", seg, id));
      }
      auto [it, inserted] = node_pos.emplace(id, p);
      if (!inserted && distance(it->second, p) > node_tolerance_m) {
        throw Error(fmt::format("node {} has inconsistent coordinates in segment {} ({:.3f} m apart)",
                                id, seg, distance(it->second, p)));
      }
    };
    std::vector<SegmentRecord> kept;
    kept.reserve(records.size());
    for (auto& r : records) {
      if (r.polyline.size() < 2) {
        throw Error(fmt::format("segment {} needs at least two vertices", r.id));
      }
      if (polyline_length(r.polyline) <= 0.0) {
        if (warnings) warnings->push_back(fmt::format("segment {} has zero length; dropped", r.id));
        continue;
      }
      if (!(r.speed_limit > 0.0) || !std::isfinite(r.speed_limit)) {
        throw Error(fmt::format("segment {} speed limit must be positive", r.id));
      }
      bind_node(r.from, r.polyline.front(), r.id);
      bind_node(r.to, r.polyline.back(), r.id);
      kept.push_back(std::move(r));
    }

    for (const auto& [id, pos] : node_pos) {
      net.node_index_.emplace(id, static_cast<NodeIndex>(net.nodes_.size()));
      net.nodes_.push_back({id, pos});
    }
    net.adjacency_.assign(net.nodes_.size(), {});
    net.segments_.reserve(kept.size());
    for (auto& r : kept) {
      RoadSegment s;
      s.id = r.id;
      s.from = net.node_index_.at(r.from);
      s.to = net.node_index_.at(r.to);
      s.polyline = std::move(r.polyline);
      // endpoints snap to the canonical node positions
      s.polyline.front() = net.nodes_[s.from].position;
      s.polyline.back() = net.nodes_[s.to].position;
      s.length = polyline_length(s.polyline);
      s.heading = bearing(s.polyline.front(), s.polyline.back());
      s.road_class = std::move(r.road_class);
      s.speed_limit = r.speed_limit;
      s.parent = static_cast<SegmentIndex>(net.segments_.size());
      s.set_speed(r.speed_limit);
      net.segment_index_.emplace(s.id, s.parent);
      net.adjacency_[s.from].push_back(s.parent);
      net.segments_.push_back(std::move(s));
    }

    std::vector<BoundingBox> boxes;
    boxes.reserve(net.segments_.size());
    for (const auto& s : net.segments_) {
      BoundingBox b;
      for (const auto& p : s.polyline) b.expand(p);
      boxes.push_back(b);
    }
    net.index_ = PackedRTree(boxes);
    return net;
  }

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t segment_count() const { return segments_.size(); }
  bool empty() const { return segments_.empty(); }

  const RoadNode& node(NodeIndex n) const { return nodes_.at(n); }
  const GeoPoint& position(NodeIndex n) const { return nodes_[n].position; }
  const RoadSegment& segment(SegmentIndex s) const { return segments_[s]; }
  std::span<const RoadSegment> segments() const { return segments_; }
  std::span<const RoadNode> nodes() const { return nodes_; }
  std::span<const SegmentIndex> out_segments(NodeIndex n) const { return adjacency_[n]; }
  const Projection& projection() const { return projection_; }
  const PackedRTree& index() const { return index_; }

  std::optional<SegmentIndex> find_segment(SegmentId id) const {
    auto it = segment_index_.find(id);
    if (it == segment_index_.end()) return std::nullopt;
    return it->second;
  }
  std::optional<NodeIndex> find_node(NodeId id) const {
    auto it = node_index_.find(id);
    if (it == node_index_.end()) return std::nullopt;
    return it->second;
  }

  void set_speed(SegmentIndex s, double mps) { segments_.at(s).set_speed(mps); }

 private:
  Projection projection_;
  std::vector<RoadNode> nodes_;
  std::vector<RoadSegment> segments_;
  std::vector<std::vector<SegmentIndex>> adjacency_;
  std::unordered_map<NodeId, NodeIndex> node_index_;
  std::unordered_map<SegmentId, SegmentIndex> segment_index_;
  PackedRTree index_;
};

/// Segment hit returned by a nearest-segment query.
struct SegmentHit {
  SegmentIndex segment = kNoSegment;
  double distance = 0.0;
};

inline double segment_distance(const RoadNetwork& net, SegmentIndex s, const GeoPoint& p) {
  return project_onto_polyline(net.segment(s).polyline, p).distance;
}

/// The min(k, |E|) segments nearest to p, ascending by clamped point-to-polyline
/// distance, ties by ascending segment id.
inline std::vector<SegmentHit> k_nearest_segments(const RoadNetwork& net, const GeoPoint& p,
                                                  std::size_t k, IndexQueryStats* stats = nullptr) {
  if (net.empty()) throw Error("k-nearest query on an empty network");
  if (k == 0) throw Error("k must be at least 1");
  auto raw = net.index().nearest(
      p, k, [&](std::uint32_t s) { return segment_distance(net, s, p); }, stats);
  std::vector<SegmentHit> out;
  out.reserve(raw.size());
  for (auto [s, d] : raw) out.push_back({s, d});
  return out;
}

// ---------------------------------------------------------------------------
// Network file: CSV `segment_id,from_node,to_node,road_class,speed_limit_mps,wkt`
// with a WKT LINESTRING of lon/lat pairs.

inline const std::vector<std::string>& network_header() {
  static const std::vector<std::string> h{"segment_id", "from_node", "to_node",
                                          "road_class", "speed_limit_mps", "wkt"};
  return h;
}

/// Parses `LINESTRING (lon lat, lon lat, ...)`. Returns std::nullopt on syntax errors.
inline std::optional<std::vector<LatLon>> parse_wkt_linestring(std::string_view wkt) {
  wkt = csv::trim(wkt);
  constexpr std::string_view kTag = "LINESTRING";
  if (wkt.size() < kTag.size()) return std::nullopt;
  for (std::size_t i = 0; i < kTag.size(); ++i) {
    if (std::toupper(static_cast<unsigned char>(wkt[i])) != kTag[i]) return std::nullopt;
  }
  wkt.remove_prefix(kTag.size());
  wkt = csv::trim(wkt);
  if (wkt.size() < 2 || wkt.front() != '(' || wkt.back() != ')') return std::nullopt;
  wkt = wkt.substr(1, wkt.size() - 2);

  std::vector<LatLon> out;
  while (!wkt.empty()) {
    const auto comma = wkt.find(',');
    std::string_view pair = csv::trim(wkt.substr(0, comma));
    wkt = comma == std::string_view::npos ? std::string_view{} : wkt.substr(comma + 1);
    const auto space = pair.find_first_of(" \t");
    if (space == std::string_view::npos) return std::nullopt;
    auto lon = csv::to_double(pair.substr(0, space));
    auto lat = csv::to_double(csv::trim(pair.substr(space + 1)));
    if (!lon || !lat || !std::isfinite(*lon) || !std::isfinite(*lat)) return std::nullopt;
    out.push_back({*lat, *lon});
    if (comma == std::string_view::npos) break;
  }
  if (out.size() < 2) return std::nullopt;
  return out;
}

/// Loads a network file. The planar projection is centered on the mean of
/// the node coordinates. Non-fatal problems are appended to `warnings`.
inline RoadNetwork load_network(std::istream& in, const std::string& source = "network",
                                std::vector<std::string>* warnings = nullptr) {
  csv::Reader reader(in, source);
  reader.expect_header(network_header());

  struct Raw {
    SegmentRecord rec;
    std::vector<LatLon> geometry;
    std::size_t line;
  };
  std::vector<Raw> raws;
  std::map<SegmentId, std::size_t> seen;
  std::map<NodeId, LatLon> node_ll;
  while (auto rec = reader.next()) {
    Raw r;
    r.line = reader.line();
    r.rec.id = reader.integer(*rec, 0);
    r.rec.from = reader.integer(*rec, 1);
    r.rec.to = reader.integer(*rec, 2);
    r.rec.road_class = std::string(csv::trim((*rec)[3]));
    if (r.rec.road_class.empty()) reader.fail(3, "empty road class");
    r.rec.speed_limit = reader.number(*rec, 4);
    if (!(r.rec.speed_limit > 0.0) || !std::isfinite(r.rec.speed_limit)) {
      reader.fail(4, "speed limit must be positive");
    }
    auto geom = parse_wkt_linestring((*rec)[5]);
    if (!geom) reader.fail(5, "expected LINESTRING with at least two lon/lat pairs");
    r.geometry = std::move(*geom);
    if (auto [it, inserted] = seen.emplace(r.rec.id, r.line); !inserted) {
      throw FormatError(source, r.line, "segment_id",
                        fmt::format("duplicate segment id {} (first on line {})", r.rec.id, it->second));
    }
    node_ll.emplace(r.rec.from, r.geometry.front());
    node_ll.emplace(r.rec.to, r.geometry.back());
    raws.push_back(std::move(r));
  }

  LatLon centroid{};
  if (!node_ll.empty()) {
    for (const auto& [id, ll] : node_ll) {
      centroid.lat += ll.lat;
      centroid.lon += ll.lon;
    }
    centroid.lat /= static_cast<double>(node_ll.size());
    centroid.lon /= static_cast<double>(node_ll.size());
  }
  const Projection projection(centroid);

  std::vector<SegmentRecord> records;
  records.reserve(raws.size());
  for (auto& r : raws) {
    r.rec.polyline.reserve(r.geometry.size());
    for (const auto& ll : r.geometry) r.rec.polyline.push_back(projection.forward(ll));
    records.push_back(std::move(r.rec));
  }
  return RoadNetwork::build(projection, std::move(records), warnings);
}

inline RoadNetwork load_network_file(const std::string& path, std::vector<std::string>* warnings = nullptr) {
  auto in = csv::open_input(path);
  return load_network(in, path, warnings);
}

/// Writes the network in the load format; coordinates use round-trip precision.
inline void write_network(std::ostream& out, const RoadNetwork& net) {
  out << fmt::format("{}\n", fmt::join(network_header(), ","));
  for (const auto& s : net.segments()) {
    std::string wkt = "LINESTRING(";
    for (std::size_t i = 0; i < s.polyline.size(); ++i) {
      const LatLon ll = net.projection().inverse(s.polyline[i]);
      if (i) wkt += ", ";
      wkt += fmt::format("{} {}", ll.lon, ll.lat);
    }
    wkt += ")";
    out << fmt::format("{},{},{},{},{},{}\n", s.id, net.node(s.from).id, net.node(s.to).id,
                       csv::quote(s.road_class), s.speed_limit, csv::quote(wkt));
  }
}

// ---------------------------------------------------------------------------

/// Per-query view of a network in which segments can be cut at projection
/// points. The base network is never modified; cut segments are hidden and
/// replaced by a chain of pieces that inherit class and speed.
class SplitOverlay {
 public:
  /// Cuts closer than this to an endpoint or an existing cut reuse that node.
  static constexpr double kSnapM = 1e-6;

  explicit SplitOverlay(const RoadNetwork& base) : base_(&base) {}

  const RoadNetwork& base() const { return *base_; }

  std::size_t node_count() const { return base_->node_count() + extra_nodes_.size(); }
  std::size_t segment_count() const { return base_->segment_count() + extra_segments_.size(); }

  const GeoPoint& position(NodeIndex n) const {
    return n < base_->node_count() ? base_->position(n) : extra_nodes_[n - base_->node_count()];
  }

  const RoadSegment& segment(SegmentIndex s) const {
    return s < base_->segment_count() ? base_->segment(s)
                                      : extra_segments_[s - base_->segment_count()];
  }

  std::span<const SegmentIndex> out_segments(NodeIndex n) const {
    if (auto it = out_override_.find(n); it != out_override_.end()) return it->second;
    return base_->out_segments(n);
  }

  /// Cuts base segment `seg` at the projection of p and returns the node at
  /// the cut. A projection at (or clamped to) an endpoint returns that
  /// endpoint and adds nothing.
  NodeIndex split(SegmentIndex seg, const GeoPoint& p) {
    const RoadSegment& s = base_->segment(seg);
    const PolylineProjection proj = project_onto_polyline(s.polyline, p);
    const double at = proj.offset;
    if (at <= kSnapM) return s.from;
    if (at >= s.length - kSnapM) return s.to;

    auto& cuts = cuts_[seg];
    for (const auto& c : cuts) {
      if (std::abs(c.offset - at) <= kSnapM) return c.node;
    }
    const NodeIndex node = static_cast<NodeIndex>(node_count());
    extra_nodes_.push_back(proj.point);
    cuts.push_back({at, node});
    std::sort(cuts.begin(), cuts.end(), [](const Cut& a, const Cut& b) { return a.offset < b.offset; });
    rebuild(seg);
    return node;
  }

 private:
  struct Cut {
    double offset;
    NodeIndex node;
  };

  void rebuild(SegmentIndex seg) {
    const RoadSegment& s = base_->segment(seg);
    const auto& cuts = cuts_.at(seg);

    std::vector<double> offsets{0.0};
    std::vector<NodeIndex> nodes{s.from};
    for (const auto& c : cuts) {
      offsets.push_back(c.offset);
      nodes.push_back(c.node);
    }
    offsets.push_back(s.length);
    nodes.push_back(s.to);

    std::vector<SegmentIndex> pieces;
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
      RoadSegment piece;
      piece.id = s.id;
      piece.from = nodes[i];
      piece.to = nodes[i + 1];
      auto rest = cut_polyline(s.polyline, offsets[i]).second;
      piece.polyline = cut_polyline(rest, offsets[i + 1] - offsets[i]).first;
      piece.polyline.front() = position(piece.from);
      piece.polyline.back() = position(piece.to);
      piece.length = offsets[i + 1] - offsets[i];
      piece.heading = bearing(piece.polyline.front(), piece.polyline.back());
      piece.road_class = s.road_class;
      piece.speed_limit = s.speed_limit;
      piece.parent = seg;
      piece.set_speed(s.speed);
      pieces.push_back(static_cast<SegmentIndex>(segment_count()));
      extra_segments_.push_back(std::move(piece));
    }

    // the base segment's tail node now leaves through the first piece
    std::vector<SegmentIndex> from_list(out_segments(s.from).begin(), out_segments(s.from).end());
    std::replace_if(
        from_list.begin(), from_list.end(),
        [&](SegmentIndex x) { return x == seg || (x >= base_->segment_count() && segment(x).parent == seg); },
        pieces.front());
    out_override_[s.from] = std::move(from_list);
    for (std::size_t i = 1; i + 1 < nodes.size(); ++i) out_override_[nodes[i]] = {pieces[i]};
  }

  const RoadNetwork* base_;
  std::vector<GeoPoint> extra_nodes_;
  std::vector<RoadSegment> extra_segments_;
  std::unordered_map<SegmentIndex, std::vector<Cut>> cuts_;
  std::unordered_map<NodeIndex, std::vector<SegmentIndex>> out_override_;
};

}  // namespace tamm

#endif  // TAMM_ROADNET_HPP
