#ifndef TAMM_GEO_HPP
#define TAMM_GEO_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

namespace tamm {

/// Local planar position in meters (x east, y north).
struct GeoPoint {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;
};

inline constexpr double kEarthRadiusM = 6371008.8;

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

inline double distance(const GeoPoint& a, const GeoPoint& b) {
  return std::hypot(b.x - a.x, b.y - a.y);
}

/// Normalizes an angle in degrees to [0, 360).
inline double normalize_heading(double deg) {
  double h = std::fmod(deg, 360.0);
  if (h < 0.0) h += 360.0;
  if (h >= 360.0) h = 0.0;
  return h;
}

/// Compass bearing from a to b: 0 is north, clockwise, in [0, 360).
inline double bearing(const GeoPoint& a, const GeoPoint& b) {
  return normalize_heading(rad2deg(std::atan2(b.x - a.x, b.y - a.y)));
}

/// Equirectangular projection around a fixed origin. Exactly invertible,
/// so lat/lon -> planar -> lat/lon round trips to floating-point precision.
class Projection {
 public:
  Projection() = default;
  explicit Projection(LatLon origin)
      : origin_(origin), cos_lat0_(std::cos(deg2rad(origin.lat))) {}

  LatLon origin() const { return origin_; }

  GeoPoint forward(LatLon p) const {
    return {kEarthRadiusM * deg2rad(p.lon - origin_.lon) * cos_lat0_,
            kEarthRadiusM * deg2rad(p.lat - origin_.lat)};
  }

  LatLon inverse(GeoPoint p) const {
    return {origin_.lat + rad2deg(p.y / kEarthRadiusM),
            origin_.lon + rad2deg(p.x / (kEarthRadiusM * cos_lat0_))};
  }

 private:
  LatLon origin_{};
  double cos_lat0_ = 1.0;
};

/// Nearest point of a polyline to a query point.
struct PolylineProjection {
  GeoPoint point;
  double distance = std::numeric_limits<double>::infinity();
  double offset = 0.0;  // arc length from the first vertex to `point`
};

inline PolylineProjection project_onto_polyline(std::span<const GeoPoint> line,
                                                const GeoPoint& p) {
  PolylineProjection best;
  if (line.empty()) return best;
  if (line.size() == 1) {
    best.point = line.front();
    best.distance = distance(p, line.front());
    return best;
  }
  double walked = 0.0;
  for (std::size_t i = 0; i + 1 < line.size(); ++i) {
    const GeoPoint& a = line[i];
    const GeoPoint& b = line[i + 1];
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    const double len = std::sqrt(len2);
    double t = 0.0;
    if (len2 > 0.0) {
      t = std::clamp(((p.x - a.x) * dx + (p.y - a.y) * dy) / len2, 0.0, 1.0);
    }
    const GeoPoint q{a.x + t * dx, a.y + t * dy};
    const double d = distance(p, q);
    if (d < best.distance) {
      best = {q, d, walked + t * len};
    }
    walked += len;
  }
  return best;
}

inline double polyline_length(std::span<const GeoPoint> line) {
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < line.size(); ++i) {
    total += distance(line[i], line[i + 1]);
  }
  return total;
}

/// Splits a polyline at arc offset `at`, returning the head [0, at] and the
/// tail [at, end]. Both parts share the cut point.
inline std::pair<std::vector<GeoPoint>, std::vector<GeoPoint>> cut_polyline(
    std::span<const GeoPoint> line, double at) {
  std::vector<GeoPoint> head;
  std::vector<GeoPoint> tail;
  double walked = 0.0;
  std::size_t i = 0;
  head.push_back(line.front());
  for (; i + 1 < line.size(); ++i) {
    const double len = distance(line[i], line[i + 1]);
    if (walked + len >= at) break;
    walked += len;
    head.push_back(line[i + 1]);
  }
  if (i + 1 >= line.size()) {
    // `at` beyond the end; the tail degenerates to the last vertex
    tail.push_back(line.back());
    return {std::move(head), std::move(tail)};
  }
  const double len = distance(line[i], line[i + 1]);
  const double t = len > 0.0 ? std::clamp((at - walked) / len, 0.0, 1.0) : 0.0;
  const GeoPoint cut{line[i].x + t * (line[i + 1].x - line[i].x),
                     line[i].y + t * (line[i + 1].y - line[i].y)};
  if (!(head.back() == cut)) head.push_back(cut);
  tail.push_back(cut);
  for (std::size_t j = i + 1; j < line.size(); ++j) {
    if (!(tail.back() == line[j])) tail.push_back(line[j]);
  }
  return {std::move(head), std::move(tail)};
}

struct BoundingBox {
  double min_x = std::numeric_limits<double>::infinity();
  double min_y = std::numeric_limits<double>::infinity();
  double max_x = -std::numeric_limits<double>::infinity();
  double max_y = -std::numeric_limits<double>::infinity();

  void expand(const GeoPoint& p) {
    min_x = std::min(min_x, p.x);
    min_y = std::min(min_y, p.y);
    max_x = std::max(max_x, p.x);
    max_y = std::max(max_y, p.y);
  }
  void expand(const BoundingBox& b) {
    min_x = std::min(min_x, b.min_x);
    min_y = std::min(min_y, b.min_y);
    max_x = std::max(max_x, b.max_x);
    max_y = std::max(max_y, b.max_y);
  }
  double center_x() const { return 0.5 * (min_x + max_x); }
  double center_y() const { return 0.5 * (min_y + max_y); }

  /// Lower bound on the distance from p to anything inside the box.
  double min_distance(const GeoPoint& p) const {
    const double dx = std::max({min_x - p.x, 0.0, p.x - max_x});
    const double dy = std::max({min_y - p.y, 0.0, p.y - max_y});
    return std::hypot(dx, dy);
  }
};

}  // namespace tamm

#endif  // TAMM_GEO_HPP
