#ifndef TAMM_MATCHER_HPP
#define TAMM_MATCHER_HPP

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "tamm/geo.hpp"
#include "tamm/roadnet.hpp"

namespace tamm {

inline constexpr std::size_t kDefaultKnn = 8;

struct GpsFix {
  double timestamp = 0.0;  // seconds
  GeoPoint position;
  std::optional<double> speed;    // m/s
  std::optional<double> heading;  // degrees in [0, 360)
};

struct Trajectory {
  std::string id;
  std::string user_id;
  std::vector<GpsFix> fixes;
};

/// Smallest angle between two headings, in [0, 180].
inline double angular_difference(double a, double b) {
  const double d = std::fmod(std::abs(a - b), 360.0);
  return std::min(d, 360.0 - d);
}

/// Fills in missing headings with the bearing toward the next fix that has
/// moved; the last fix inherits the previous bearing. Recorded headings are
/// kept (normalized).
inline Trajectory derive_headings(Trajectory traj) {
  auto& fx = traj.fixes;
  for (auto& f : fx) {
    if (f.heading) f.heading = normalize_heading(*f.heading);
  }
  if (fx.size() == 1 && !fx.front().heading) {
    throw Error(fmt::format("trajectory {}: cannot derive a heading from a single fix", traj.id));
  }
  std::optional<double> previous;
  for (std::size_t i = 0; i < fx.size(); ++i) {
    if (!fx[i].heading) {
      std::optional<double> derived;
      for (std::size_t j = i + 1; j < fx.size(); ++j) {
        if (distance(fx[i].position, fx[j].position) > 0.0) {
          derived = bearing(fx[i].position, fx[j].position);
          break;
        }
      }
      fx[i].heading = derived ? *derived : previous.value_or(0.0);
    }
    previous = fx[i].heading;
  }
  return traj;
}

/// A candidate segment with its gravity weights.
struct Candidate {
  SegmentIndex segment = kNoSegment;
  double dist = 0.0;     // meters
  double ang = 0.0;      // degrees in [0, 180]
  double w_d = 0.0;
  double w_theta = 0.0;
  double gf = 0.0;       // w_d * w_theta
};

/// Normalized attraction weight 1 - value / sum. A zero sum means every
/// candidate is equally (perfectly) attractive on this dimension.
inline std::vector<double> complement_shares(std::span<const double> values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  std::vector<double> out(values.size(), 1.0);
  if (sum > 0.0) {
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = 1.0 - values[i] / sum;
  }
  return out;
}

/// Fills w_d, w_theta and gf of a candidate set from its dist and ang fields.
inline void assign_gravity_weights(std::span<Candidate> cands) {
  std::vector<double> d, a;
  d.reserve(cands.size());
  a.reserve(cands.size());
  for (const auto& c : cands) {
    d.push_back(c.dist);
    a.push_back(c.ang);
  }
  const auto wd = complement_shares(d);
  const auto wt = complement_shares(a);
  for (std::size_t i = 0; i < cands.size(); ++i) {
    cands[i].w_d = wd[i];
    cands[i].w_theta = wt[i];
    cands[i].gf = wd[i] * wt[i];
  }
}

/// Winner of a candidate set: greatest gf, then smaller distance, then smaller segment id.
inline const Candidate& strongest(std::span<const Candidate> cands, const RoadNetwork& net) {
  const Candidate* best = &cands.front();
  for (const auto& c : cands.subspan(1)) {
    if (c.gf > best->gf ||
        (c.gf == best->gf && (c.dist < best->dist ||
                              (c.dist == best->dist && net.segment(c.segment).id < net.segment(best->segment).id)))) {
      best = &c;
    }
  }
  return *best;
}

inline std::vector<Candidate> gravity_candidates(const RoadNetwork& net, const GpsFix& fix,
                                                 std::size_t k = kDefaultKnn,
                                                 IndexQueryStats* stats = nullptr) {
  if (!fix.heading) throw Error("gravity matching needs a fix heading");
  std::vector<Candidate> out;
  for (const auto& hit : k_nearest_segments(net, fix.position, k, stats)) {
    Candidate c;
    c.segment = hit.segment;
    c.dist = hit.distance;
    c.ang = angular_difference(net.segment(hit.segment).heading, *fix.heading);
    out.push_back(c);
  }
  assign_gravity_weights(out);
  return out;
}

struct MatchedPoint {
  GpsFix fix;
  SegmentIndex segment = kNoSegment;
  double weight = 0.0;   // gf of the winner
  GeoPoint projection;   // nearest point of the winner's polyline
};

inline MatchedPoint match_point(const RoadNetwork& net, const GpsFix& fix, std::size_t k = kDefaultKnn,
                                IndexQueryStats* stats = nullptr) {
  const auto cands = gravity_candidates(net, fix, k, stats);
  const Candidate& win = strongest(cands, net);
  MatchedPoint m;
  m.fix = fix;
  m.segment = win.segment;
  m.weight = win.gf;
  m.projection = project_onto_polyline(net.segment(win.segment).polyline, fix.position).point;
  return m;
}

}  // namespace tamm

#endif  // TAMM_MATCHER_HPP
