#ifndef TAMM_EVAL_HPP
#define TAMM_EVAL_HPP

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "tamm/csv.hpp"
#include "tamm/enrich.hpp"
#include "tamm/matcher.hpp"
#include "tamm/pipeline.hpp"
#include "tamm/roadnet.hpp"
#include "tamm/router.hpp"

namespace tamm {

/// Truly traversed segments per trajectory, in order.
using GroundTruth = std::map<std::string, std::vector<SegmentId>>;

/// Segments a matched trajectory claims: every pair path plus every matched point's segment.
inline std::set<SegmentId> matched_segment_set(const RoadNetwork& net, const MatchedTrajectory& m) {
  std::set<SegmentId> out;
  for (const auto& p : m.points) out.insert(net.segment(p.segment).id);
  for (const auto& pr : m.pairs) out.insert(pr.segment_ids.begin(), pr.segment_ids.end());
  return out;
}

/// |matched ∩ truth| / |truth|, set-based.
inline double accuracy(const std::set<SegmentId>& matched, const std::vector<SegmentId>& truth) {
  const std::set<SegmentId> t(truth.begin(), truth.end());
  if (t.empty()) throw Error("accuracy needs a non-empty ground truth");
  std::size_t hit = 0;
  for (SegmentId id : t) hit += matched.contains(id) ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(t.size());
}

inline double accuracy(const RoadNetwork& net, const MatchedTrajectory& m, const std::vector<SegmentId>& truth) {
  return accuracy(matched_segment_set(net, m), truth);
}

struct MidpointScore {
  std::size_t hidden = 0;
  std::size_t covered = 0;

  double ratio() const { return hidden ? static_cast<double>(covered) / static_cast<double>(hidden) : 0.0; }
  MidpointScore& operator+=(const MidpointScore& o) {
    hidden += o.hidden;
    covered += o.covered;
    return *this;
  }
};

/// Hides the middle fix of every consecutive triplet (odd 0-based indices
/// that have a successor), re-matches the remaining fixes and counts hidden
/// fixes whose full-rate gravity match lies on the reconstruction of the
/// pair spanning them. Returns std::nullopt for trajectories under 3 fixes.
inline std::optional<MidpointScore> middle_point_test(const RoadNetwork& net, const Trajectory& raw,
                                                      Heuristic heuristic, std::size_t k = kDefaultKnn) {
  if (raw.fixes.size() < 3) return std::nullopt;
  validate(raw);
  const Trajectory full = derive_headings(raw);

  Trajectory reduced{raw.id, raw.user_id, {}};
  std::vector<std::size_t> hidden;
  for (std::size_t j = 0; j < full.fixes.size(); ++j) {
    if (j % 2 == 1 && j + 1 < full.fixes.size()) {
      hidden.push_back(j);
    } else {
      reduced.fixes.push_back(full.fixes[j]);
    }
  }
  const MatchedTrajectory m = match_trajectory(net, reduced, heuristic, k);

  MidpointScore score;
  for (std::size_t j : hidden) {
    const std::size_t pair = (j - 1) / 2;  // reduced index of fix j-1
    const PairResult& pr = m.pairs.at(pair);
    std::set<SegmentId> cover(pr.segment_ids.begin(), pr.segment_ids.end());
    cover.insert(net.segment(m.points[pair].segment).id);
    cover.insert(net.segment(m.points[pair + 1].segment).id);
    const SegmentId truth = net.segment(match_point(net, full.fixes[j], k).segment).id;
    ++score.hidden;
    if (cover.contains(truth)) ++score.covered;
  }
  return score;
}

// ---------------------------------------------------------------------------

inline constexpr double kAlignmentBinWidthS = 30.0;

struct AlignmentBin {
  double start = 0.0;  // s
  double mean_path_time = 0.0;
  double std_path_time = 0.0;
  std::size_t count = 0;
};

struct AlignmentReport {
  std::vector<AlignmentBin> bins;
  double mean_delta_pct = 0.0;
  std::size_t pairs = 0;
};

/// Bins reconstructed pairs by GPS time and summarizes path time per bin.
/// Stay and no-path pairs carry no reconstruction and are left out.
inline AlignmentReport alignment_report(const std::vector<PairRecord>& records,
                                        double bin_width = kAlignmentBinWidthS) {
  AlignmentReport rep;
  std::map<long long, std::vector<double>> bins;
  double delta_sum = 0.0;
  for (const auto& r : records) {
    if (r.flag != PairFlag::ok || !(r.gps_time > 0.0)) continue;
    bins[static_cast<long long>(std::floor(r.gps_time / bin_width))].push_back(r.path_time);
    delta_sum += std::abs(r.path_time - r.gps_time) / r.gps_time * 100.0;
    ++rep.pairs;
  }
  if (rep.pairs) rep.mean_delta_pct = delta_sum / static_cast<double>(rep.pairs);
  for (const auto& [b, times] : bins) {
    AlignmentBin bin;
    bin.start = static_cast<double>(b) * bin_width;
    bin.count = times.size();
    for (double t : times) bin.mean_path_time += t;
    bin.mean_path_time /= static_cast<double>(bin.count);
    double var = 0.0;
    for (double t : times) var += (t - bin.mean_path_time) * (t - bin.mean_path_time);
    bin.std_path_time = std::sqrt(var / static_cast<double>(bin.count));
    rep.bins.push_back(bin);
  }
  return rep;
}

inline void write_alignment_csv(std::ostream& out, const AlignmentReport& rep) {
  out << "bin_start_s,mean_path_time_s,std_s,count\n";
  for (const auto& b : rep.bins) {
    out << fmt::format("{:.0f},{:.3f},{:.3f},{}\n", b.start, b.mean_path_time, b.std_path_time, b.count);
  }
}

// ---------------------------------------------------------------------------
// Ground-truth file: CSV `traj_id,segment_ids` with ';'-joined ids.

inline void write_truth(std::ostream& out, const GroundTruth& truth) {
  out << "traj_id,segment_ids\n";
  for (const auto& [id, segs] : truth) out << fmt::format("{},{}\n", csv::quote(id), fmt::join(segs, ";"));
}

inline GroundTruth read_truth(std::istream& in, const std::string& source = "truth") {
  csv::Reader reader(in, source);
  reader.expect_header({"traj_id", "segment_ids"});
  GroundTruth out;
  while (auto rec = reader.next()) {
    std::vector<SegmentId> ids;
    std::string_view list = csv::trim((*rec)[1]);
    while (!list.empty()) {
      const auto semi = list.find(';');
      auto v = csv::to_int(list.substr(0, semi));
      if (!v) reader.fail(1, "malformed segment id list");
      ids.push_back(*v);
      list = semi == std::string_view::npos ? std::string_view{} : list.substr(semi + 1);
    }
    out[std::string(csv::trim((*rec)[0]))] = std::move(ids);
  }
  return out;
}

// ---------------------------------------------------------------------------

struct SpeedClass {
  std::string name;
  double speed = 0.0;  // nominal m/s, written as the speed limit
};

struct SynthConfig {
  std::uint64_t seed = 42;
  std::size_t grid_n = 10;
  double spacing_m = 100.0;
  std::vector<SpeedClass> speed_classes{{"primary", 17.0}, {"secondary", 11.0}, {"residential", 6.0}};
  double segment_speed_jitter = 0.2;   // true speed = nominal * U(1-j, 1+j)
  std::size_t trajectories = 100;
  double sampling_interval_s = 30.0;
  double noise_sigma_m = 10.0;
  double heading_jitter_deg = 10.0;
  double speed_jitter = 0.1;           // fix speed = true * U(1-j, 1+j)
  double detour_fraction = 0.3;
  double fastest_fraction = 0.1;       // remaining drivers take the shortest path
  std::size_t min_trip_blocks = 4;     // Manhattan distance between origin and destination
  std::size_t min_fixes = 3;
  bool record_speed = true;
  LatLon origin{43.7160, 10.4019};
  double start_time_s = 1.4e9;
};

enum class DriverProfile { shortest, fastest, detour };

struct SynthWorld {
  RoadNetwork network;                        // speed limits = nominal class speeds
  std::map<SegmentId, double> true_speed;     // speeds the drivers actually hold
  std::vector<Trajectory> trajectories;
  GroundTruth truth;
  std::vector<std::vector<SegmentId>> fix_truth;  // per trajectory, per fix
  std::vector<std::vector<double>> fix_odometer;  // per trajectory, per fix: meters driven since departure
  std::vector<DriverProfile> profiles;
};

namespace detail {

inline RoadNetwork grid_network(const SynthConfig& cfg, std::mt19937_64& rng) {
  const std::size_t n = cfg.grid_n;
  if (n < 2) throw Error("grid_n must be at least 2");
  if (cfg.speed_classes.empty()) throw Error("at least one speed class is required");
  const double half = 0.5 * cfg.spacing_m * static_cast<double>(n - 1);
  auto node_id = [n](std::size_t r, std::size_t c) { return static_cast<NodeId>(r * n + c + 1); };
  auto pos = [&](std::size_t r, std::size_t c) {
    return GeoPoint{static_cast<double>(c) * cfg.spacing_m - half, static_cast<double>(r) * cfg.spacing_m - half};
  };
  std::uniform_int_distribution<std::size_t> pick(0, cfg.speed_classes.size() - 1);
  std::vector<std::size_t> row_class(n), col_class(n);
  for (auto& c : row_class) c = pick(rng);
  for (auto& c : col_class) c = pick(rng);

  std::vector<SegmentRecord> recs;
  SegmentId next_id = 1;
  auto add = [&](std::size_t r0, std::size_t c0, std::size_t r1, std::size_t c1, std::size_t cls) {
    for (int dir = 0; dir < 2; ++dir) {
      SegmentRecord s;
      s.id = next_id++;
      s.road_class = cfg.speed_classes[cls].name;
      s.speed_limit = cfg.speed_classes[cls].speed;
      if (dir == 0) {
        s.from = node_id(r0, c0);
        s.to = node_id(r1, c1);
        s.polyline = {pos(r0, c0), pos(r1, c1)};
      } else {
        s.from = node_id(r1, c1);
        s.to = node_id(r0, c0);
        s.polyline = {pos(r1, c1), pos(r0, c0)};
      }
      recs.push_back(std::move(s));
    }
  };
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c + 1 < n; ++c) add(r, c, r, c + 1, row_class[r]);
  }
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t r = 0; r + 1 < n; ++r) add(r, c, r + 1, c, col_class[c]);
  }
  return RoadNetwork::build(Projection(cfg.origin), std::move(recs));
}

inline bool simple_route(const RoadNetwork& net, const std::vector<SegmentIndex>& route) {
  std::set<NodeIndex> seen;
  if (!route.empty()) seen.insert(net.segment(route.front()).from);
  for (SegmentIndex s : route) {
    if (!seen.insert(net.segment(s).to).second) return false;
  }
  return true;
}

}  // namespace detail

/// Deterministic grid world with drivers of three profiles and noisy,
/// regularly sampled fixes along their routes.
inline SynthWorld synth_world(const SynthConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  SynthWorld w;
  w.network = detail::grid_network(cfg, rng);
  const RoadNetwork& net = w.network;

  // network carrying the true speeds, used for driver routing
  RoadNetwork truth_net = net;
  std::uniform_real_distribution<double> seg_jitter(1.0 - cfg.segment_speed_jitter, 1.0 + cfg.segment_speed_jitter);
  for (SegmentIndex s = 0; s < net.segment_count(); ++s) {
    const double v = net.segment(s).speed_limit * seg_jitter(rng);
    truth_net.set_speed(s, v);
    w.true_speed[net.segment(s).id] = v;
  }
  // Shortest-path drivers pick uniformly among equally short routes: travel
  // times proportional to length with a tiny per-segment perturbation.
  RoadNetwork length_net = net;
  std::uniform_real_distribution<double> tie_jitter(1.0 - 1e-6, 1.0 + 1e-6);
  for (SegmentIndex s = 0; s < net.segment_count(); ++s) length_net.set_speed(s, tie_jitter(rng));

  const std::size_t n = cfg.grid_n;
  std::uniform_int_distribution<std::size_t> any_node(0, net.node_count() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> heading_jitter(-cfg.heading_jitter_deg, cfg.heading_jitter_deg);
  std::uniform_real_distribution<double> speed_jitter(1.0 - cfg.speed_jitter, 1.0 + cfg.speed_jitter);
  auto grid_rc = [&](NodeIndex v) {
    const auto id = static_cast<std::size_t>(net.node(v).id - 1);
    return std::pair<long, long>{static_cast<long>(id / n), static_cast<long>(id % n)};
  };
  auto blocks = [&](NodeIndex a, NodeIndex b) {
    auto [ra, ca] = grid_rc(a);
    auto [rb, cb] = grid_rc(b);
    return static_cast<std::size_t>(std::abs(ra - rb) + std::abs(ca - cb));
  };
  const std::size_t min_blocks = std::min(cfg.min_trip_blocks, 2 * (n - 1));

  for (std::size_t t = 0; t < cfg.trajectories; ++t) {
    const double roll = unit(rng);
    const DriverProfile drawn = roll < cfg.detour_fraction                          ? DriverProfile::detour
                                : roll < cfg.detour_fraction + cfg.fastest_fraction ? DriverProfile::fastest
                                                                                    : DriverProfile::shortest;
    DriverProfile profile = drawn;
    std::vector<SegmentIndex> route;
    std::vector<double> enter;
    std::vector<double> times;
    for (int attempt = 0;; ++attempt) {
      if (attempt == 1000) throw Error("synthetic world: no trip long enough for the requested sampling");
      NodeIndex o = 0, d = 0;
      do {
        o = static_cast<NodeIndex>(any_node(rng));
        d = static_cast<NodeIndex>(any_node(rng));
      } while (o == d || blocks(o, d) < min_blocks);

      profile = drawn;
      route.clear();
      if (profile == DriverProfile::detour) {
        auto [ro, co] = grid_rc(o);
        auto [rd, cd] = grid_rc(d);
        const long last = static_cast<long>(n) - 1;
        const long lo_r = std::max(0L, std::min(ro, rd) - 2), hi_r = std::min(last, std::max(ro, rd) + 2);
        const long lo_c = std::max(0L, std::min(co, cd) - 2), hi_c = std::min(last, std::max(co, cd) + 2);
        std::uniform_int_distribution<long> pr(lo_r, hi_r), pc(lo_c, hi_c);
        const auto direct = fastest_path(truth_net, o, d);
        for (int tries = 0; tries < 20 && route.empty(); ++tries) {
          const auto wp = static_cast<NodeIndex>(pr(rng) * static_cast<long>(n) + pc(rng));
          if (wp == o || wp == d) continue;
          std::vector<SegmentIndex> joined = fastest_path(truth_net, o, wp).segments;
          const auto second = fastest_path(truth_net, wp, d).segments;
          joined.insert(joined.end(), second.begin(), second.end());
          if (detail::simple_route(net, joined) && joined != direct.segments) route = std::move(joined);
        }
        if (route.empty()) profile = DriverProfile::fastest;
      }
      if (profile == DriverProfile::fastest) route = fastest_path(truth_net, o, d).segments;
      if (profile == DriverProfile::shortest) route = fastest_path(length_net, o, d).segments;

      // sampling starts at a random phase, so fixes fall anywhere along the route
      enter.assign(1, 0.0);
      for (SegmentIndex s : route) enter.push_back(enter.back() + truth_net.segment(s).travel_time);
      times.clear();
      for (double ts = unit(rng) * cfg.sampling_interval_s; ts < enter.back(); ts += cfg.sampling_interval_s) {
        times.push_back(ts);
      }
      if (times.size() >= std::max<std::size_t>(cfg.min_fixes, 2)) break;
    }

    // drive the route at true speeds
    Trajectory traj;
    traj.id = fmt::format("t{:05d}", t);
    traj.user_id = fmt::format("u{:03d}", t % 50);
    std::vector<SegmentId> per_fix;
    std::vector<double> odometer;
    std::vector<double> driven{0.0};
    for (SegmentIndex s : route) driven.push_back(driven.back() + truth_net.segment(s).length);
    std::size_t first_seg = route.size(), last_seg = 0;
    const double t0 = cfg.start_time_s + static_cast<double>(t) * 3600.0;
    for (double ts : times) {
      std::size_t i = static_cast<std::size_t>(std::upper_bound(enter.begin(), enter.end(), ts) - enter.begin());
      i = std::clamp<std::size_t>(i, 1, route.size()) - 1;
      first_seg = std::min(first_seg, i);
      last_seg = std::max(last_seg, i);
      const RoadSegment& seg = truth_net.segment(route[i]);
      const double frac = std::clamp((ts - enter[i]) / seg.travel_time, 0.0, 1.0);
      const GeoPoint& a = seg.polyline.front();
      const GeoPoint& b = seg.polyline.back();
      GpsFix f;
      f.timestamp = t0 + ts;
      f.position = {a.x + frac * (b.x - a.x) + cfg.noise_sigma_m * noise(rng),
                    a.y + frac * (b.y - a.y) + cfg.noise_sigma_m * noise(rng)};
      f.heading = normalize_heading(seg.heading + heading_jitter(rng));
      const double v = seg.speed * speed_jitter(rng);
      if (cfg.record_speed) f.speed = v;
      traj.fixes.push_back(f);
      per_fix.push_back(seg.id);
      odometer.push_back(driven[i] + frac * seg.length);
    }
    // ground truth covers the stretch actually observed: first to last fix
    route = std::vector<SegmentIndex>(route.begin() + static_cast<std::ptrdiff_t>(first_seg),
                                      route.begin() + static_cast<std::ptrdiff_t>(last_seg) + 1);
    std::vector<SegmentId> ids;
    for (SegmentIndex s : route) ids.push_back(net.segment(s).id);
    w.truth[traj.id] = std::move(ids);
    w.trajectories.push_back(std::move(traj));
    w.fix_truth.push_back(std::move(per_fix));
    w.fix_odometer.push_back(std::move(odometer));
    w.profiles.push_back(profile);
  }
  return w;
}

/// Learns speeds from `trajectories` and returns the enriched network.
inline RoadNetwork enrich_network(const RoadNetwork& net, const std::vector<Trajectory>& trajectories,
                                  std::size_t k = kDefaultKnn, SpeedModel* model_out = nullptr) {
  SpeedModel model = spread_speeds(net, observe_speeds(net, trajectories, k));
  RoadNetwork out = apply_model(net, model);
  if (model_out) *model_out = std::move(model);
  return out;
}

}  // namespace tamm

#endif  // TAMM_EVAL_HPP
