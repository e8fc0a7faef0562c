#ifndef TAMM_ENRICH_HPP
#define TAMM_ENRICH_HPP

#include <algorithm>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "tamm/csv.hpp"
#include "tamm/matcher.hpp"
#include "tamm/roadnet.hpp"

namespace tamm {

/// Fix speeds below this are treated as stationary and never accumulated.
inline constexpr double kMinObservedSpeed = 0.5;

enum class Provenance { unassigned, observed, spread, fallback };

inline std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::observed: return "observed";
    case Provenance::spread: return "spread";
    case Provenance::fallback: return "default";
    case Provenance::unassigned: break;
  }
  return "unassigned";
}

inline std::optional<Provenance> parse_provenance(std::string_view s) {
  if (s == "observed") return Provenance::observed;
  if (s == "spread") return Provenance::spread;
  if (s == "default") return Provenance::fallback;
  return std::nullopt;
}

struct SpeedObservation {
  SegmentId segment = 0;
  double weight = 0.0;  // gravity force of the match
  double speed = 0.0;   // m/s
};

struct SpeedEntry {
  double weighted_speed_sum = 0.0;  // sum of w * s
  double weight_sum = 0.0;          // sum of w
  std::size_t support = 0;          // accumulated observations
  double speed = 0.0;
  Provenance provenance = Provenance::unassigned;
};

/// Per-segment typical speeds. Accumulation is a commutative reduction over
/// observations; `finalize` turns sums into weighted means.
class SpeedModel {
 public:
  void accumulate(const SpeedObservation& obs) {
    if (obs.weight < 0.0) throw Error(fmt::format("negative observation weight on segment {}", obs.segment));
    if (obs.weight == 0.0 || obs.speed < kMinObservedSpeed) return;
    auto& e = entries_[obs.segment];
    e.weighted_speed_sum += obs.weight * obs.speed;
    e.weight_sum += obs.weight;
    ++e.support;
  }

  /// Adds another partial model's sums into this one.
  void merge(const SpeedModel& other) {
    for (const auto& [id, o] : other.entries_) {
      auto& e = entries_[id];
      e.weighted_speed_sum += o.weighted_speed_sum;
      e.weight_sum += o.weight_sum;
      e.support += o.support;
    }
  }

  /// Marks segments with positive total weight as observed.
  void finalize() {
    for (auto& [id, e] : entries_) {
      if (e.weight_sum > 0.0) {
        e.speed = e.weighted_speed_sum / e.weight_sum;
        e.provenance = Provenance::observed;
      }
    }
  }

  const SpeedEntry* find(SegmentId id) const {
    auto it = entries_.find(id);
    return it == entries_.end() ? nullptr : &it->second;
  }

  void set(SegmentId id, SpeedEntry e) { entries_[id] = e; }
  const std::map<SegmentId, SpeedEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  std::size_t count(Provenance p) const {
    return static_cast<std::size_t>(std::count_if(entries_.begin(), entries_.end(),
                                                  [p](const auto& kv) { return kv.second.provenance == p; }));
  }

 private:
  std::map<SegmentId, SpeedEntry> entries_;
};

struct SpreadStats {
  std::size_t rounds = 0;
};

/// Propagates observed speeds to unobserved segments of the same road class,
/// level by level over segments sharing a node. A segment reached in a round
/// takes the mean speed of its same-class neighbours assigned in earlier
/// rounds. Segments never reached fall back to their speed limit.
inline SpeedModel spread_speeds(const RoadNetwork& net, const SpeedModel& observed, SpreadStats* stats = nullptr) {
  const std::size_t n = net.segment_count();
  std::vector<double> speed(n, 0.0);
  std::vector<Provenance> prov(n, Provenance::unassigned);
  std::vector<std::size_t> support(n, 0);
  for (SegmentIndex s = 0; s < n; ++s) {
    if (const SpeedEntry* e = observed.find(net.segment(s).id); e && e->provenance == Provenance::observed) {
      speed[s] = e->speed;
      prov[s] = Provenance::observed;
      support[s] = e->support;
    }
  }

  std::vector<std::vector<SegmentIndex>> incident(net.node_count());
  for (SegmentIndex s = 0; s < n; ++s) {
    incident[net.segment(s).from].push_back(s);
    if (net.segment(s).to != net.segment(s).from) incident[net.segment(s).to].push_back(s);
  }
  auto neighbours = [&](SegmentIndex s) {
    std::vector<SegmentIndex> out;
    for (NodeIndex v : {net.segment(s).from, net.segment(s).to}) {
      for (SegmentIndex t : incident[v]) {
        if (t != s) out.push_back(t);
      }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  };

  std::size_t rounds = 0;
  while (true) {
    std::vector<std::pair<SegmentIndex, double>> level;
    for (SegmentIndex s = 0; s < n; ++s) {
      if (prov[s] != Provenance::unassigned) continue;
      double sum = 0.0;
      std::size_t cnt = 0;
      for (SegmentIndex t : neighbours(s)) {
        if (prov[t] != Provenance::unassigned && prov[t] != Provenance::fallback &&
            net.segment(t).road_class == net.segment(s).road_class) {
          sum += speed[t];
          ++cnt;
        }
      }
      if (cnt > 0) level.emplace_back(s, sum / static_cast<double>(cnt));
    }
    if (level.empty()) break;
    ++rounds;
    for (auto [s, v] : level) {
      speed[s] = v;
      prov[s] = Provenance::spread;
    }
  }
  if (stats) stats->rounds = rounds;

  SpeedModel out;
  for (SegmentIndex s = 0; s < n; ++s) {
    const RoadSegment& seg = net.segment(s);
    SpeedEntry e;
    if (prov[s] == Provenance::unassigned) {
      e.speed = seg.speed_limit;
      e.provenance = Provenance::fallback;
    } else {
      e.speed = speed[s];
      e.provenance = prov[s];
      e.support = support[s];
    }
    if (const SpeedEntry* o = observed.find(seg.id)) {
      e.weighted_speed_sum = o->weighted_speed_sum;
      e.weight_sum = o->weight_sum;
      e.support = o->support;
    }
    out.set(seg.id, e);
  }
  return out;
}

/// Copy of `net` with every segment's speed and travel time taken from the model.
inline RoadNetwork apply_model(RoadNetwork net, const SpeedModel& model) {
  for (SegmentIndex s = 0; s < net.segment_count(); ++s) {
    const SpeedEntry* e = model.find(net.segment(s).id);
    if (!e) throw Error(fmt::format("speed model has no entry for segment {}", net.segment(s).id));
    if (!(e->speed > 0.0)) throw Error(fmt::format("speed model has non-positive speed for segment {}", net.segment(s).id));
    if (net.segment(s).speed != e->speed) net.set_speed(s, e->speed);
  }
  return net;
}

/// Matches every fix that carries a speed and accumulates the resulting
/// observations. Trajectories whose headings cannot be derived are skipped.
inline SpeedModel observe_speeds(const RoadNetwork& net, const std::vector<Trajectory>& trajectories,
                                 std::size_t k = kDefaultKnn) {
  SpeedModel model;
  for (const auto& raw : trajectories) {
    if (raw.fixes.empty()) continue;
    Trajectory traj;
    try {
      traj = derive_headings(raw);
    } catch (const Error&) {
      continue;
    }
    for (const auto& fix : traj.fixes) {
      if (!fix.speed) continue;
      const MatchedPoint m = match_point(net, fix, k);
      model.accumulate({net.segment(m.segment).id, m.weight, *fix.speed});
    }
  }
  model.finalize();
  return model;
}

// ---------------------------------------------------------------------------
// Model file: CSV `segment_id,speed_mps,support,provenance`.

inline const std::vector<std::string>& speed_model_header() {
  static const std::vector<std::string> h{"segment_id", "speed_mps", "support", "provenance"};
  return h;
}

inline void write_speed_model(std::ostream& out, const SpeedModel& model) {
  out << fmt::format("{}\n", fmt::join(speed_model_header(), ","));
  for (const auto& [id, e] : model.entries()) {
    out << fmt::format("{},{},{},{}\n", id, e.speed, e.support, to_string(e.provenance));
  }
}

inline SpeedModel read_speed_model(std::istream& in, const std::string& source = "model") {
  csv::Reader reader(in, source);
  reader.expect_header(speed_model_header());
  SpeedModel model;
  while (auto rec = reader.next()) {
    const SegmentId id = reader.integer(*rec, 0);
    SpeedEntry e;
    e.speed = reader.number(*rec, 1);
    if (!(e.speed > 0.0)) reader.fail(1, "speed must be positive");
    const std::int64_t support = reader.integer(*rec, 2);
    if (support < 0) reader.fail(2, "support must be non-negative");
    e.support = static_cast<std::size_t>(support);
    auto p = parse_provenance(csv::trim((*rec)[3]));
    if (!p) reader.fail(3, fmt::format("unknown provenance '{}'", (*rec)[3]));
    e.provenance = *p;
    if (model.find(id)) reader.fail(0, fmt::format("duplicate segment id {}", id));
    model.set(id, e);
  }
  return model;
}

}  // namespace tamm

#endif  // TAMM_ENRICH_HPP
