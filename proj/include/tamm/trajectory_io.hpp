#ifndef TAMM_TRAJECTORY_IO_HPP
#define TAMM_TRAJECTORY_IO_HPP

#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "tamm/csv.hpp"
#include "tamm/geo.hpp"
#include "tamm/matcher.hpp"

namespace tamm {

// Trajectory file: CSV `user_id,traj_id,timestamp_s,lat,lon,speed_mps,heading_deg`.
// Empty speed/heading cells mean absent. Rows of one trajectory are
// contiguous with strictly increasing timestamps.

inline const std::vector<std::string>& trajectory_header() {
  static const std::vector<std::string> h{"user_id", "traj_id", "timestamp_s", "lat",
                                          "lon",     "speed_mps", "heading_deg"};
  return h;
}

inline std::vector<Trajectory> read_trajectories(std::istream& in, const Projection& projection,
                                                 const std::string& source = "trajectories") {
  csv::Reader reader(in, source);
  reader.expect_header(trajectory_header());
  std::vector<Trajectory> out;
  std::set<std::string> finished;
  while (auto rec = reader.next()) {
    const std::string user(csv::trim((*rec)[0]));
    const std::string traj(csv::trim((*rec)[1]));
    if (traj.empty()) reader.fail(1, "empty trajectory id");
    GpsFix fix;
    fix.timestamp = reader.number(*rec, 2);
    const double lat = reader.number(*rec, 3);
    const double lon = reader.number(*rec, 4);
    if (!std::isfinite(fix.timestamp)) reader.fail(2, "timestamp must be finite");
    if (!std::isfinite(lat) || lat < -90.0 || lat > 90.0) reader.fail(3, "latitude out of range");
    if (!std::isfinite(lon) || lon < -180.0 || lon > 180.0) reader.fail(4, "longitude out of range");
    fix.position = projection.forward({lat, lon});
    fix.speed = reader.optional_number(*rec, 5);
    if (fix.speed && (!std::isfinite(*fix.speed) || *fix.speed < 0.0)) reader.fail(5, "speed must be >= 0");
    fix.heading = reader.optional_number(*rec, 6);
    if (fix.heading) {
      if (!std::isfinite(*fix.heading)) reader.fail(6, "heading must be finite");
      fix.heading = normalize_heading(*fix.heading);
    }

    if (out.empty() || out.back().id != traj) {
      if (!out.empty()) finished.insert(out.back().id);
      if (finished.contains(traj)) reader.fail(1, fmt::format("rows of trajectory '{}' are not contiguous", traj));
      out.push_back({traj, user, {}});
    } else if (!(fix.timestamp > out.back().fixes.back().timestamp)) {
      reader.fail(2, fmt::format("timestamps of trajectory '{}' must strictly increase", traj));
    }
    out.back().fixes.push_back(fix);
  }
  return out;
}

inline std::vector<Trajectory> read_trajectories_file(const std::string& path, const Projection& projection) {
  auto in = csv::open_input(path);
  return read_trajectories(in, projection, path);
}

inline void write_trajectories(std::ostream& out, const std::vector<Trajectory>& trajectories,
                               const Projection& projection) {
  out << fmt::format("{}\n", fmt::join(trajectory_header(), ","));
  for (const auto& t : trajectories) {
    for (const auto& f : t.fixes) {
      const LatLon ll = projection.inverse(f.position);
      out << fmt::format("{},{},{},{},{},{},{}\n", csv::quote(t.user_id), csv::quote(t.id), f.timestamp, ll.lat,
                         ll.lon, f.speed ? fmt::format("{}", *f.speed) : std::string{},
                         f.heading ? fmt::format("{}", *f.heading) : std::string{});
    }
  }
}

}  // namespace tamm

#endif  // TAMM_TRAJECTORY_IO_HPP
