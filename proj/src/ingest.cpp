/*
 * Copyright 2026 The segsel Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "segsel/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <stdexcept>
#include <unordered_map>

#include "segsel/detail/io.hpp"
#include "segsel/log.hpp"

namespace segsel::ingest {

static double deg2rad(double deg) { return deg * (3.14159265358979323846 / 180.0); }

double haversine_m(const GeoPoint& a, const GeoPoint& b) {
  double phi1 = deg2rad(a.lat);
  double phi2 = deg2rad(b.lat);
  double dphi = deg2rad(b.lat - a.lat);
  double dlam = deg2rad(b.lon - a.lon);
  double s = std::sin(dphi / 2.0) * std::sin(dphi / 2.0) +
             std::cos(phi1) * std::cos(phi2) * std::sin(dlam / 2.0) * std::sin(dlam / 2.0);
  s = std::min(1.0, std::max(0.0, s));
  return 2.0 * kEarthRadiusM * std::asin(std::sqrt(s));
}

std::string to_string(SegmentKind kind) {
  switch (kind) {
    case SegmentKind::Stop: return "stop";
    case SegmentKind::Intersection: return "intersection";
    case SegmentKind::Interpolated: return "interpolated";
  }
  throw std::logic_error("to_string: bad SegmentKind");
}

SegmentKind segment_kind_from_string(const std::string& s) {
  if (s == "stop") return SegmentKind::Stop;
  if (s == "intersection") return SegmentKind::Intersection;
  if (s == "interpolated") return SegmentKind::Interpolated;
  throw std::runtime_error("unknown segment kind: " + s);
}

double SegmentGrid::route_length() const {
  return segments.empty() ? 0.0 : segments.back().cum_distance;
}

std::vector<int> SegmentGrid::interpolation_indices() const {
  std::vector<int> out;
  for (const auto& s : segments)
    if (s.kind == SegmentKind::Interpolated) out.push_back(s.id);
  return out;
}

std::vector<int> SegmentGrid::landmark_indices() const {
  std::vector<int> out;
  for (const auto& s : segments)
    if (s.kind != SegmentKind::Interpolated) out.push_back(s.id);
  return out;
}

std::vector<int> SegmentGrid::stop_indices() const {
  std::vector<int> out;
  for (const auto& s : segments)
    if (s.kind == SegmentKind::Stop) out.push_back(s.id);
  return out;
}

static bool valid_coord(double lat, double lon) {
  return std::isfinite(lat) && std::isfinite(lon) && lat >= -90.0 && lat <= 90.0 &&
         lon >= -180.0 && lon <= 180.0;
}

std::vector<Journey> parse_trajectories(std::istream& raw, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("parse_trajectories: tau must be positive");

  std::string line;
  long line_no = 0;
  bool header_seen = false;

  std::vector<std::string> trip_order;
  std::unordered_map<std::string, std::vector<GpsFix>> fixes_by_trip;
  long dropped = 0;

  while (std::getline(raw, line)) {
    ++line_no;
    std::string_view sv = detail::trim(line);
    if (sv.empty() || sv.front() == '#') continue;
    auto cells = detail::split_line(sv);
    if (!header_seen) {
      if (cells.size() != 4 || cells[0] != "trip_id" || cells[1] != "lat" || cells[2] != "lon" ||
          cells[3] != "timestamp")
        throw std::runtime_error("trajectory parse error at line " + std::to_string(line_no) +
                                 ": expected header trip_id,lat,lon,timestamp");
      header_seen = true;
      continue;
    }
    if (cells.size() != 4 || cells[0].empty())
      throw std::runtime_error("trajectory parse error at line " + std::to_string(line_no) +
                               ": expected 4 fields trip_id,lat,lon,timestamp");
    double lat, lon, ts;
    try {
      lat = detail::parse_double(cells[1], "lat");
      lon = detail::parse_double(cells[2], "lon");
      ts = detail::parse_double(cells[3], "timestamp");
    } catch (const std::exception& e) {
      throw std::runtime_error("trajectory parse error at line " + std::to_string(line_no) + ": " +
                               e.what());
    }
    if (!valid_coord(lat, lon) || !std::isfinite(ts)) {
      ++dropped;
      continue;
    }
    auto [it, inserted] = fixes_by_trip.try_emplace(cells[0]);
    if (inserted) trip_order.push_back(cells[0]);
    it->second.push_back(GpsFix{{lat, lon}, ts});
  }
  if (!header_seen)
    throw std::runtime_error("trajectory parse error: missing header trip_id,lat,lon,timestamp");
  if (dropped > 0)
    log_warn("parse_trajectories: dropped " + std::to_string(dropped) +
             " fixes with invalid coordinates or timestamps");

  std::vector<Journey> out;
  for (const auto& trip_id : trip_order) {
    auto& fixes = fixes_by_trip[trip_id];
    std::stable_sort(fixes.begin(), fixes.end(),
                     [](const GpsFix& a, const GpsFix& b) { return a.timestamp < b.timestamp; });
    // collapse duplicate timestamps, first occurrence wins
    std::vector<GpsFix> dedup;
    dedup.reserve(fixes.size());
    for (const auto& f : fixes)
      if (dedup.empty() || f.timestamp > dedup.back().timestamp) dedup.push_back(f);

    std::vector<std::vector<GpsFix>> runs;
    for (const auto& f : dedup) {
      if (runs.empty() || f.timestamp - runs.back().back().timestamp > tau) runs.emplace_back();
      runs.back().push_back(f);
    }
    for (std::size_t k = 0; k < runs.size(); ++k) {
      Journey j;
      j.trip_id = runs.size() == 1 ? trip_id : trip_id + "#" + std::to_string(k);
      j.fixes = std::move(runs[k]);
      j.tau = tau;
      out.push_back(std::move(j));
    }
  }
  return out;
}

std::vector<std::pair<double, double>> cumulative_distance(const Journey& journey) {
  if (journey.fixes.empty())
    throw std::invalid_argument("cumulative_distance: journey has no fixes");
  std::vector<std::pair<double, double>> out;
  out.reserve(journey.fixes.size());
  double d = 0.0;
  double t0 = journey.fixes.front().timestamp;
  out.emplace_back(0.0, 0.0);
  for (std::size_t i = 1; i < journey.fixes.size(); ++i) {
    d += haversine_m(journey.fixes[i - 1].point, journey.fixes[i].point);
    out.emplace_back(d, journey.fixes[i].timestamp - t0);
  }
  return out;
}

namespace {
struct Candidate {
  double d = 0.0;
  GeoPoint pt;
  SegmentKind kind = SegmentKind::Interpolated;
};
}  // namespace

SegmentGrid build_segment_grid(double route_length,
                               const std::vector<std::pair<double, GeoPoint>>& stops,
                               const std::vector<std::pair<double, GeoPoint>>& intersections,
                               double spacing,
                               std::string route_id) {
  if (!(route_length > 0.0))
    throw std::invalid_argument("build_segment_grid: route_length must be positive");
  if (!(spacing > 0.0)) throw std::invalid_argument("build_segment_grid: spacing must be positive");

  std::vector<Candidate> landmarks;
  auto add_landmarks = [&](const std::vector<std::pair<double, GeoPoint>>& src, SegmentKind kind) {
    for (const auto& [d, pt] : src) {
      if (!std::isfinite(d) || d < 0.0 || d > route_length)
        throw std::invalid_argument("build_segment_grid: landmark at " + detail::format_double(d) +
                                    " m outside [0, route_length]");
      landmarks.push_back(Candidate{d, pt, kind});
    }
  };
  add_landmarks(stops, SegmentKind::Stop);
  add_landmarks(intersections, SegmentKind::Intersection);
  std::sort(landmarks.begin(), landmarks.end(),
            [](const Candidate& a, const Candidate& b) { return a.d < b.d; });
  for (std::size_t i = 1; i < landmarks.size(); ++i)
    if (landmarks[i].d - landmarks[i - 1].d < 1e-9)
      throw std::invalid_argument("build_segment_grid: two landmarks at identical cum_distance " +
                                  detail::format_double(landmarks[i].d));

  std::vector<Candidate> merged = landmarks;
  double half = spacing / 2.0;
  for (long k = 0; static_cast<double>(k) * spacing <= route_length + 1e-9; ++k) {
    double d = std::min(static_cast<double>(k) * spacing, route_length);
    bool near_landmark = false;
    for (const auto& lm : landmarks)
      if (std::abs(d - lm.d) < half) {
        near_landmark = true;
        break;
      }
    if (!near_landmark) merged.push_back(Candidate{d, GeoPoint{}, SegmentKind::Interpolated});
  }
  std::sort(merged.begin(), merged.end(),
            [](const Candidate& a, const Candidate& b) { return a.d < b.d; });

  // coordinates for interpolated points: linear between bracketing landmarks
  auto coord_at = [&](double d) -> GeoPoint {
    if (landmarks.empty()) return GeoPoint{};
    if (d <= landmarks.front().d) return landmarks.front().pt;
    if (d >= landmarks.back().d) return landmarks.back().pt;
    for (std::size_t i = 1; i < landmarks.size(); ++i) {
      if (d <= landmarks[i].d) {
        const auto& a = landmarks[i - 1];
        const auto& b = landmarks[i];
        double w = (d - a.d) / (b.d - a.d);
        return GeoPoint{a.pt.lat + w * (b.pt.lat - a.pt.lat),
                        a.pt.lon + w * (b.pt.lon - a.pt.lon)};
      }
    }
    return landmarks.back().pt;
  };

  SegmentGrid grid;
  grid.route_id = std::move(route_id);
  grid.spacing = spacing;
  grid.segments.reserve(merged.size());
  for (std::size_t i = 0; i < merged.size(); ++i) {
    RoadSegment seg;
    seg.id = static_cast<int>(i);
    seg.kind = merged[i].kind;
    seg.cum_distance = merged[i].d;
    seg.start = merged[i].kind == SegmentKind::Interpolated ? coord_at(merged[i].d) : merged[i].pt;
    grid.segments.push_back(seg);
  }
  for (auto& seg : grid.segments) {
    std::size_t i = static_cast<std::size_t>(seg.id);
    seg.end = i + 1 < grid.segments.size() ? grid.segments[i + 1].start : seg.start;
  }
  return grid;
}

RouteDescription load_route_file(const std::string& path) {
  auto j = detail::load_json_file(path);
  RouteDescription r;
  try {
    r.route_id = j.at("route_id").get<std::string>();
    r.route_length = j.at("route_length_m").get<double>();
    r.spacing = j.at("spacing_m").get<double>();
    r.line_count = j.value("line_count", 1.0);
    auto read_points = [&](const char* key, std::vector<std::pair<double, GeoPoint>>& dst) {
      for (const auto& e : j.at(key)) {
        double d = e.at("cum_distance_m").get<double>();
        GeoPoint pt{e.value("lat", 0.0), e.value("lon", 0.0)};
        dst.emplace_back(d, pt);
      }
    };
    read_points("stops", r.stops);
    read_points("intersections", r.intersections);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("invalid route file " + path + ": " + e.what());
  }
  if (!(r.route_length > 0.0) || !(r.spacing > 0.0))
    throw std::runtime_error("invalid route file " + path +
                             ": route_length_m and spacing_m must be positive");
  return r;
}

void save_route_file(const RouteDescription& route, const std::string& path,
                     const std::string& config_digest) {
  nlohmann::json j;
  j["version"] = 1;
  j["config_digest"] = config_digest;
  j["route_id"] = route.route_id;
  j["route_length_m"] = route.route_length;
  j["spacing_m"] = route.spacing;
  j["line_count"] = route.line_count;
  auto write_points = [](const std::vector<std::pair<double, GeoPoint>>& src) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [d, pt] : src)
      arr.push_back({{"cum_distance_m", d}, {"lat", pt.lat}, {"lon", pt.lon}});
    return arr;
  };
  j["stops"] = write_points(route.stops);
  j["intersections"] = write_points(route.intersections);
  detail::save_json_file(j, path);
}

SegmentGrid build_grid(const RouteDescription& route) {
  return build_segment_grid(route.route_length, route.stops, route.intersections, route.spacing,
                            route.route_id);
}

}  // namespace segsel::ingest
