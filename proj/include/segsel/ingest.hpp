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

#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace segsel::ingest {

struct GeoPoint {
  double lat = 0.0;  // degrees, [-90, 90]
  double lon = 0.0;  // degrees, [-180, 180]
};

struct GpsFix {
  GeoPoint point;
  double timestamp = 0.0;  // seconds since epoch
};

// One uninterrupted pass along the route: fixes sorted by time, no duplicate
// timestamps, no gap exceeding the split threshold tau.
struct Journey {
  std::string trip_id;
  std::vector<GpsFix> fixes;
  double tau = 0.0;
};

inline constexpr double kEarthRadiusM = 6371000.0;  // mean Earth radius

// Great-circle distance in meters.
double haversine_m(const GeoPoint& a, const GeoPoint& b);

enum class SegmentKind { Stop, Intersection, Interpolated };

std::string to_string(SegmentKind kind);
SegmentKind segment_kind_from_string(const std::string& s);

struct RoadSegment {
  int id = 0;
  GeoPoint start;
  GeoPoint end;
  SegmentKind kind = SegmentKind::Interpolated;
  double cum_distance = 0.0;  // meters from route origin
};

// Discretization of one route: landmarks (stops, intersections) merged with
// interpolated points at `spacing` intervals, sorted by cum_distance.
struct SegmentGrid {
  std::string route_id;
  std::vector<RoadSegment> segments;
  double spacing = 100.0;

  int size() const { return static_cast<int>(segments.size()); }
  double route_length() const;
  std::vector<int> interpolation_indices() const;
  std::vector<int> landmark_indices() const;  // stops + intersections
  std::vector<int> stop_indices() const;
};

// Parses raw trajectory CSV (header: trip_id,lat,lon,timestamp). Fixes are
// grouped per trip in first-appearance order, sorted by timestamp, duplicate
// timestamps collapsed (first kept), and split into journeys wherever the
// time gap exceeds tau seconds. Journeys from a split trip get "#k" suffixes.
// Throws std::runtime_error naming the line on malformed rows; fixes with
// non-finite or out-of-range fields are dropped with one warning summarizing
// the count.
std::vector<Journey> parse_trajectories(std::istream& raw, double tau);

// (meters from journey start, seconds since journey start) per fix; first
// entry is (0, 0). Distances accumulate haversine legs between fixes.
std::vector<std::pair<double, double>> cumulative_distance(const Journey& journey);

// Builds the merged grid. Interpolated candidates sit at multiples of
// `spacing`; a candidate closer than spacing/2 to any landmark is dropped in
// favor of that landmark. Landmark positions must be inside [0, route_length]
// and pairwise distinct. Coordinates of interpolated points are interpolated
// between the nearest coordinate-bearing landmarks.
SegmentGrid build_segment_grid(double route_length,
                               const std::vector<std::pair<double, GeoPoint>>& stops,
                               const std::vector<std::pair<double, GeoPoint>>& intersections,
                               double spacing,
                               std::string route_id = {});

// Route description document (JSON on disk).
struct RouteDescription {
  std::string route_id;
  double route_length = 0.0;
  double spacing = 100.0;
  double line_count = 1.0;  // bus lines sharing the route
  std::vector<std::pair<double, GeoPoint>> stops;
  std::vector<std::pair<double, GeoPoint>> intersections;
};

RouteDescription load_route_file(const std::string& path);
void save_route_file(const RouteDescription& route, const std::string& path,
                     const std::string& config_digest);
SegmentGrid build_grid(const RouteDescription& route);

}  // namespace segsel::ingest
