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

#include <doctest.h>

#include <algorithm>
#include <sstream>
#include <vector>

#include "segsel/ingest.hpp"

using namespace segsel::ingest;

namespace {

std::string csv_for(const std::vector<std::pair<std::string, double>>& rows) {
  std::ostringstream os;
  os << "trip_id,lat,lon,timestamp\n";
  for (const auto& [id, ts] : rows) os << id << ",0.0,0.0," << ts << "\n";
  return os.str();
}

}  // namespace

TEST_SUITE("ingest") {
  TEST_CASE("haversine equator small arc") {
    // 0.001 deg of longitude on the equator is 111.19 m with R = 6371 km
    GeoPoint a{0.0, 0.0}, b{0.0, 0.001};
    CHECK(haversine_m(a, b) == doctest::Approx(111.19).epsilon(0.0005));
    CHECK(haversine_m(a, a) == 0.0);
    CHECK(haversine_m(a, b) == haversine_m(b, a));
  }

  TEST_CASE("parse empty stream") {
    std::istringstream in("trip_id,lat,lon,timestamp\n");
    CHECK(parse_trajectories(in, 300.0).empty());
  }

  TEST_CASE("journey split at gaps above tau") {
    // gaps 60, 60, 400, 60 with tau 300 split 5 fixes into 3 + 2
    std::istringstream in(csv_for({{"a", 0}, {"a", 60}, {"a", 120}, {"a", 520}, {"a", 580}}));
    auto js = parse_trajectories(in, 300.0);
    REQUIRE(js.size() == 2);
    CHECK(js[0].fixes.size() == 3);
    CHECK(js[1].fixes.size() == 2);
    CHECK(js[0].trip_id != js[1].trip_id);  // split parts renamed apart
  }

  TEST_CASE("no split when all gaps within tau") {
    std::istringstream in(csv_for({{"a", 0}, {"a", 60}, {"a", 120}, {"a", 180}}));
    auto js = parse_trajectories(in, 300.0);
    REQUIRE(js.size() == 1);
    CHECK(js[0].fixes.size() == 4);
    CHECK(js[0].trip_id == "a");
  }

  TEST_CASE("splitting is a partition of the trip's fixes") {
    std::vector<std::pair<std::string, double>> rows;
    for (double t : {0.0, 50.0, 500.0, 550.0, 1200.0, 1210.0, 1800.0}) rows.push_back({"t", t});
    std::istringstream in(csv_for(rows));
    auto js = parse_trajectories(in, 300.0);
    std::vector<double> seen;
    for (const auto& j : js)
      for (const auto& f : j.fixes) seen.push_back(f.timestamp);
    std::sort(seen.begin(), seen.end());
    REQUIRE(seen.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) CHECK(seen[i] == rows[i].second);
  }

  TEST_CASE("duplicate timestamps collapse to the first") {
    std::istringstream in(csv_for({{"a", 0}, {"a", 60}, {"a", 60}, {"a", 120}}));
    auto js = parse_trajectories(in, 300.0);
    REQUIRE(js.size() == 1);
    CHECK(js[0].fixes.size() == 3);
  }

  TEST_CASE("malformed row names the line") {
    std::istringstream in("trip_id,lat,lon,timestamp\na,0,0,0\na,not_a_number,0,60\n");
    CHECK_THROWS_WITH_AS(parse_trajectories(in, 300.0), doctest::Contains("line 3"),
                         std::runtime_error);
  }

  TEST_CASE("cumulative distance basics") {
    Journey j;
    j.trip_id = "t";
    j.fixes = {{{0.0, 0.0}, 100.0}};
    auto one = cumulative_distance(j);
    REQUIRE(one.size() == 1);
    CHECK(one[0].first == 0.0);
    CHECK(one[0].second == 0.0);

    j.fixes = {{{0.0, 0.0}, 100.0}, {{0.0, 0.0}, 160.0}};
    auto two = cumulative_distance(j);
    REQUIRE(two.size() == 2);
    CHECK(two[1].first == 0.0);  // zero displacement
    CHECK(two[1].second == 60.0);
  }

  TEST_CASE("cumulative distance ignores time translation") {
    Journey j;
    j.fixes = {{{0.0, 0.0}, 0.0}, {{0.0, 0.001}, 30.0}, {{0.0, 0.002}, 75.0}};
    auto base = cumulative_distance(j);
    for (auto& f : j.fixes) f.timestamp += 12345.0;
    auto shifted = cumulative_distance(j);
    REQUIRE(base.size() == shifted.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
      CHECK(base[i].first == shifted[i].first);
      CHECK(shifted[i].second == base[i].second);
    }
  }

  TEST_CASE("grid for a plain two-stop kilometer") {
    auto g = build_segment_grid(1000.0, {{0.0, {0, 0}}, {1000.0, {0, 0.009}}}, {}, 100.0, "r");
    CHECK(g.size() == 11);
    CHECK(g.interpolation_indices().size() == 9);
    CHECK(g.stop_indices().size() == 2);
    CHECK(g.segments.front().kind == SegmentKind::Stop);
    CHECK(g.segments.back().cum_distance == 1000.0);
  }

  TEST_CASE("grid with spacing beyond route length") {
    auto g = build_segment_grid(1000.0, {{0.0, {0, 0}}, {1000.0, {0, 0.009}}}, {}, 2000.0);
    CHECK(g.size() == 2);
    CHECK(g.interpolation_indices().empty());
  }

  TEST_CASE("candidate near a landmark is merged away") {
    // stop at 240 swallows the candidate at 200 (40 < spacing/2)
    auto g = build_segment_grid(
        500.0, {{0.0, {0, 0}}, {240.0, {0, 0.00216}}, {500.0, {0, 0.0045}}}, {}, 100.0);
    std::vector<double> got;
    for (const auto& s : g.segments) got.push_back(s.cum_distance);
    CHECK(got == std::vector<double>{0.0, 100.0, 240.0, 300.0, 400.0, 500.0});
  }

  TEST_CASE("grid rebuild from own landmarks is identical") {
    auto g = build_segment_grid(
        500.0, {{0.0, {0, 0}}, {240.0, {0, 0.00216}}, {500.0, {0, 0.0045}}}, {}, 100.0, "r");
    std::vector<std::pair<double, GeoPoint>> stops;
    for (int i : g.stop_indices()) {
      const auto& s = g.segments[static_cast<std::size_t>(i)];
      stops.push_back({s.cum_distance, s.start});
    }
    auto h = build_segment_grid(g.route_length(), stops, {}, g.spacing, "r");
    REQUIRE(h.size() == g.size());
    for (int i = 0; i < g.size(); ++i) {
      CHECK(h.segments[static_cast<std::size_t>(i)].cum_distance ==
            g.segments[static_cast<std::size_t>(i)].cum_distance);
      CHECK(h.segments[static_cast<std::size_t>(i)].kind ==
            g.segments[static_cast<std::size_t>(i)].kind);
    }
  }

  TEST_CASE("landmark positions outside the route are rejected") {
    CHECK_THROWS_AS(build_segment_grid(500.0, {{0.0, {0, 0}}, {600.0, {0, 0}}}, {}, 100.0),
                    std::invalid_argument);
  }
}
