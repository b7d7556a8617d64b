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

#include <vector>

#include "segsel/features.hpp"
#include "segsel/ingest.hpp"

using namespace segsel::features;
using segsel::ingest::build_segment_grid;
using segsel::ingest::GeoPoint;
using segsel::ingest::SegmentKind;

namespace {

segsel::ingest::SegmentGrid tiny_grid() {
  // 0 (stop), 100 (interp), 200 (stop)
  return build_segment_grid(200.0, {{0.0, GeoPoint{}}, {200.0, GeoPoint{}}}, {}, 100.0, "tiny");
}

}  // namespace

TEST_SUITE("features") {
  TEST_CASE("interpolated segment mid-route") {
    auto grid = tiny_grid();
    REQUIRE(grid.segments[1].kind == SegmentKind::Interpolated);
    auto f = encode_segment(grid, 1, 28800.0, 120.0, 3.0);
    auto v = f.to_vector();
    REQUIRE(v.size() == kFeatureDim);
    CHECK(v(0) == 28800.0);
    CHECK(v(1) == 120.0);
    CHECK(v(2) == 100.0);  // distance from route start
    CHECK(v(3) == 200.0);  // next segment's cumulative distance (route end here)
    CHECK(v(4) == 3.0);
    CHECK(v(5) == 0.0);
    CHECK(v(6) == 0.0);
    CHECK(v(7) == 1.0);
  }

  TEST_CASE("stop one-hot") {
    auto grid = tiny_grid();
    auto v = encode_segment(grid, 0, 0.0, 0.0, 1.0).to_vector();
    CHECK(v(5) == 1.0);
    CHECK(v(6) == 0.0);
    CHECK(v(7) == 0.0);
  }

  TEST_CASE("intersection one-hot") {
    auto grid = build_segment_grid(200.0, {{0.0, GeoPoint{}}, {200.0, GeoPoint{}}},
                                   {{100.0, GeoPoint{}}}, 100.0);
    REQUIRE(grid.segments[1].kind == SegmentKind::Intersection);
    auto v = encode_segment(grid, 1, 0.0, 10.0, 1.0).to_vector();
    CHECK(v(5) == 0.0);
    CHECK(v(6) == 1.0);
    CHECK(v(7) == 0.0);
  }

  TEST_CASE("route matrix stacks per-segment rows") {
    auto grid = tiny_grid();
    Eigen::VectorXd tt(3);
    tt << 0, 120, 260;
    auto f = encode_route(grid, 28800.0, tt, 3.0);
    REQUIRE(f.rows() == 3);
    REQUIRE(f.cols() == kFeatureDim);
    for (int i = 0; i < 3; ++i) {
      CHECK(f(i, 0) == 28800.0);
      CHECK(f(i, 1) == tt(i));
    }
    CHECK(f(1, 2) == 100.0);
    CHECK(f(1, 3) == 200.0);
    Eigen::VectorXd short_tt(2);
    CHECK_THROWS_AS(encode_route(grid, 0.0, short_tt, 1.0), std::invalid_argument);
  }

  TEST_CASE("scaler z-scores numerics and passes one-hots through") {
    Eigen::MatrixXd f(4, kFeatureDim);
    f.setZero();
    for (int r = 0; r < 4; ++r) {
      f(r, 0) = 100.0 * r;
      f(r, 1) = 7.0;  // constant numeric column
      f(r, 5) = (r % 2 == 0) ? 1.0 : 0.0;
      f(r, 7) = (r % 2 == 0) ? 0.0 : 1.0;
    }
    auto s = FeatureScaler::fit(f);
    auto z = s.apply(f);
    // column 0 is centered with unit population variance
    double mean0 = z.col(0).mean();
    double var0 = (z.col(0).array() - mean0).square().mean();
    CHECK(mean0 == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(var0 == doctest::Approx(1.0).epsilon(1e-9));
    // constant column maps to zero instead of blowing up on std ~ 0
    for (int r = 0; r < 4; ++r) CHECK(z(r, 1) == doctest::Approx(0.0));
    // one-hots untouched
    for (int r = 0; r < 4; ++r) {
      CHECK(z(r, 5) == f(r, 5));
      CHECK(z(r, 6) == f(r, 6));
      CHECK(z(r, 7) == f(r, 7));
    }
  }

  TEST_CASE("selection mask matches indices") {
    auto grid = build_segment_grid(500.0, {{0.0, GeoPoint{}}, {500.0, GeoPoint{}}}, {}, 100.0);
    // interpolation points sit at grid indices 1..4
    auto sel = make_selection(grid, {1, 3});
    REQUIRE(sel.mask.size() == 4);
    CHECK(sel.mask[0] == 1);
    CHECK(sel.mask[1] == 0);
    CHECK(sel.mask[2] == 1);
    CHECK(sel.mask[3] == 0);
    CHECK(sel.indices == std::vector<int>{1, 3});
    CHECK_THROWS_AS(make_selection(grid, {0}), std::invalid_argument);   // stop, not interp
    CHECK_THROWS_AS(make_selection(grid, {3, 1}), std::invalid_argument);
  }

  TEST_CASE("state stacks selected rows after the full matrix") {
    auto grid = build_segment_grid(500.0, {{0.0, GeoPoint{}}, {500.0, GeoPoint{}}}, {}, 100.0);
    Eigen::VectorXd tt(6);
    tt << 0, 10, 25, 40, 70, 90;
    auto f = encode_route(grid, 100.0, tt, 1.0);
    auto sel = make_selection(grid, {2, 4});
    auto st = assemble_state(f, sel);
    REQUIRE(st.s_a.rows() == 6 + 2);
    REQUIRE(st.s_a.cols() == kFeatureDim);
    CHECK((st.s_a.row(6) - f.row(2)).norm() == 0.0);
    CHECK((st.s_a.row(7) - f.row(4)).norm() == 0.0);
    REQUIRE(st.s_b.size() == 4);
    CHECK(st.s_b(0) == 0.0);
    CHECK(st.s_b(1) == 1.0);
    CHECK(st.s_b(2) == 0.0);
    CHECK(st.s_b(3) == 1.0);
  }

  TEST_CASE("empty selection is rejected") {
    Eigen::MatrixXd f(3, kFeatureDim);
    f.setZero();
    SelectionState none;
    none.mask = {0, 0, 0};
    CHECK_THROWS_AS(assemble_state(f, none), std::invalid_argument);
  }

  TEST_CASE("appended block ignores changes to unselected rows") {
    auto grid = build_segment_grid(500.0, {{0.0, GeoPoint{}}, {500.0, GeoPoint{}}}, {}, 100.0);
    Eigen::VectorXd tt(6);
    tt << 0, 10, 25, 40, 70, 90;
    auto f = encode_route(grid, 100.0, tt, 1.0);
    auto sel = make_selection(grid, {2, 4});
    auto st = assemble_state(f, sel);
    Eigen::MatrixXd g = f;
    g.row(1).swap(g.row(3));  // perturb rows the selection does not touch
    auto st2 = assemble_state(g, sel);
    CHECK((st2.s_a.bottomRows(2) - st.s_a.bottomRows(2)).norm() == 0.0);
    CHECK((st2.s_b - st.s_b).norm() == 0.0);
  }
}
