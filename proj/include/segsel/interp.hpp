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

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "segsel/ingest.hpp"

namespace segsel::interp {

// Exponential variogram gamma(h) = nugget + (sill-nugget) * (1 - exp(-h/range)),
// gamma(0) = 0.
struct VariogramModel {
  enum class Family { Exponential };
  double nugget = 0.0;
  double sill = 0.0;
  double range_param = 0.0;
  Family family = Family::Exponential;

  double operator()(double h) const;
};

// Dense arrival times, seconds since trip departure (column 0 is 0 by
// construction), one row per trip, one column per grid segment.
struct ArrivalMatrix {
  Eigen::MatrixXd times;
  std::vector<std::string> trip_ids;
  std::string grid_ref;  // route_id of the grid the columns refer to

  int trips() const { return static_cast<int>(times.rows()); }
  int segments() const { return static_cast<int>(times.cols()); }
};

using DistTimePairs = std::vector<std::pair<double, double>>;  // (m, s), from cumulative_distance

// Weighted least-squares fit of the exponential family to the empirical
// semivariogram binned at `spacing` resolution. Needs >= 4 pairs covering
// >= 3 distinct distances. All-equal times degenerate to a nugget-only model
// (sill = nugget, range_param = spacing).
VariogramModel fit_variogram(const DistTimePairs& pairs, double spacing);

// Ordinary kriging of one trip's sparse pairs onto every grid point. Grid
// points matching an observation distance (within 1e-9 m) return that
// observation unchanged. A singular kriging system falls back to piecewise
// linear interpolation for the whole trip. Grid points farther than one
// spacing outside the observed span raise an extrapolation error.
std::vector<double> krige_arrival_times(const DistTimePairs& pairs, const VariogramModel& model,
                                        const ingest::SegmentGrid& grid);

// Pool-adjacent-violators: closest non-decreasing sequence in least squares;
// pooled stretches are replaced by their mean. Idempotent.
std::vector<double> enforce_monotone(const std::vector<double>& times);

// Full per-trip pipeline: variogram fit (linear fallback when a trip is too
// sparse to fit), kriging, monotone repair. Input pairs must start at (0, 0).
ArrivalMatrix interpolate_trips(const std::vector<std::pair<std::string, DistTimePairs>>& trips,
                                const ingest::SegmentGrid& grid);

// Delimited text: optional leading '#' comment lines, then a header row of
// segment cum_distances, then one row per trip prefixed by trip_id.
void save_arrival_matrix(const ArrivalMatrix& m, const ingest::SegmentGrid& grid,
                         const std::string& path, const std::string& config_digest);
ArrivalMatrix load_arrival_matrix(const std::string& path);

}  // namespace segsel::interp
