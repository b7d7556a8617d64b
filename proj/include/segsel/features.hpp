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

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "segsel/ingest.hpp"

namespace segsel::features {

inline constexpr int kFeatureDim = 8;  // 5 numeric + 3 one-hot

// Per-segment descriptor: departure time (s of day), travel time to reach the
// segment (s), distance from route start and to the next segment (m), number
// of bus lines, and a one-hot kind code (stop / intersection / interpolated).
struct SegmentFeature {
  double depart_time = 0.0;
  double travel_time = 0.0;
  double dist_from_start = 0.0;
  double dist_next = 0.0;
  double line_count = 0.0;
  std::array<double, 3> ohc{0.0, 0.0, 0.0};

  Eigen::Matrix<double, kFeatureDim, 1> to_vector() const;
};

SegmentFeature encode_segment(const ingest::SegmentGrid& grid, int i, double depart_time,
                              double travel_time, double line_count);

// Raw feature matrix F, one row per grid segment.
Eigen::MatrixXd encode_route(const ingest::SegmentGrid& grid, double depart_time,
                             const Eigen::VectorXd& travel_times, double line_count);

// Z-scores the numeric dims (0..4) with a population std floored at 1e-9;
// one-hot dims pass through. Fitted on training data only and reused as is.
struct FeatureScaler {
  Eigen::Matrix<double, kFeatureDim, 1> mean = Eigen::Matrix<double, kFeatureDim, 1>::Zero();
  Eigen::Matrix<double, kFeatureDim, 1> std = Eigen::Matrix<double, kFeatureDim, 1>::Ones();

  static FeatureScaler fit(const Eigen::MatrixXd& f);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& f) const;
};

// Mask over interpolation points (by interp position) plus the same choice as
// sorted grid indices. mask.size() = N_interp, popcount = indices.size() = M.
struct SelectionState {
  std::vector<std::uint8_t> mask;
  std::vector<int> indices;
};

SelectionState make_selection(const ingest::SegmentGrid& grid,
                              std::vector<int> selected_grid_indices);

// Policy input: S_a stacks F with the selected rows appended in index order;
// S_b is the selection mask as doubles.
struct RlState {
  Eigen::MatrixXd s_a;   // (N + M) x 8
  Eigen::VectorXd s_b;   // N_interp
};

RlState assemble_state(const Eigen::MatrixXd& f, const SelectionState& selection);

}  // namespace segsel::features
