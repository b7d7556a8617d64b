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

#include "segsel/features.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace segsel::features {

Eigen::Matrix<double, kFeatureDim, 1> SegmentFeature::to_vector() const {
  Eigen::Matrix<double, kFeatureDim, 1> v;
  v << depart_time, travel_time, dist_from_start, dist_next, line_count, ohc[0], ohc[1], ohc[2];
  return v;
}

SegmentFeature encode_segment(const ingest::SegmentGrid& grid, int i, double depart_time,
                              double travel_time, double line_count) {
  if (i < 0 || i >= grid.size())
    throw std::invalid_argument("encode_segment: segment index " + std::to_string(i) +
                                " out of range");
  if (!std::isfinite(depart_time) || !std::isfinite(travel_time) || !std::isfinite(line_count))
    throw std::invalid_argument("encode_segment: missing context for segment " + std::to_string(i));

  const auto& seg = grid.segments[static_cast<std::size_t>(i)];
  SegmentFeature f;
  f.depart_time = depart_time;
  f.travel_time = travel_time;
  f.dist_from_start = seg.cum_distance;
  f.dist_next = i + 1 < grid.size() ? grid.segments[static_cast<std::size_t>(i) + 1].cum_distance
                                    : grid.route_length();
  f.line_count = line_count;
  switch (seg.kind) {
    case ingest::SegmentKind::Stop: f.ohc = {1.0, 0.0, 0.0}; break;
    case ingest::SegmentKind::Intersection: f.ohc = {0.0, 1.0, 0.0}; break;
    case ingest::SegmentKind::Interpolated: f.ohc = {0.0, 0.0, 1.0}; break;
  }
  return f;
}

Eigen::MatrixXd encode_route(const ingest::SegmentGrid& grid, double depart_time,
                             const Eigen::VectorXd& travel_times, double line_count) {
  if (travel_times.size() != grid.size())
    throw std::invalid_argument("encode_route: travel_times length does not match grid");
  Eigen::MatrixXd f(grid.size(), kFeatureDim);
  for (int i = 0; i < grid.size(); ++i)
    f.row(i) = encode_segment(grid, i, depart_time, travel_times(i), line_count).to_vector();
  return f;
}

FeatureScaler FeatureScaler::fit(const Eigen::MatrixXd& f) {
  if (f.rows() < 1 || f.cols() != kFeatureDim)
    throw std::invalid_argument("FeatureScaler::fit: bad feature matrix shape");
  FeatureScaler s;
  const double n = static_cast<double>(f.rows());
  for (int c = 0; c < 5; ++c) {
    double mean = f.col(c).mean();
    double var = (f.col(c).array() - mean).square().sum() / n;
    s.mean(c) = mean;
    s.std(c) = std::max(std::sqrt(var), 1e-9);
  }
  return s;
}

Eigen::MatrixXd FeatureScaler::apply(const Eigen::MatrixXd& f) const {
  if (f.cols() != kFeatureDim)
    throw std::invalid_argument("FeatureScaler::apply: bad feature matrix shape");
  Eigen::MatrixXd out = f;
  for (int c = 0; c < 5; ++c)
    out.col(c) = (f.col(c).array() - mean(c)) / std(c);
  return out;
}

SelectionState make_selection(const ingest::SegmentGrid& grid,
                              std::vector<int> selected_grid_indices) {
  auto interp_idx = grid.interpolation_indices();
  SelectionState s;
  s.mask.assign(interp_idx.size(), 0);
  for (std::size_t i = 0; i < selected_grid_indices.size(); ++i) {
    int g = selected_grid_indices[i];
    if (i > 0 && g <= selected_grid_indices[i - 1])
      throw std::invalid_argument("make_selection: indices must be strictly increasing");
    auto it = std::lower_bound(interp_idx.begin(), interp_idx.end(), g);
    if (it == interp_idx.end() || *it != g)
      throw std::invalid_argument("make_selection: grid index " + std::to_string(g) +
                                  " is not an interpolation point");
    s.mask[static_cast<std::size_t>(it - interp_idx.begin())] = 1;
  }
  s.indices = std::move(selected_grid_indices);
  return s;
}

RlState assemble_state(const Eigen::MatrixXd& f, const SelectionState& selection) {
  if (f.cols() != kFeatureDim)
    throw std::invalid_argument("assemble_state: bad feature matrix shape");
  if (selection.indices.empty())
    throw std::invalid_argument("assemble_state: empty selection");
  std::size_t popcount = 0;
  for (auto b : selection.mask) popcount += b;
  if (popcount != selection.indices.size())
    throw std::invalid_argument("assemble_state: mask and indices disagree");

  const Eigen::Index n = f.rows();
  const Eigen::Index m = static_cast<Eigen::Index>(selection.indices.size());
  RlState st;
  st.s_a.resize(n + m, kFeatureDim);
  st.s_a.topRows(n) = f;
  for (Eigen::Index i = 0; i < m; ++i) {
    int g = selection.indices[static_cast<std::size_t>(i)];
    if (g < 0 || g >= n)
      throw std::invalid_argument("assemble_state: selected index " + std::to_string(g) +
                                  " out of range");
    st.s_a.row(n + i) = f.row(g);
  }
  st.s_b.resize(static_cast<Eigen::Index>(selection.mask.size()));
  for (std::size_t i = 0; i < selection.mask.size(); ++i)
    st.s_b(static_cast<Eigen::Index>(i)) = selection.mask[i] ? 1.0 : 0.0;
  return st;
}

}  // namespace segsel::features
