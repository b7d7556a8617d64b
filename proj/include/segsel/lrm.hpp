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
#include <vector>

#include <Eigen/Dense>

#include "segsel/interp.hpp"

namespace segsel::lrm {

// Multivariate Gaussian over arrival times at a subset of grid segments.
// Predictions are conditional means given an observed prefix. `jitter` is the
// amount added to the diagonal when factorizing (sigma itself is stored raw).
struct GaussianEtaModel {
  std::vector<int> indices;  // grid indices, strictly increasing
  Eigen::VectorXd mu;        // seconds
  Eigen::MatrixXd sigma;     // seconds^2
  double jitter = 0.0;       // seconds^2

  int dim() const { return static_cast<int>(indices.size()); }
  int position_of(int grid_index) const;  // -1 when absent
};

// Smallest diagonal jitter that lets a Cholesky of sigma succeed:
// lambda = 1e-6 * trace(sigma)/m (floored at 1e-12), escalated tenfold at
// most three times. Throws if even that fails.
double probe_jitter(const Eigen::MatrixXd& sigma);

// Population moments (1/V normalization) of the selected columns. V >= 2.
// The required jitter is probed with probe_jitter.
GaussianEtaModel estimate_moments(const interp::ArrivalMatrix& arrivals,
                                  const std::vector<int>& indices);

// Conditional mean of the target's arrival time given the first
// observed.size() coordinates. `target_grid_index` must come strictly after
// the observed prefix in model.indices.
double predict_eta(const GaussianEtaModel& model, const Eigen::VectorXd& observed,
                   int target_grid_index);

// Rows/columns of `keep` only (keep must be a strictly increasing subset of
// model.indices). Restriction commutes with estimate_moments.
GaussianEtaModel restrict_model(const GaussianEtaModel& model, const std::vector<int>& keep);

void save_model(const GaussianEtaModel& model, const std::string& path,
                const std::string& config_digest);
GaussianEtaModel load_model(const std::string& path);

// Shared factorization of the leading k x k block, so one origin can serve
// many trips and targets with identical numerics to predict_eta.
class PrefixSolver {
 public:
  PrefixSolver(const GaussianEtaModel& model, int prefix_len);
  Eigen::VectorXd weights(const Eigen::VectorXd& observed) const;  // K^-1 (x - mu)
  double predict(const Eigen::VectorXd& weights, int target_pos) const;

 private:
  const GaussianEtaModel* model_;
  int k_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

// Evaluation protocol: one error per (trip, origin stop, later target stop),
// with the prefix observed up to the origin. Origins and targets are stop
// grid indices and must be present in the model. Errors are |pred - truth|
// in minutes, enumerated origin-major then trip then target.
struct TripleError {
  std::string trip_id;
  int origin_grid = 0;
  int target_grid = 0;
  double error_minutes = 0.0;
};

std::vector<TripleError> prediction_errors(const GaussianEtaModel& model,
                                           const interp::ArrivalMatrix& arrivals,
                                           const std::vector<int>& trip_rows,
                                           const std::vector<int>& stop_grid_indices);

}  // namespace segsel::lrm
