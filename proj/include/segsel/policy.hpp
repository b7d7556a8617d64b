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

#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "segsel/features.hpp"
#include "segsel/rng.hpp"

namespace segsel::policy {

struct PolicyConfig {
  int n_total = 0;   // grid segments
  int n_interp = 0;  // interpolation points
  int m = 0;         // selected points
  int conv_out = 16;
  int conv_width = 3;
  int fc_width = 32;
};

// Selection network: width-3 conv (zero padded) over the state rows with the
// 8 features as channels, mean-pool, a dense layer on the pooled vector, a
// dense layer on the selection mask, concat, and a dense head emitting one
// (left, right) logit pair per selected point. Linear throughout; the only
// nonlinearity is the per-row softmax at the head.
struct PolicyParams {
  PolicyConfig cfg;
  Eigen::MatrixXd conv_w;  // conv_out x (8 * conv_width), col = channel*width + tap
  Eigen::VectorXd conv_b;
  Eigen::MatrixXd fc1_w;   // fc_width x conv_out
  Eigen::VectorXd fc1_b;
  Eigen::MatrixXd fc2_w;   // fc_width x n_interp
  Eigen::VectorXd fc2_b;
  Eigen::MatrixXd fc3_w;   // 2m x 2*fc_width
  Eigen::VectorXd fc3_b;

  // conv/fc1/fc2 ~ N(0, 1/fan_in), biases and the head zero, so the initial
  // action distribution is exactly uniform
  static PolicyParams init(const PolicyConfig& cfg, Rng& rng);
  static PolicyParams zeros(const PolicyConfig& cfg);

  int param_count() const;
  Eigen::VectorXd flatten() const;
  void unflatten(const Eigen::VectorXd& v);
  bool all_finite() const;
};

// Row i holds P(left), P(right) for selected point i; rows sum to 1.
struct ActionMatrix {
  Eigen::MatrixXd probs;  // m x 2
};

// Per-point index windows from the midpoints to the neighbors (Lagrange-free
// conflict avoidance): moving left stops at lower[i], moving right stays
// strictly below upper[i].
struct ActionBounds {
  std::vector<int> lower;
  std::vector<int> upper;
};

ActionMatrix forward(const PolicyParams& params, const features::RlState& state);

ActionBounds compute_bounds(const std::vector<int>& indices, int last_grid_index);

// Simultaneous one-step moves: action 0 shifts left to at most lower[i],
// action 1 shifts right to at most upper[i]-1; a move landing on a landmark
// becomes a null move. The result is strictly increasing by construction.
std::vector<int> apply_actions(const std::vector<int>& indices, const std::vector<int>& actions,
                               const ActionBounds& bounds,
                               const std::unordered_set<int>& landmark_indices);

std::vector<int> sample_actions(const ActionMatrix& probs, Rng& rng);

struct EpisodeStep {
  features::RlState state;
  std::vector<int> actions;
  double reward = 0.0;
};

// Mean negative reward-weighted log-likelihood over the episode,
// L = -(1/B)(1/M) sum_j sum_i log pi(a_i^j | S^j) * r^j.
double episode_loss(const PolicyParams& params, const std::vector<EpisodeStep>& episode);

// Analytic gradient of episode_loss. Zero rewards give a zero gradient;
// scaling rewards scales the gradient linearly.
PolicyParams backward(const PolicyParams& params, const std::vector<EpisodeStep>& episode);

struct PolicyCheckpoint {
  PolicyParams params;
  features::FeatureScaler scaler;
  std::string route_id;
  std::uint64_t seed = 0;
};

void save_policy(const PolicyCheckpoint& ckpt, const std::string& path,
                 const std::string& config_digest);
PolicyCheckpoint load_policy(const std::string& path);

}  // namespace segsel::policy
