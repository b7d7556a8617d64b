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
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "segsel/features.hpp"
#include "segsel/lrm.hpp"
#include "segsel/policy.hpp"

namespace segsel::training {

enum class RewardStrategy { Bcr, Ier, Atr };

std::string to_string(RewardStrategy s);
RewardStrategy reward_strategy_from_string(const std::string& s);

// Baseline errors for BCR, keyed by (trip_id, origin grid index, horizon in
// grid steps). Delimited text columns: trip_id,origin_index,horizon,error_minutes.
struct BenchmarkTable {
  std::map<std::tuple<std::string, int, int>, double> entries;

  double lookup(const std::string& trip_id, int origin_grid, int horizon) const;
  static BenchmarkTable load(const std::string& path);
  void save(const std::string& path, const std::string& config_digest) const;
};

struct RewardConfig {
  RewardStrategy strategy = RewardStrategy::Atr;
  double epsilon_minutes = 0.1;
  BenchmarkTable benchmark;  // required for Bcr
  bool has_benchmark = false;
};

// Fraction of points beating the benchmark error.
double reward_bcr(const std::vector<double>& errors_minutes,
                  const std::vector<double>& benchmark_minutes);
// Mean inverse error, epsilon-regularized.
double reward_ier(const std::vector<double>& errors_minutes, double epsilon_minutes);
// Negated mean absolute error, so that greater is better.
double reward_atr(const std::vector<double>& errors_minutes);

double compute_reward(const RewardConfig& cfg, const std::vector<lrm::TripleError>& errors);

struct TrainConfig {
  int epochs = 100;
  int batch_size = 16;
  double lr = 1e-3;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int action_iterations = 2;          // B
  double selection_fraction = 2.0 / 3.0;
  bool use_mask = true;
  std::uint64_t seed = 0;

  void validate() const;
};

// Base rate for the first 40 epochs, then a tenth per 20 epochs.
double lr_at_epoch(double base_lr, int epoch);

// SGD with classic momentum; weight decay folded into the gradient:
// v <- momentum*v + (g + wd*p); p <- p - lr(epoch)*v.
class SgdOptimizer {
 public:
  explicit SgdOptimizer(int n) : velocity_(Eigen::VectorXd::Zero(n)) {}
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, const TrainConfig& cfg,
            int epoch);

 private:
  Eigen::VectorXd velocity_;
};

struct EpochLog {
  int epoch = 0;
  double reward_mean = 0.0;
  double train_mae = 0.0;        // minutes, stop-to-stop protocol over the train split
  std::string selection_digest;  // 16-hex FNV of the selected grid indices
};

struct TrainResult {
  policy::PolicyParams params;
  features::FeatureScaler scaler;
  lrm::GaussianEtaModel model;        // restricted to final selection + landmarks
  features::SelectionState selection;
  std::vector<EpochLog> log;          // one row per epoch
};

// Per-route context the trainer cannot derive from the arrival matrix alone.
struct RouteContext {
  const ingest::SegmentGrid* grid = nullptr;
  double mean_depart_s = 0.0;  // seconds of day, train-split mean
  double line_count = 1.0;
};

// Seeded initial selection: M = floor(fraction * N_interp) interpolation
// points sampled uniformly without replacement (stream "selection-init").
// Shared by the trainer and the random-selection baseline.
std::vector<int> initial_selection(const ingest::SegmentGrid& grid, double fraction,
                                   std::uint64_t seed);

// Policy-gradient training loop. Each epoch shuffles the train trips,
// partitions them into batches, runs B action iterations per batch (forward,
// sample, bounded conflict-free move, LRM refit on the new selection, reward
// on the batch trips), and applies one SGD update per batch from that
// episode. The convergence log gets one row per epoch with the epoch's mean
// reward and the full-train MAE of the final selection.
TrainResult dprl_train(const interp::ArrivalMatrix& train, const RouteContext& ctx,
                       const TrainConfig& cfg, const RewardConfig& reward);

std::string selection_digest(const std::vector<int>& indices);

void save_convergence_log(const std::vector<EpochLog>& log, const std::string& path,
                          const std::string& config_digest);
std::vector<EpochLog> load_convergence_log(const std::string& path);

}  // namespace segsel::training
