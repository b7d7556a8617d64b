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
#include <vector>

#include "segsel/training.hpp"

namespace segsel::eval {

// Mean absolute error in minutes over aligned prediction/truth lists.
double mae(const std::vector<double>& predicted_minutes, const std::vector<double>& truth_minutes);

double median(std::vector<double> values);

// Synthetic single-route generator. Per trip, the increment between adjacent
// grid points is base travel time plus Gaussian noise; hotspot increments add
// a truncated-at-zero Gaussian delay plus a sinusoidal time-of-day term
// driven by the trip's departure second. Increments clamp at zero, so rows
// are monotone. Stops sit every `stop_every` segments; the route runs along
// the equator so haversine distances are exact.
struct SyntheticRouteConfig {
  int n_segments = 50;
  double spacing_m = 100.0;
  int stop_every = 10;
  std::vector<int> hotspot_indices = {1, 11, 21, 33, 43};
  double hotspot_delay_mean_s = 20.0;
  double hotspot_delay_std_s = 3.0;
  double base_speed_mps = 6.0;
  double base_noise_std_s = 8.0;
  double time_of_day_effect_s = 300.0;
  int trips_train = 300;
  int trips_test = 50;
  std::uint64_t seed = 0;

  void validate() const;
};

SyntheticRouteConfig synthetic_config_from_json(const std::string& path);

struct SyntheticData {
  ingest::SegmentGrid grid;
  interp::ArrivalMatrix train;
  interp::ArrivalMatrix test;
  std::vector<double> depart_train_s;
  std::vector<double> depart_test_s;
  double mean_depart_s = 0.0;  // over the train split
  double line_count = 1.0;
};

SyntheticData generate_synthetic_route(const SyntheticRouteConfig& cfg);

// Anything the sweeps need to train and score.
struct Dataset {
  const ingest::SegmentGrid* grid = nullptr;
  const interp::ArrivalMatrix* train = nullptr;
  const interp::ArrivalMatrix* test = nullptr;
  double mean_depart_s = 0.0;
  double line_count = 1.0;
};

Dataset as_dataset(const SyntheticData& d);

struct EvalReport {
  std::string label;
  std::vector<std::uint64_t> seeds;
  std::vector<double> per_seed_mae;  // minutes, test split
  double median_mae = 0.0;
  std::string config_digest;
};

// Test-split MAE of one predictor over the shared stop-to-stop protocol.
double evaluate_model_mae(const lrm::GaussianEtaModel& model, const Dataset& data);

// In-sample train errors of the all-segments predictor, keyed for BCR.
training::BenchmarkTable make_benchmark_from_all(const Dataset& data);

// Per-seed runs of each variant; identical triples and seeds across variants.
std::vector<EvalReport> run_selection_ablation(const Dataset& data,
                                               const training::TrainConfig& base,
                                               const training::RewardConfig& reward,
                                               const std::vector<std::uint64_t>& seeds);
std::vector<EvalReport> sweep_proportion(const Dataset& data, const training::TrainConfig& base,
                                         const training::RewardConfig& reward,
                                         const std::vector<std::uint64_t>& seeds,
                                         const std::vector<double>& fractions = {1.0 / 3.0,
                                                                                 2.0 / 3.0, 1.0});
std::vector<EvalReport> sweep_action_iterations(const Dataset& data,
                                                const training::TrainConfig& base,
                                                const training::RewardConfig& reward,
                                                const std::vector<std::uint64_t>& seeds,
                                                const std::vector<int>& iterations = {2, 4, 6, 8});
std::vector<EvalReport> sweep_reward_strategy(const Dataset& data,
                                              const training::TrainConfig& base,
                                              const training::RewardConfig& reward,
                                              const std::vector<std::uint64_t>& seeds);
std::vector<EvalReport> sweep_mask(const Dataset& data, const training::TrainConfig& base,
                                   const training::RewardConfig& reward,
                                   const std::vector<std::uint64_t>& seeds);

void save_reports(const std::vector<EvalReport>& reports, const std::string& path,
                  const std::string& config_digest);
void write_sweep_plot(const std::vector<EvalReport>& reports, const std::string& path,
                      const std::string& title);

}  // namespace segsel::eval
