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

#include "segsel/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "segsel/detail/io.hpp"
#include "segsel/log.hpp"
#include "segsel/rng.hpp"

namespace segsel::training {

std::string to_string(RewardStrategy s) {
  switch (s) {
    case RewardStrategy::Bcr: return "bcr";
    case RewardStrategy::Ier: return "ier";
    case RewardStrategy::Atr: return "atr";
  }
  throw std::logic_error("to_string: bad RewardStrategy");
}

RewardStrategy reward_strategy_from_string(const std::string& s) {
  if (s == "bcr") return RewardStrategy::Bcr;
  if (s == "ier") return RewardStrategy::Ier;
  if (s == "atr") return RewardStrategy::Atr;
  throw std::runtime_error("unknown reward strategy: " + s + " (expected bcr|ier|atr)");
}

double BenchmarkTable::lookup(const std::string& trip_id, int origin_grid, int horizon) const {
  auto it = entries.find({trip_id, origin_grid, horizon});
  if (it == entries.end())
    throw std::runtime_error("benchmark table has no entry for trip " + trip_id + ", origin " +
                             std::to_string(origin_grid) + ", horizon " + std::to_string(horizon));
  return it->second;
}

BenchmarkTable BenchmarkTable::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  BenchmarkTable t;
  std::string line;
  long line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv = detail::trim(line);
    if (sv.empty() || sv.front() == '#') continue;
    auto cells = detail::split_line(sv);
    if (!header_seen) {
      if (cells.size() != 4 || cells[0] != "trip_id" || cells[1] != "origin_index" ||
          cells[2] != "horizon" || cells[3] != "error_minutes")
        throw std::runtime_error("benchmark parse error at line " + std::to_string(line_no) +
                                 ": expected header trip_id,origin_index,horizon,error_minutes");
      header_seen = true;
      continue;
    }
    if (cells.size() != 4)
      throw std::runtime_error("benchmark parse error at line " + std::to_string(line_no));
    int origin = static_cast<int>(detail::parse_double(cells[1], "origin_index"));
    int horizon = static_cast<int>(detail::parse_double(cells[2], "horizon"));
    double err = detail::parse_double(cells[3], "error_minutes");
    t.entries[{cells[0], origin, horizon}] = err;
  }
  if (!header_seen) throw std::runtime_error("benchmark table " + path + " is empty");
  return t;
}

void BenchmarkTable::save(const std::string& path, const std::string& config_digest) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path);
  if (!config_digest.empty()) out << "# config_digest=" << config_digest << "\n";
  out << "trip_id,origin_index,horizon,error_minutes\n";
  for (const auto& [key, err] : entries)
    out << std::get<0>(key) << "," << std::get<1>(key) << "," << std::get<2>(key) << ","
        << detail::format_double(err) << "\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

double reward_bcr(const std::vector<double>& errors_minutes,
                  const std::vector<double>& benchmark_minutes) {
  if (errors_minutes.empty() || errors_minutes.size() != benchmark_minutes.size())
    throw std::invalid_argument("reward_bcr: errors and benchmark must align and be non-empty");
  std::size_t beat = 0;
  for (std::size_t i = 0; i < errors_minutes.size(); ++i)
    if (errors_minutes[i] < benchmark_minutes[i]) ++beat;
  return static_cast<double>(beat) / static_cast<double>(errors_minutes.size());
}

double reward_ier(const std::vector<double>& errors_minutes, double epsilon_minutes) {
  if (errors_minutes.empty()) throw std::invalid_argument("reward_ier: no errors");
  if (epsilon_minutes < 0.0) throw std::invalid_argument("reward_ier: epsilon must be >= 0");
  double s = 0.0;
  for (double e : errors_minutes) {
    if (e < 0.0) throw std::invalid_argument("reward_ier: negative error");
    s += 1.0 / (e + epsilon_minutes);
  }
  return s / static_cast<double>(errors_minutes.size());
}

double reward_atr(const std::vector<double>& errors_minutes) {
  if (errors_minutes.empty()) throw std::invalid_argument("reward_atr: no errors");
  double s = 0.0;
  for (double e : errors_minutes) {
    if (e < 0.0) throw std::invalid_argument("reward_atr: negative error");
    s += e;
  }
  return -s / static_cast<double>(errors_minutes.size());
}

double compute_reward(const RewardConfig& cfg, const std::vector<lrm::TripleError>& errors) {
  std::vector<double> vals;
  vals.reserve(errors.size());
  for (const auto& e : errors) vals.push_back(e.error_minutes);
  switch (cfg.strategy) {
    case RewardStrategy::Atr: return reward_atr(vals);
    case RewardStrategy::Ier: return reward_ier(vals, cfg.epsilon_minutes);
    case RewardStrategy::Bcr: {
      if (!cfg.has_benchmark)
        throw std::runtime_error("bcr reward requires a benchmark table");
      std::vector<double> bench;
      bench.reserve(errors.size());
      for (const auto& e : errors)
        bench.push_back(
            cfg.benchmark.lookup(e.trip_id, e.origin_grid, e.target_grid - e.origin_grid));
      return reward_bcr(vals, bench);
    }
  }
  throw std::logic_error("compute_reward: bad strategy");
}

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("train config: epochs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
  if (!(lr > 0.0)) throw std::invalid_argument("train config: lr must be positive");
  if (momentum < 0.0 || momentum >= 1.0)
    throw std::invalid_argument("train config: momentum must be in [0, 1)");
  if (weight_decay < 0.0) throw std::invalid_argument("train config: weight_decay must be >= 0");
  if (action_iterations < 1)
    throw std::invalid_argument("train config: action_iterations must be >= 1");
  if (!(selection_fraction > 0.0) || selection_fraction > 1.0)
    throw std::invalid_argument("train config: selection_fraction must be in (0, 1]");
}

double lr_at_epoch(double base_lr, int epoch) {
  if (epoch < 40) return base_lr;
  int drops = 1 + (epoch - 40) / 20;
  return base_lr * std::pow(0.1, drops);
}

void SgdOptimizer::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad,
                        const TrainConfig& cfg, int epoch) {
  if (params.size() != velocity_.size() || grad.size() != velocity_.size())
    throw std::invalid_argument("SgdOptimizer: size mismatch");
  velocity_ = cfg.momentum * velocity_ + (grad + cfg.weight_decay * params);
  params -= lr_at_epoch(cfg.lr, epoch) * velocity_;
}

std::string selection_digest(const std::vector<int>& indices) {
  std::uint64_t h = fnv1a64(indices.data(), indices.size() * sizeof(int));
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<int> initial_selection(const ingest::SegmentGrid& grid, double fraction,
                                   std::uint64_t seed) {
  auto interp_idx = grid.interpolation_indices();
  const int n_interp = static_cast<int>(interp_idx.size());
  const int m = static_cast<int>(std::floor(fraction * n_interp));
  if (m < 1)
    throw std::invalid_argument("initial_selection: fraction " + detail::format_double(fraction) +
                                " selects no points (N_interp = " + std::to_string(n_interp) + ")");
  Rng rng(seed, "selection-init");
  auto picks = rng.sample_without_replacement(n_interp, m);
  std::sort(picks.begin(), picks.end());
  std::vector<int> out;
  out.reserve(picks.size());
  for (int p : picks) out.push_back(interp_idx[static_cast<std::size_t>(p)]);
  return out;
}

namespace {

std::vector<int> union_sorted(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

}  // namespace

TrainResult dprl_train(const interp::ArrivalMatrix& train, const RouteContext& ctx,
                       const TrainConfig& cfg, const RewardConfig& reward) {
  cfg.validate();
  if (ctx.grid == nullptr) throw std::invalid_argument("dprl_train: missing grid");
  const auto& grid = *ctx.grid;
  if (train.segments() != grid.size())
    throw std::invalid_argument("dprl_train: arrival matrix does not match grid");
  if (reward.strategy == RewardStrategy::Bcr && !reward.has_benchmark)
    throw std::invalid_argument("dprl_train: bcr reward requires a benchmark table");

  const int n_total = grid.size();
  auto interp_idx = grid.interpolation_indices();
  auto landmarks = grid.landmark_indices();
  auto stops = grid.stop_indices();
  if (stops.size() < 2) throw std::invalid_argument("dprl_train: need at least 2 stops");
  const int n_interp = static_cast<int>(interp_idx.size());
  const int m = static_cast<int>(std::floor(cfg.selection_fraction * n_interp));
  if (m < 1) throw std::invalid_argument("dprl_train: selection_fraction selects no points");

  std::vector<int> all_indices(static_cast<std::size_t>(n_total));
  for (int i = 0; i < n_total; ++i) all_indices[static_cast<std::size_t>(i)] = i;
  lrm::GaussianEtaModel full = lrm::estimate_moments(train, all_indices);

  // route-level state features from train statistics
  Eigen::MatrixXd f_raw = features::encode_route(grid, ctx.mean_depart_s, full.mu, ctx.line_count);
  features::FeatureScaler scaler = features::FeatureScaler::fit(f_raw);
  Eigen::MatrixXd f = scaler.apply(f_raw);

  features::SelectionState selection =
      features::make_selection(grid, initial_selection(grid, cfg.selection_fraction, cfg.seed));

  Rng action_rng(cfg.seed, "action-sampling");
  Rng batch_rng(cfg.seed, "batch-shuffle");
  Rng init_rng(cfg.seed, "policy-init");

  policy::PolicyConfig pcfg;
  pcfg.n_total = n_total;
  pcfg.n_interp = n_interp;
  pcfg.m = m;
  policy::PolicyParams params = policy::PolicyParams::init(pcfg, init_rng);
  SgdOptimizer opt(params.param_count());

  std::unordered_set<int> landmark_set(landmarks.begin(), landmarks.end());
  auto model_for = [&](const std::vector<int>& selected) {
    return lrm::restrict_model(full, union_sorted(selected, landmarks));
  };

  std::vector<int> all_rows(static_cast<std::size_t>(train.trips()));
  for (int r = 0; r < train.trips(); ++r) all_rows[static_cast<std::size_t>(r)] = r;

  // Sufficient statistics over all trips, so that per-batch leave-out moments
  // are a cheap subtraction. Rewarding a batch under a model fitted without it
  // keeps the reward an out-of-sample signal; in-sample errors barely react to
  // selection changes once the covariance starts absorbing sampling noise.
  const int vtotal = train.trips();
  Eigen::VectorXd stat_sum = Eigen::VectorXd::Zero(n_total);
  Eigen::MatrixXd stat_outer = Eigen::MatrixXd::Zero(n_total, n_total);
  for (int v = 0; v < vtotal; ++v) {
    Eigen::VectorXd t = train.times.row(v).transpose();
    stat_sum += t;
    stat_outer.noalias() += t * t.transpose();
  }
  auto loo_full_model = [&](const std::vector<int>& batch) {
    const int vloo = vtotal - static_cast<int>(batch.size());
    if (vloo < 2) return full;  // too few left-out trips to fit anything
    Eigen::VectorXd s = stat_sum;
    Eigen::MatrixXd o = stat_outer;
    for (int r : batch) {
      Eigen::VectorXd t = train.times.row(r).transpose();
      s -= t;
      o.noalias() -= t * t.transpose();
    }
    lrm::GaussianEtaModel out;
    out.indices = all_indices;
    out.mu = s / static_cast<double>(vloo);
    out.sigma = o / static_cast<double>(vloo) - out.mu * out.mu.transpose();
    out.sigma = ((out.sigma + out.sigma.transpose()) / 2.0).eval();
    out.jitter = lrm::probe_jitter(out.sigma);
    return out;
  };

  TrainResult result;
  result.scaler = scaler;
  result.log.reserve(static_cast<std::size_t>(cfg.epochs));

  // Running reward average, used as the baseline when an episode has a single
  // step and its own mean would erase the signal entirely.
  double reward_ema = 0.0;
  bool reward_ema_primed = false;
  // Running mean square of the advantages. Desk-scale reward differences are
  // thousandths of a minute; under the fixed learning rate the raw values
  // would leave the policy at its uniform start forever, so advantages are
  // standardized to unit scale before they weight the log-probabilities.
  double adv_sq_ema = 0.0;
  bool adv_sq_primed = false;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<int> order = all_rows;
    batch_rng.shuffle(order);

    double reward_sum = 0.0;
    long reward_count = 0;

    for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(cfg.batch_size)) {
      std::size_t end = std::min(order.size(), at + static_cast<std::size_t>(cfg.batch_size));
      std::vector<int> batch(order.begin() + static_cast<long>(at),
                             order.begin() + static_cast<long>(end));
      lrm::GaussianEtaModel batch_base = loo_full_model(batch);

      std::vector<policy::EpisodeStep> episode;
      episode.reserve(static_cast<std::size_t>(cfg.action_iterations));
      for (int j = 0; j < cfg.action_iterations; ++j) {
        features::RlState state = features::assemble_state(f, selection);
        if (!cfg.use_mask) state.s_b.setZero();
        policy::ActionMatrix probs = policy::forward(params, state);
        std::vector<int> actions = policy::sample_actions(probs, action_rng);
        policy::ActionBounds bounds = policy::compute_bounds(selection.indices, n_total - 1);
        std::vector<int> moved =
            policy::apply_actions(selection.indices, actions, bounds, landmark_set);
        selection = features::make_selection(grid, moved);

        lrm::GaussianEtaModel stepped =
            lrm::restrict_model(batch_base, union_sorted(selection.indices, landmarks));
        auto errors = lrm::prediction_errors(stepped, train, batch, stops);
        double r = compute_reward(reward, errors);

        policy::EpisodeStep step;
        step.state = std::move(state);
        step.actions = std::move(actions);
        step.reward = r;
        episode.push_back(std::move(step));
        reward_sum += r;
        ++reward_count;
      }

      // Baseline subtraction. The steps of one episode score the same batch
      // under the same leave-out fit, so their mean cancels the batch noise
      // and the gradient weights only the reward differences the moves caused.
      // The loss is linear in the reward, so this leaves its expected gradient
      // direction intact.
      double episode_mean = 0.0;
      for (const auto& s : episode) episode_mean += s.reward;
      episode_mean /= static_cast<double>(episode.size());
      const double baseline = episode.size() > 1        ? episode_mean
                              : reward_ema_primed ? reward_ema
                                                  : episode_mean;
      double adv_sq = 0.0;
      for (auto& s : episode) {
        s.reward -= baseline;
        adv_sq += s.reward * s.reward;
      }
      adv_sq /= static_cast<double>(episode.size());
      reward_ema = reward_ema_primed ? 0.9 * reward_ema + 0.1 * episode_mean : episode_mean;
      reward_ema_primed = true;
      adv_sq_ema = adv_sq_primed ? 0.9 * adv_sq_ema + 0.1 * adv_sq : adv_sq;
      adv_sq_primed = true;
      const double adv_scale = std::sqrt(adv_sq_ema);
      if (adv_scale > 0.0)
        for (auto& s : episode) s.reward /= adv_scale;

      policy::PolicyParams grad = policy::backward(params, episode);
      if (!grad.all_finite())
        throw std::runtime_error("dprl_train: non-finite gradient at epoch " +
                                 std::to_string(epoch));
      Eigen::VectorXd p = params.flatten();
      opt.step(p, grad.flatten(), cfg, epoch);
      params.unflatten(p);
    }

    lrm::GaussianEtaModel current = model_for(selection.indices);
    auto errors = lrm::prediction_errors(current, train, all_rows, stops);
    double mae = 0.0;
    for (const auto& e : errors) mae += e.error_minutes;
    mae /= static_cast<double>(errors.size());

    if (log_level() >= LogLevel::Debug) {
      features::RlState st = features::assemble_state(f, selection);
      if (!cfg.use_mask) st.s_b.setZero();
      policy::ActionMatrix probs = policy::forward(params, st);
      double dev = (probs.probs.col(0).array() - 0.5).abs().maxCoeff();
      log_debug("epoch " + std::to_string(epoch) +
                ": max |p-0.5| = " + detail::format_double(dev));
    }

    EpochLog row;
    row.epoch = epoch;
    row.reward_mean = reward_sum / static_cast<double>(reward_count);
    row.train_mae = mae;
    row.selection_digest = selection_digest(selection.indices);
    result.log.push_back(row);
    log_debug("epoch " + std::to_string(epoch) + ": reward " +
              detail::format_double(row.reward_mean) + ", train mae " +
              detail::format_double(row.train_mae));
  }

  result.params = std::move(params);
  result.selection = std::move(selection);
  result.model = model_for(result.selection.indices);
  return result;
}

void save_convergence_log(const std::vector<EpochLog>& log, const std::string& path,
                          const std::string& config_digest) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path);
  if (!config_digest.empty()) out << "# config_digest=" << config_digest << "\n";
  out << "epoch,reward_mean,train_mae,selected_indices_digest\n";
  for (const auto& row : log)
    out << row.epoch << "," << detail::format_double(row.reward_mean) << ","
        << detail::format_double(row.train_mae) << "," << row.selection_digest << "\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<EpochLog> load_convergence_log(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::vector<EpochLog> log;
  std::string line;
  long line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv = detail::trim(line);
    if (sv.empty() || sv.front() == '#') continue;
    auto cells = detail::split_line(sv);
    if (!header_seen) {
      if (cells.size() != 4 || cells[0] != "epoch")
        throw std::runtime_error("convergence log parse error at line " + std::to_string(line_no));
      header_seen = true;
      continue;
    }
    if (cells.size() != 4)
      throw std::runtime_error("convergence log parse error at line " + std::to_string(line_no));
    EpochLog row;
    row.epoch = static_cast<int>(detail::parse_double(cells[0], "epoch"));
    row.reward_mean = detail::parse_double(cells[1], "reward_mean");
    row.train_mae = detail::parse_double(cells[2], "train_mae");
    row.selection_digest = cells[3];
    log.push_back(std::move(row));
  }
  return log;
}

}  // namespace segsel::training
