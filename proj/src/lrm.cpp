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

#include "segsel/lrm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "segsel/detail/io.hpp"

namespace segsel::lrm {

int GaussianEtaModel::position_of(int grid_index) const {
  auto it = std::lower_bound(indices.begin(), indices.end(), grid_index);
  if (it == indices.end() || *it != grid_index) return -1;
  return static_cast<int>(it - indices.begin());
}

// lambda = 1e-6 * mean diagonal, escalated tenfold up to three times until
// the Cholesky succeeds
double probe_jitter(const Eigen::MatrixXd& sigma) {
  int m = static_cast<int>(sigma.rows());
  double lambda = 1e-6 * sigma.trace() / static_cast<double>(m);
  if (!(lambda > 0.0)) lambda = 1e-12;
  for (int attempt = 0; attempt <= 3; ++attempt) {
    Eigen::MatrixXd k = sigma;
    k.diagonal().array() += lambda;
    Eigen::LLT<Eigen::MatrixXd> llt(k);
    if (llt.info() == Eigen::Success) return lambda;
    lambda *= 10.0;
  }
  throw std::runtime_error("probe_jitter: covariance not positive definite even with jitter");
}

GaussianEtaModel estimate_moments(const interp::ArrivalMatrix& arrivals,
                                  const std::vector<int>& indices) {
  const int v = arrivals.trips();
  if (v < 2) throw std::invalid_argument("estimate_moments: need at least 2 trips, got " +
                                         std::to_string(v));
  if (indices.empty()) throw std::invalid_argument("estimate_moments: empty index set");
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= arrivals.segments())
      throw std::invalid_argument("estimate_moments: index " + std::to_string(indices[i]) +
                                  " out of range");
    if (i > 0 && indices[i] <= indices[i - 1])
      throw std::invalid_argument("estimate_moments: indices must be strictly increasing");
  }
  for (int r = 0; r < v; ++r)
    for (int idx : indices)
      if (!std::isfinite(arrivals.times(r, idx)))
        throw std::runtime_error("estimate_moments: non-finite arrival time for trip " +
                                 arrivals.trip_ids[static_cast<std::size_t>(r)] + " at segment " +
                                 std::to_string(idx));

  const int m = static_cast<int>(indices.size());
  GaussianEtaModel model;
  model.indices = indices;
  model.mu.resize(m);
  model.sigma.resize(m, m);

  // plain ascending-trip accumulation, population (1/V) normalization
  for (int i = 0; i < m; ++i) {
    double s = 0.0;
    for (int r = 0; r < v; ++r) s += arrivals.times(r, indices[static_cast<std::size_t>(i)]);
    model.mu(i) = s / static_cast<double>(v);
  }
  for (int i = 0; i < m; ++i)
    for (int j = i; j < m; ++j) {
      double s = 0.0;
      for (int r = 0; r < v; ++r)
        s += (arrivals.times(r, indices[static_cast<std::size_t>(i)]) - model.mu(i)) *
             (arrivals.times(r, indices[static_cast<std::size_t>(j)]) - model.mu(j));
      double c = s / static_cast<double>(v);
      model.sigma(i, j) = c;
      model.sigma(j, i) = c;
    }

  model.jitter = probe_jitter(model.sigma);
  return model;
}

PrefixSolver::PrefixSolver(const GaussianEtaModel& model, int prefix_len)
    : model_(&model), k_(prefix_len) {
  if (prefix_len < 1 || prefix_len >= model.dim())
    throw std::invalid_argument("PrefixSolver: prefix length must be in [1, dim)");
  double lambda = model.jitter > 0.0 ? model.jitter : 1e-12;
  for (int attempt = 0; attempt <= 3; ++attempt) {
    Eigen::MatrixXd k = model.sigma.topLeftCorner(k_, k_);
    k.diagonal().array() += lambda;
    llt_.compute(k);
    if (llt_.info() == Eigen::Success) return;
    lambda *= 10.0;
  }
  throw std::runtime_error("PrefixSolver: singular model, Cholesky failed with jitter");
}

Eigen::VectorXd PrefixSolver::weights(const Eigen::VectorXd& observed) const {
  if (observed.size() != k_)
    throw std::invalid_argument("PrefixSolver: observed vector has wrong length");
  for (int i = 0; i < k_; ++i)
    if (!std::isfinite(observed(i)))
      throw std::invalid_argument("PrefixSolver: non-finite observation");
  return llt_.solve(observed - model_->mu.head(k_));
}

double PrefixSolver::predict(const Eigen::VectorXd& weights, int target_pos) const {
  if (target_pos < k_ || target_pos >= model_->dim())
    throw std::invalid_argument("PrefixSolver: target must come after the observed prefix");
  return model_->mu(target_pos) + model_->sigma.row(target_pos).head(k_).dot(weights);
}

double predict_eta(const GaussianEtaModel& model, const Eigen::VectorXd& observed,
                   int target_grid_index) {
  int t = model.position_of(target_grid_index);
  if (t < 0)
    throw std::invalid_argument("predict_eta: target grid index " +
                                std::to_string(target_grid_index) + " not in model");
  PrefixSolver solver(model, static_cast<int>(observed.size()));
  return solver.predict(solver.weights(observed), t);
}

GaussianEtaModel restrict_model(const GaussianEtaModel& model, const std::vector<int>& keep) {
  if (keep.empty()) throw std::invalid_argument("restrict_model: empty keep set");
  std::vector<int> pos;
  pos.reserve(keep.size());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (i > 0 && keep[i] <= keep[i - 1])
      throw std::invalid_argument("restrict_model: keep must be strictly increasing");
    int p = model.position_of(keep[i]);
    if (p < 0)
      throw std::invalid_argument("restrict_model: grid index " + std::to_string(keep[i]) +
                                  " not in model");
    pos.push_back(p);
  }
  GaussianEtaModel out;
  out.indices = keep;
  out.jitter = model.jitter;
  const int m = static_cast<int>(pos.size());
  out.mu.resize(m);
  out.sigma.resize(m, m);
  for (int i = 0; i < m; ++i) {
    out.mu(i) = model.mu(pos[static_cast<std::size_t>(i)]);
    for (int j = 0; j < m; ++j)
      out.sigma(i, j) = model.sigma(pos[static_cast<std::size_t>(i)], pos[static_cast<std::size_t>(j)]);
  }
  return out;
}

void save_model(const GaussianEtaModel& model, const std::string& path,
                const std::string& config_digest) {
  nlohmann::json j;
  j["version"] = 1;
  j["config_digest"] = config_digest;
  j["indices"] = model.indices;
  j["mu"] = std::vector<double>(model.mu.data(), model.mu.data() + model.mu.size());
  std::vector<double> sig;
  sig.reserve(static_cast<std::size_t>(model.dim()) * static_cast<std::size_t>(model.dim()));
  for (int i = 0; i < model.dim(); ++i)
    for (int jcol = 0; jcol < model.dim(); ++jcol) sig.push_back(model.sigma(i, jcol));
  j["sigma"] = sig;  // row-major
  j["jitter"] = model.jitter;
  detail::save_json_file(j, path);
}

GaussianEtaModel load_model(const std::string& path) {
  auto j = detail::load_json_file(path);
  GaussianEtaModel model;
  try {
    model.indices = j.at("indices").get<std::vector<int>>();
    auto mu = j.at("mu").get<std::vector<double>>();
    auto sig = j.at("sigma").get<std::vector<double>>();
    model.jitter = j.at("jitter").get<double>();
    const std::size_t m = model.indices.size();
    if (mu.size() != m || sig.size() != m * m)
      throw std::runtime_error("inconsistent dimensions");
    model.mu.resize(static_cast<Eigen::Index>(m));
    model.sigma.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    for (std::size_t i = 0; i < m; ++i) {
      model.mu(static_cast<Eigen::Index>(i)) = mu[i];
      for (std::size_t c = 0; c < m; ++c)
        model.sigma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = sig[i * m + c];
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("invalid model checkpoint " + path + ": " + e.what());
  }
  return model;
}

std::vector<TripleError> prediction_errors(const GaussianEtaModel& model,
                                           const interp::ArrivalMatrix& arrivals,
                                           const std::vector<int>& trip_rows,
                                           const std::vector<int>& stop_grid_indices) {
  std::vector<int> stop_pos;
  stop_pos.reserve(stop_grid_indices.size());
  for (int s : stop_grid_indices) {
    int p = model.position_of(s);
    if (p < 0)
      throw std::invalid_argument("prediction_errors: stop grid index " + std::to_string(s) +
                                  " not in model");
    stop_pos.push_back(p);
  }
  for (int r : trip_rows)
    if (r < 0 || r >= arrivals.trips())
      throw std::invalid_argument("prediction_errors: trip row out of range");

  std::vector<TripleError> out;
  // Origins start at the second stop: at the first stop no segment has been
  // traversed yet, so the conditional collapses to the prior for every model.
  for (std::size_t oi = 1; oi < stop_pos.size(); ++oi) {
    if (oi + 1 == stop_pos.size()) break;  // terminal stop has nothing ahead
    const int opos = stop_pos[oi];
    const int k = opos + 1;  // observed prefix: positions 0..opos
    PrefixSolver solver(model, k);
    Eigen::VectorXd observed(k);
    for (int r : trip_rows) {
      for (int p = 0; p < k; ++p)
        observed(p) = arrivals.times(r, model.indices[static_cast<std::size_t>(p)]);
      Eigen::VectorXd w = solver.weights(observed);
      for (std::size_t ti = oi + 1; ti < stop_pos.size(); ++ti) {
        const int tpos = stop_pos[ti];
        double pred = solver.predict(w, tpos);
        double truth = arrivals.times(r, model.indices[static_cast<std::size_t>(tpos)]);
        TripleError e;
        e.trip_id = arrivals.trip_ids[static_cast<std::size_t>(r)];
        e.origin_grid = stop_grid_indices[oi];
        e.target_grid = stop_grid_indices[ti];
        e.error_minutes = std::abs(pred - truth) / 60.0;
        out.push_back(std::move(e));
      }
    }
  }
  return out;
}

}  // namespace segsel::lrm
