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

#include "segsel/policy.hpp"

#include <cmath>
#include <stdexcept>

#include "segsel/detail/io.hpp"

namespace segsel::policy {

static void check_config(const PolicyConfig& cfg) {
  if (cfg.n_total < 2 || cfg.n_interp < 1 || cfg.m < 1 || cfg.m > cfg.n_interp)
    throw std::invalid_argument("policy: bad config (n_total/n_interp/m)");
  if (cfg.conv_out < 1 || cfg.conv_width != 3 || cfg.fc_width < 1)
    throw std::invalid_argument("policy: bad config (layer sizes)");
}

PolicyParams PolicyParams::zeros(const PolicyConfig& cfg) {
  check_config(cfg);
  PolicyParams p;
  p.cfg = cfg;
  p.conv_w = Eigen::MatrixXd::Zero(cfg.conv_out, features::kFeatureDim * cfg.conv_width);
  p.conv_b = Eigen::VectorXd::Zero(cfg.conv_out);
  p.fc1_w = Eigen::MatrixXd::Zero(cfg.fc_width, cfg.conv_out);
  p.fc1_b = Eigen::VectorXd::Zero(cfg.fc_width);
  p.fc2_w = Eigen::MatrixXd::Zero(cfg.fc_width, cfg.n_interp);
  p.fc2_b = Eigen::VectorXd::Zero(cfg.fc_width);
  p.fc3_w = Eigen::MatrixXd::Zero(2 * cfg.m, 2 * cfg.fc_width);
  p.fc3_b = Eigen::VectorXd::Zero(2 * cfg.m);
  return p;
}

PolicyParams PolicyParams::init(const PolicyConfig& cfg, Rng& rng) {
  PolicyParams p = zeros(cfg);
  auto fill = [&rng](Eigen::MatrixXd& w) {
    double scale = 1.0 / std::sqrt(static_cast<double>(w.cols()));
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = scale * rng.normal();
  };
  fill(p.conv_w);
  fill(p.fc1_w);
  fill(p.fc2_w);
  // head stays zero: uniform initial policy
  return p;
}

int PolicyParams::param_count() const {
  auto sz = [](const auto& m) { return static_cast<int>(m.size()); };
  return sz(conv_w) + sz(conv_b) + sz(fc1_w) + sz(fc1_b) + sz(fc2_w) + sz(fc2_b) + sz(fc3_w) +
         sz(fc3_b);
}

Eigen::VectorXd PolicyParams::flatten() const {
  Eigen::VectorXd v(param_count());
  Eigen::Index at = 0;
  auto put = [&](const auto& m) {
    v.segment(at, m.size()) = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
    at += m.size();
  };
  put(conv_w);
  put(conv_b);
  put(fc1_w);
  put(fc1_b);
  put(fc2_w);
  put(fc2_b);
  put(fc3_w);
  put(fc3_b);
  return v;
}

void PolicyParams::unflatten(const Eigen::VectorXd& v) {
  if (v.size() != param_count())
    throw std::invalid_argument("PolicyParams::unflatten: length mismatch");
  Eigen::Index at = 0;
  auto take = [&](auto& m) {
    Eigen::Map<Eigen::VectorXd>(m.data(), m.size()) = v.segment(at, m.size());
    at += m.size();
  };
  take(conv_w);
  take(conv_b);
  take(fc1_w);
  take(fc1_b);
  take(fc2_w);
  take(fc2_b);
  take(fc3_w);
  take(fc3_b);
}

bool PolicyParams::all_finite() const {
  return flatten().allFinite();
}

namespace {

// The conv layer is linear and immediately mean-pooled, so only the per-tap
// column sums of the input matter. S(k, c) = sum over positions t of
// X(t+k-1, c) with zero padding.
Eigen::MatrixXd tap_sums(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd s(3, x.cols());
  Eigen::RowVectorXd full = x.colwise().sum();
  s.row(1) = full;
  s.row(0) = full - x.row(x.rows() - 1);  // tap k=0 never sees the last row
  s.row(2) = full - x.row(0);             // tap k=2 never sees the first row
  return s;
}

struct ForwardCache {
  Eigen::MatrixXd taps;    // 3 x 8
  double t_rows = 0.0;
  Eigen::VectorXd pooled;  // conv_out
  Eigen::VectorXd z;       // 2*fc_width
  Eigen::MatrixXd probs;   // m x 2
};

ForwardCache run_forward(const PolicyParams& p, const features::RlState& state) {
  check_config(p.cfg);
  const auto& cfg = p.cfg;
  if (state.s_a.cols() != features::kFeatureDim ||
      state.s_a.rows() != cfg.n_total + cfg.m || state.s_b.size() != cfg.n_interp)
    throw std::runtime_error("policy forward: state shape mismatch");
  if (!state.s_a.allFinite() || !state.s_b.allFinite())
    throw std::runtime_error("policy forward: non-finite state");

  ForwardCache c;
  c.taps = tap_sums(state.s_a);
  c.t_rows = static_cast<double>(state.s_a.rows());

  c.pooled = p.conv_b;
  for (int o = 0; o < cfg.conv_out; ++o) {
    double acc = 0.0;
    for (int ch = 0; ch < features::kFeatureDim; ++ch)
      for (int k = 0; k < cfg.conv_width; ++k)
        acc += p.conv_w(o, ch * cfg.conv_width + k) * c.taps(k, ch);
    c.pooled(o) += acc / c.t_rows;
  }

  c.z.resize(2 * cfg.fc_width);
  c.z.head(cfg.fc_width) = p.fc1_w * c.pooled + p.fc1_b;
  c.z.tail(cfg.fc_width) = p.fc2_w * state.s_b + p.fc2_b;

  Eigen::VectorXd logits = p.fc3_w * c.z + p.fc3_b;
  c.probs.resize(cfg.m, 2);
  for (int i = 0; i < cfg.m; ++i) {
    double l0 = logits(2 * i), l1 = logits(2 * i + 1);
    double hi = std::max(l0, l1);
    double e0 = std::exp(l0 - hi), e1 = std::exp(l1 - hi);
    c.probs(i, 0) = e0 / (e0 + e1);
    c.probs(i, 1) = e1 / (e0 + e1);
  }
  return c;
}

}  // namespace

ActionMatrix forward(const PolicyParams& params, const features::RlState& state) {
  return ActionMatrix{run_forward(params, state).probs};
}

ActionBounds compute_bounds(const std::vector<int>& indices, int last_grid_index) {
  if (indices.empty()) throw std::invalid_argument("compute_bounds: empty selection");
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] > last_grid_index)
      throw std::invalid_argument("compute_bounds: index out of range");
    if (i > 0 && indices[i] <= indices[i - 1])
      throw std::invalid_argument("compute_bounds: indices must be strictly increasing");
  }
  const std::size_t m = indices.size();
  ActionBounds b;
  b.lower.resize(m);
  b.upper.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    // integer ceil of the midpoints
    b.lower[i] = i == 0 ? 0 : (indices[i - 1] + indices[i] + 1) / 2;
    b.upper[i] = i + 1 < m ? (indices[i] + indices[i + 1] + 1) / 2 : last_grid_index;
  }
  return b;
}

std::vector<int> apply_actions(const std::vector<int>& indices, const std::vector<int>& actions,
                               const ActionBounds& bounds,
                               const std::unordered_set<int>& landmark_indices) {
  const std::size_t m = indices.size();
  if (actions.size() != m || bounds.lower.size() != m || bounds.upper.size() != m)
    throw std::invalid_argument("apply_actions: size mismatch");
  std::vector<int> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (actions[i] != 0 && actions[i] != 1)
      throw std::invalid_argument("apply_actions: actions must be 0 (left) or 1 (right)");
    int step;
    if (actions[i] == 0)
      step = -std::min(1, indices[i] - bounds.lower[i]);
    else
      step = std::min(1, bounds.upper[i] - indices[i] - 1);
    int dest = indices[i] + step;
    if (step != 0 && landmark_indices.count(dest) > 0) dest = indices[i];  // null move
    out[i] = dest;
  }
  for (std::size_t i = 1; i < m; ++i)
    if (out[i] <= out[i - 1])
      throw std::logic_error("apply_actions: ordering violated");  // unreachable by construction
  return out;
}

std::vector<int> sample_actions(const ActionMatrix& probs, Rng& rng) {
  const auto& p = probs.probs;
  if (p.cols() != 2 || p.rows() < 1)
    throw std::invalid_argument("sample_actions: bad action matrix shape");
  std::vector<int> actions(static_cast<std::size_t>(p.rows()));
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    if (!(p(i, 0) >= 0.0) || !(p(i, 1) >= 0.0) || std::abs(p(i, 0) + p(i, 1) - 1.0) > 1e-6)
      throw std::invalid_argument("sample_actions: row " + std::to_string(i) +
                                  " is not a distribution");
    actions[static_cast<std::size_t>(i)] = rng.uniform01() < p(i, 0) ? 0 : 1;
  }
  return actions;
}

static void check_episode(const PolicyParams& params, const std::vector<EpisodeStep>& episode) {
  if (episode.empty()) throw std::invalid_argument("policy: empty episode");
  for (const auto& step : episode) {
    if (static_cast<int>(step.actions.size()) != params.cfg.m)
      throw std::invalid_argument("policy: episode step has wrong action count");
    for (int a : step.actions)
      if (a != 0 && a != 1) throw std::invalid_argument("policy: episode action out of range");
    if (!std::isfinite(step.reward)) throw std::invalid_argument("policy: non-finite reward");
  }
}

double episode_loss(const PolicyParams& params, const std::vector<EpisodeStep>& episode) {
  check_episode(params, episode);
  const double scale = 1.0 / (static_cast<double>(episode.size()) * params.cfg.m);
  double loss = 0.0;
  for (const auto& step : episode) {
    ForwardCache c = run_forward(params, step.state);
    for (int i = 0; i < params.cfg.m; ++i)
      loss -= scale * step.reward * std::log(c.probs(i, step.actions[static_cast<std::size_t>(i)]));
  }
  return loss;
}

PolicyParams backward(const PolicyParams& params, const std::vector<EpisodeStep>& episode) {
  check_episode(params, episode);
  const auto& cfg = params.cfg;
  PolicyParams g = PolicyParams::zeros(cfg);
  const double scale = 1.0 / (static_cast<double>(episode.size()) * cfg.m);

  for (const auto& step : episode) {
    ForwardCache c = run_forward(params, step.state);

    // d loss / d logits for the row softmax: coeff * (p - onehot(a))
    Eigen::VectorXd dlogits(2 * cfg.m);
    for (int i = 0; i < cfg.m; ++i) {
      const int a = step.actions[static_cast<std::size_t>(i)];
      const double coeff = scale * step.reward;
      dlogits(2 * i) = coeff * (c.probs(i, 0) - (a == 0 ? 1.0 : 0.0));
      dlogits(2 * i + 1) = coeff * (c.probs(i, 1) - (a == 1 ? 1.0 : 0.0));
    }

    g.fc3_w.noalias() += dlogits * c.z.transpose();
    g.fc3_b += dlogits;
    Eigen::VectorXd dz = params.fc3_w.transpose() * dlogits;

    Eigen::VectorXd dh1 = dz.head(cfg.fc_width);
    Eigen::VectorXd dh2 = dz.tail(cfg.fc_width);

    g.fc1_w.noalias() += dh1 * c.pooled.transpose();
    g.fc1_b += dh1;
    g.fc2_w.noalias() += dh2 * step.state.s_b.transpose();
    g.fc2_b += dh2;

    Eigen::VectorXd dpooled = params.fc1_w.transpose() * dh1;
    g.conv_b += dpooled;
    for (int o = 0; o < cfg.conv_out; ++o)
      for (int ch = 0; ch < features::kFeatureDim; ++ch)
        for (int k = 0; k < cfg.conv_width; ++k)
          g.conv_w(o, ch * cfg.conv_width + k) += dpooled(o) * c.taps(k, ch) / c.t_rows;
  }
  return g;
}

void save_policy(const PolicyCheckpoint& ckpt, const std::string& path,
                 const std::string& config_digest) {
  const auto& cfg = ckpt.params.cfg;
  nlohmann::json j;
  j["version"] = 1;
  j["config_digest"] = config_digest;
  j["route_id"] = ckpt.route_id;
  j["seed"] = ckpt.seed;
  j["shape"] = {{"n_total", cfg.n_total}, {"n_interp", cfg.n_interp},     {"m", cfg.m},
                {"conv_out", cfg.conv_out}, {"conv_width", cfg.conv_width}, {"fc_width", cfg.fc_width}};
  Eigen::VectorXd w = ckpt.params.flatten();
  j["weights"] = std::vector<double>(w.data(), w.data() + w.size());
  j["normalization"] = {
      {"mean", std::vector<double>(ckpt.scaler.mean.data(), ckpt.scaler.mean.data() + 8)},
      {"std", std::vector<double>(ckpt.scaler.std.data(), ckpt.scaler.std.data() + 8)}};
  detail::save_json_file(j, path);
}

PolicyCheckpoint load_policy(const std::string& path) {
  auto j = detail::load_json_file(path);
  PolicyCheckpoint ckpt;
  try {
    const auto& s = j.at("shape");
    PolicyConfig cfg;
    cfg.n_total = s.at("n_total").get<int>();
    cfg.n_interp = s.at("n_interp").get<int>();
    cfg.m = s.at("m").get<int>();
    cfg.conv_out = s.at("conv_out").get<int>();
    cfg.conv_width = s.at("conv_width").get<int>();
    cfg.fc_width = s.at("fc_width").get<int>();
    ckpt.params = PolicyParams::zeros(cfg);
    auto w = j.at("weights").get<std::vector<double>>();
    if (static_cast<int>(w.size()) != ckpt.params.param_count())
      throw std::runtime_error("weight count mismatch");
    ckpt.params.unflatten(Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size())));
    auto mean = j.at("normalization").at("mean").get<std::vector<double>>();
    auto stdv = j.at("normalization").at("std").get<std::vector<double>>();
    if (mean.size() != 8 || stdv.size() != 8) throw std::runtime_error("bad normalization block");
    for (int i = 0; i < 8; ++i) {
      ckpt.scaler.mean(i) = mean[static_cast<std::size_t>(i)];
      ckpt.scaler.std(i) = stdv[static_cast<std::size_t>(i)];
    }
    ckpt.route_id = j.at("route_id").get<std::string>();
    ckpt.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("invalid policy checkpoint " + path + ": " + e.what());
  }
  return ckpt;
}

}  // namespace segsel::policy
