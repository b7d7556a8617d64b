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

#include "segsel/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "segsel/detail/io.hpp"
#include "segsel/log.hpp"
#include "segsel/rng.hpp"
#include "segsel/svg.hpp"

namespace segsel::eval {

double mae(const std::vector<double>& predicted_minutes,
           const std::vector<double>& truth_minutes) {
  if (predicted_minutes.empty() || predicted_minutes.size() != truth_minutes.size())
    throw std::invalid_argument("mae: inputs must align and be non-empty");
  double s = 0.0;
  for (std::size_t i = 0; i < predicted_minutes.size(); ++i)
    s += std::abs(predicted_minutes[i] - truth_minutes[i]);
  return s / static_cast<double>(predicted_minutes.size());
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median: empty input");
  std::sort(values.begin(), values.end());
  std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

void SyntheticRouteConfig::validate() const {
  if (n_segments < 2) throw std::invalid_argument("synthetic config: n_segments must be >= 2");
  if (!(spacing_m > 0.0)) throw std::invalid_argument("synthetic config: spacing_m must be positive");
  if (stop_every < 1 || stop_every > n_segments)
    throw std::invalid_argument("synthetic config: stop_every out of range");
  for (int h : hotspot_indices)
    if (h < 1 || h > n_segments)
      throw std::invalid_argument("synthetic config: hotspot index " + std::to_string(h) +
                                  " outside [1, n_segments]");
  if (!(base_speed_mps > 0.0))
    throw std::invalid_argument("synthetic config: base_speed_mps must be positive");
  if (base_noise_std_s < 0.0 || hotspot_delay_std_s < 0.0 || time_of_day_effect_s < 0.0)
    throw std::invalid_argument("synthetic config: noise magnitudes must be >= 0");
  if (trips_train < 2 || trips_test < 2)
    throw std::invalid_argument("synthetic config: trip counts must be >= 2");
}

SyntheticRouteConfig synthetic_config_from_json(const std::string& path) {
  auto j = detail::load_json_file(path);
  SyntheticRouteConfig c;
  try {
    c.n_segments = j.value("n_segments", c.n_segments);
    c.spacing_m = j.value("spacing_m", c.spacing_m);
    c.stop_every = j.value("stop_every", c.stop_every);
    if (j.contains("hotspot_indices"))
      c.hotspot_indices = j.at("hotspot_indices").get<std::vector<int>>();
    c.hotspot_delay_mean_s = j.value("hotspot_delay_mean_s", c.hotspot_delay_mean_s);
    c.hotspot_delay_std_s = j.value("hotspot_delay_std_s", c.hotspot_delay_std_s);
    c.base_speed_mps = j.value("base_speed_mps", c.base_speed_mps);
    c.base_noise_std_s = j.value("base_noise_std_s", c.base_noise_std_s);
    c.time_of_day_effect_s = j.value("time_of_day_effect_s", c.time_of_day_effect_s);
    c.trips_train = j.value("trips_train", c.trips_train);
    c.trips_test = j.value("trips_test", c.trips_test);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("invalid synthetic config " + path + ": " + e.what());
  }
  c.validate();
  return c;
}

SyntheticData generate_synthetic_route(const SyntheticRouteConfig& cfg) {
  cfg.validate();
  const double length = cfg.n_segments * cfg.spacing_m;

  // equator layout: arc length d maps to longitude d / R
  auto coord = [](double d) {
    return ingest::GeoPoint{0.0, d / ingest::kEarthRadiusM * (180.0 / 3.14159265358979323846)};
  };
  std::vector<std::pair<double, ingest::GeoPoint>> stops;
  for (int k = 0; k * cfg.stop_every * cfg.spacing_m <= length + 1e-9; ++k) {
    double d = std::min(k * cfg.stop_every * cfg.spacing_m, length);
    stops.emplace_back(d, coord(d));
  }
  if (stops.back().first < length - 1e-9) stops.emplace_back(length, coord(length));

  SyntheticData data;
  data.grid = ingest::build_segment_grid(length, stops, {}, cfg.spacing_m, "synthetic");
  if (data.grid.size() != cfg.n_segments + 1)
    throw std::logic_error("generate_synthetic_route: unexpected grid size");

  // Each hotspot follows one of five staggered daily demand profiles
  // (frequency in cycles per day, phase offset). The first three act like
  // metered junctions: the meter holds traffic on the hotspot segment during
  // its peak and the segment just past it flows correspondingly freely, so
  // the surge and the relief sum to a constant through the pair. The last
  // two sit in zones whose congestion follows the same daily cycles with
  // offset phases, adding a sustained swing. Profiles are assigned by
  // hotspot rank along the route.
  struct TodTerm {
    int freq;
    double phase;
  };
  static constexpr TodTerm kProfiles[5] = {
      {1, 0.0}, {1, 1.5707963}, {2, 0.0}, {1, 0.886}, {2, 0.5235988}};
  static constexpr double kPi = 3.14159265358979323846;
  std::vector<std::vector<TodTerm>> tod_terms(static_cast<std::size_t>(cfg.n_segments) + 1);
  std::vector<bool> is_hotspot(tod_terms.size(), false);
  {
    std::vector<int> sorted_hot(cfg.hotspot_indices.begin(), cfg.hotspot_indices.end());
    std::sort(sorted_hot.begin(), sorted_hot.end());
    for (int h : sorted_hot) is_hotspot[static_cast<std::size_t>(h)] = true;
    for (std::size_t j = 0; j < sorted_hot.size(); ++j) {
      const std::size_t h = static_cast<std::size_t>(sorted_hot[j]);
      const TodTerm& p = kProfiles[j % 5];
      tod_terms[h].push_back(p);
      // the metered-junction profiles spill their relief onto the next
      // segment; skip it at the route end or when that segment is itself
      // a hotspot
      if (j % 5 <= 2 && h + 1 < tod_terms.size() && !is_hotspot[h + 1])
        tod_terms[h + 1].push_back({p.freq, p.phase + kPi});
    }
  }

  auto fill = [&](interp::ArrivalMatrix& m, std::vector<double>& departs, int count,
                  const char* prefix, const char* stream) {
    Rng rng(cfg.seed, stream);
    m.grid_ref = data.grid.route_id;
    m.times.resize(count, data.grid.size());
    m.trip_ids.clear();
    departs.clear();
    const double two_pi = 2.0 * 3.14159265358979323846;
    for (int v = 0; v < count; ++v) {
      double depart = rng.uniform(6.0 * 3600.0, 22.0 * 3600.0);
      departs.push_back(depart);
      double t = 0.0;
      m.times(v, 0) = 0.0;
      for (int i = 1; i < data.grid.size(); ++i) {
        double step_m = data.grid.segments[static_cast<std::size_t>(i)].cum_distance -
                        data.grid.segments[static_cast<std::size_t>(i) - 1].cum_distance;
        double inc = step_m / cfg.base_speed_mps + rng.normal(0.0, cfg.base_noise_std_s);
        if (is_hotspot[static_cast<std::size_t>(i)])
          inc += std::max(0.0, rng.normal(cfg.hotspot_delay_mean_s, cfg.hotspot_delay_std_s));
        for (const TodTerm& tp : tod_terms[static_cast<std::size_t>(i)])
          inc += cfg.time_of_day_effect_s * 0.5 *
                 (1.0 + std::sin(two_pi * tp.freq * depart / 86400.0 + tp.phase));
        if (inc < 0.0) inc = 0.0;
        t += inc;
        m.times(v, i) = t;
      }
      char id[32];
      std::snprintf(id, sizeof(id), "%s%04d", prefix, v);
      m.trip_ids.emplace_back(id);
    }
  };
  fill(data.train, data.depart_train_s, cfg.trips_train, "train", "generator-train");
  fill(data.test, data.depart_test_s, cfg.trips_test, "test", "generator-test");

  double s = 0.0;
  for (double d : data.depart_train_s) s += d;
  data.mean_depart_s = s / static_cast<double>(data.depart_train_s.size());
  return data;
}

Dataset as_dataset(const SyntheticData& d) {
  Dataset ds;
  ds.grid = &d.grid;
  ds.train = &d.train;
  ds.test = &d.test;
  ds.mean_depart_s = d.mean_depart_s;
  ds.line_count = d.line_count;
  return ds;
}

static void check_dataset(const Dataset& data) {
  if (data.grid == nullptr || data.train == nullptr || data.test == nullptr)
    throw std::invalid_argument("eval: incomplete dataset");
  if (data.train->segments() != data.grid->size() || data.test->segments() != data.grid->size())
    throw std::invalid_argument("eval: arrival matrices do not match the grid");
}

double evaluate_model_mae(const lrm::GaussianEtaModel& model, const Dataset& data) {
  check_dataset(data);
  std::vector<int> rows(static_cast<std::size_t>(data.test->trips()));
  for (int r = 0; r < data.test->trips(); ++r) rows[static_cast<std::size_t>(r)] = r;
  auto errors = lrm::prediction_errors(model, *data.test, rows, data.grid->stop_indices());
  if (errors.empty()) throw std::runtime_error("evaluate_model_mae: no evaluation triples");
  double s = 0.0;
  for (const auto& e : errors) s += e.error_minutes;
  return s / static_cast<double>(errors.size());
}

training::BenchmarkTable make_benchmark_from_all(const Dataset& data) {
  check_dataset(data);
  std::vector<int> all_indices(static_cast<std::size_t>(data.grid->size()));
  for (int i = 0; i < data.grid->size(); ++i) all_indices[static_cast<std::size_t>(i)] = i;
  lrm::GaussianEtaModel full = lrm::estimate_moments(*data.train, all_indices);
  std::vector<int> rows(static_cast<std::size_t>(data.train->trips()));
  for (int r = 0; r < data.train->trips(); ++r) rows[static_cast<std::size_t>(r)] = r;
  auto errors = lrm::prediction_errors(full, *data.train, rows, data.grid->stop_indices());
  training::BenchmarkTable t;
  for (const auto& e : errors)
    t.entries[{e.trip_id, e.origin_grid, e.target_grid - e.origin_grid}] = e.error_minutes;
  return t;
}

namespace {

training::RouteContext route_context(const Dataset& data) {
  training::RouteContext ctx;
  ctx.grid = data.grid;
  ctx.mean_depart_s = data.mean_depart_s;
  ctx.line_count = data.line_count;
  return ctx;
}

EvalReport finish_report(std::string label, const std::vector<std::uint64_t>& seeds,
                         std::vector<double> maes) {
  EvalReport r;
  r.label = std::move(label);
  r.seeds = seeds;
  r.median_mae = median(maes);
  r.per_seed_mae = std::move(maes);
  return r;
}

// one RL training per seed, scored on the test split
EvalReport rl_report(const std::string& label, const Dataset& data,
                     const training::TrainConfig& cfg, const training::RewardConfig& reward,
                     const std::vector<std::uint64_t>& seeds) {
  std::vector<double> maes;
  maes.reserve(seeds.size());
  for (std::uint64_t seed : seeds) {
    training::TrainConfig c = cfg;
    c.seed = seed;
    training::TrainResult res = training::dprl_train(*data.train, route_context(data), c, reward);
    maes.push_back(evaluate_model_mae(res.model, data));
    log_info(label + " seed " + std::to_string(seed) +
             ": test mae " + detail::format_double(maes.back()));
  }
  return finish_report(label, seeds, std::move(maes));
}

}  // namespace

std::vector<EvalReport> run_selection_ablation(const Dataset& data,
                                               const training::TrainConfig& base,
                                               const training::RewardConfig& reward,
                                               const std::vector<std::uint64_t>& seeds) {
  check_dataset(data);
  if (seeds.empty()) throw std::invalid_argument("run_selection_ablation: no seeds");

  std::vector<int> all_indices(static_cast<std::size_t>(data.grid->size()));
  for (int i = 0; i < data.grid->size(); ++i) all_indices[static_cast<std::size_t>(i)] = i;
  lrm::GaussianEtaModel full = lrm::estimate_moments(*data.train, all_indices);

  // all segments: selection-independent, identical across seeds
  double all_mae = evaluate_model_mae(full, data);
  std::vector<EvalReport> out;
  out.push_back(finish_report("all", seeds, std::vector<double>(seeds.size(), all_mae)));

  // random subset, same selection stream the trainer starts from
  auto landmarks = data.grid->landmark_indices();
  std::vector<double> rs_maes;
  for (std::uint64_t seed : seeds) {
    auto picked = training::initial_selection(*data.grid, base.selection_fraction, seed);
    std::vector<int> keep;
    keep.reserve(picked.size() + landmarks.size());
    std::set_union(picked.begin(), picked.end(), landmarks.begin(), landmarks.end(),
                   std::back_inserter(keep));
    rs_maes.push_back(evaluate_model_mae(lrm::restrict_model(full, keep), data));
  }
  out.push_back(finish_report("random", seeds, std::move(rs_maes)));

  out.push_back(rl_report("rl", data, base, reward, seeds));
  return out;
}

std::vector<EvalReport> sweep_proportion(const Dataset& data, const training::TrainConfig& base,
                                         const training::RewardConfig& reward,
                                         const std::vector<std::uint64_t>& seeds,
                                         const std::vector<double>& fractions) {
  check_dataset(data);
  std::vector<EvalReport> out;
  for (double f : fractions) {
    training::TrainConfig cfg = base;
    cfg.selection_fraction = f;
    char label[32];
    std::snprintf(label, sizeof(label), "fraction=%.4g", f);
    out.push_back(rl_report(label, data, cfg, reward, seeds));
  }
  return out;
}

std::vector<EvalReport> sweep_action_iterations(const Dataset& data,
                                                const training::TrainConfig& base,
                                                const training::RewardConfig& reward,
                                                const std::vector<std::uint64_t>& seeds,
                                                const std::vector<int>& iterations) {
  check_dataset(data);
  std::vector<EvalReport> out;
  for (int b : iterations) {
    training::TrainConfig cfg = base;
    cfg.action_iterations = b;
    out.push_back(rl_report("B=" + std::to_string(b), data, cfg, reward, seeds));
  }
  return out;
}

std::vector<EvalReport> sweep_reward_strategy(const Dataset& data,
                                              const training::TrainConfig& base,
                                              const training::RewardConfig& reward,
                                              const std::vector<std::uint64_t>& seeds) {
  check_dataset(data);
  std::vector<EvalReport> out;
  for (auto strategy :
       {training::RewardStrategy::Bcr, training::RewardStrategy::Ier, training::RewardStrategy::Atr}) {
    training::RewardConfig rc = reward;
    rc.strategy = strategy;
    if (strategy == training::RewardStrategy::Bcr && !rc.has_benchmark) {
      rc.benchmark = make_benchmark_from_all(data);
      rc.has_benchmark = true;
    }
    out.push_back(rl_report(to_string(strategy), data, base, rc, seeds));
  }
  return out;
}

std::vector<EvalReport> sweep_mask(const Dataset& data, const training::TrainConfig& base,
                                   const training::RewardConfig& reward,
                                   const std::vector<std::uint64_t>& seeds) {
  check_dataset(data);
  std::vector<EvalReport> out;
  for (bool use_mask : {true, false}) {
    training::TrainConfig cfg = base;
    cfg.use_mask = use_mask;
    out.push_back(rl_report(use_mask ? "mask" : "no-mask", data, cfg, reward, seeds));
  }
  return out;
}

void save_reports(const std::vector<EvalReport>& reports, const std::string& path,
                  const std::string& config_digest) {
  nlohmann::json j;
  j["version"] = 1;
  j["config_digest"] = config_digest;
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : reports) {
    nlohmann::json e;
    e["label"] = r.label;
    e["seeds"] = r.seeds;
    e["per_seed_mae_minutes"] = r.per_seed_mae;
    e["median_mae_minutes"] = r.median_mae;
    arr.push_back(e);
  }
  j["reports"] = arr;
  detail::save_json_file(j, path);
}

void write_sweep_plot(const std::vector<EvalReport>& reports, const std::string& path,
                      const std::string& title) {
  if (reports.empty()) throw std::invalid_argument("write_sweep_plot: no reports");
  std::vector<std::string> ticks;
  svg::Series med{"median test MAE", {}};
  for (const auto& r : reports) {
    ticks.push_back(r.label);
    med.y.push_back(r.median_mae);
  }
  svg::write_line_chart(path, title, "variant", "MAE (minutes)", ticks, {med});
}

}  // namespace segsel::eval
