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

#include "segsel/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>

#include <CLI11.hpp>

#include "segsel/detail/io.hpp"
#include "segsel/eval.hpp"
#include "segsel/log.hpp"
#include "segsel/svg.hpp"

namespace segsel::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// digest of the effective run parameters; output paths deliberately excluded
// so reruns into different directories stay byte-identical
std::string config_digest(const json& effective) {
  std::uint64_t h = fnv1a64(effective.dump());
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory " + dir + ": " + ec.message());
}

json load_config_or_empty(const std::string& path) {
  if (path.empty()) return json::object();
  return detail::load_json_file(path);
}

training::TrainConfig train_config_from_json(const json& j) {
  training::TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr = j.value("lr", c.lr);
  c.momentum = j.value("momentum", c.momentum);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.action_iterations = j.value("action_iterations", c.action_iterations);
  c.selection_fraction = j.value("selection_fraction", c.selection_fraction);
  c.use_mask = j.value("use_mask", c.use_mask);
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

training::RewardConfig reward_config_from_json(const json& j) {
  training::RewardConfig rc;
  if (!j.contains("reward")) return rc;
  const auto& r = j.at("reward");
  rc.strategy = training::reward_strategy_from_string(r.value("strategy", "atr"));
  rc.epsilon_minutes = r.value("epsilon_minutes", rc.epsilon_minutes);
  if (r.contains("benchmark") && !r.at("benchmark").is_null()) {
    rc.benchmark = training::BenchmarkTable::load(r.at("benchmark").get<std::string>());
    rc.has_benchmark = true;
  }
  return rc;
}

json train_config_to_json(const training::TrainConfig& c, const training::RewardConfig& rc) {
  json j;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["lr"] = c.lr;
  j["momentum"] = c.momentum;
  j["weight_decay"] = c.weight_decay;
  j["action_iterations"] = c.action_iterations;
  j["selection_fraction"] = c.selection_fraction;
  j["use_mask"] = c.use_mask;
  j["seed"] = c.seed;
  j["reward"] = {{"strategy", training::to_string(rc.strategy)},
                 {"epsilon_minutes", rc.epsilon_minutes},
                 {"has_benchmark", rc.has_benchmark}};
  return j;
}

json synth_config_to_json(const eval::SyntheticRouteConfig& c) {
  json j;
  j["n_segments"] = c.n_segments;
  j["spacing_m"] = c.spacing_m;
  j["stop_every"] = c.stop_every;
  j["hotspot_indices"] = c.hotspot_indices;
  j["hotspot_delay_mean_s"] = c.hotspot_delay_mean_s;
  j["hotspot_delay_std_s"] = c.hotspot_delay_std_s;
  j["base_speed_mps"] = c.base_speed_mps;
  j["base_noise_std_s"] = c.base_noise_std_s;
  j["time_of_day_effect_s"] = c.time_of_day_effect_s;
  j["trips_train"] = c.trips_train;
  j["trips_test"] = c.trips_test;
  j["seed"] = c.seed;
  return j;
}

void save_departures(const std::vector<std::string>& trip_ids, const std::vector<double>& departs,
                     const std::string& path, const std::string& digest) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path);
  out << "# config_digest=" << digest << "\n";
  out << "trip_id,depart_s\n";
  for (std::size_t i = 0; i < trip_ids.size(); ++i)
    out << trip_ids[i] << "," << detail::format_double(departs[i]) << "\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::optional<double> mean_departure(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::string line;
  bool header_seen = false;
  double sum = 0.0;
  long n = 0;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv = detail::trim(line);
    if (sv.empty() || sv.front() == '#') continue;
    auto cells = detail::split_line(sv);
    if (!header_seen) {
      if (cells.size() != 2 || cells[0] != "trip_id")
        throw std::runtime_error("departures parse error at line " + std::to_string(line_no) +
                                 " of " + path);
      header_seen = true;
      continue;
    }
    if (cells.size() != 2)
      throw std::runtime_error("departures parse error at line " + std::to_string(line_no) +
                               " of " + path);
    sum += detail::parse_double(cells[1], "depart_s");
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

struct LoadedData {
  ingest::RouteDescription route;
  ingest::SegmentGrid grid;
  interp::ArrivalMatrix train;
  interp::ArrivalMatrix test;
  bool has_test = false;
  double mean_depart_s = 12.0 * 3600.0;
};

LoadedData load_dataset(const std::string& dir, bool need_test) {
  LoadedData d;
  std::string route_path = (fs::path(dir) / "route.json").string();
  std::string train_path = (fs::path(dir) / "train.csv").string();
  std::string test_path = (fs::path(dir) / "test.csv").string();
  d.route = ingest::load_route_file(route_path);
  d.grid = ingest::build_grid(d.route);
  d.train = interp::load_arrival_matrix(train_path);
  if (d.train.segments() != d.grid.size())
    throw std::runtime_error("train matrix in " + dir + " does not match the route grid");
  if (fs::exists(test_path)) {
    d.test = interp::load_arrival_matrix(test_path);
    if (d.test.segments() != d.grid.size())
      throw std::runtime_error("test matrix in " + dir + " does not match the route grid");
    d.has_test = true;
  } else if (need_test) {
    throw std::runtime_error("dataset " + dir + " has no test.csv");
  }
  auto md = mean_departure((fs::path(dir) / "train_departures.csv").string());
  if (md.has_value()) {
    d.mean_depart_s = *md;
  } else {
    log_info("no train_departures.csv in " + dir + ", assuming noon departures");
  }
  return d;
}

eval::Dataset as_eval_dataset(const LoadedData& d) {
  eval::Dataset ds;
  ds.grid = &d.grid;
  ds.train = &d.train;
  ds.test = &d.test;
  ds.mean_depart_s = d.mean_depart_s;
  ds.line_count = d.route.line_count;
  return ds;
}

int cmd_ingest(const std::string& trajectories, const std::string& route_path,
               const std::string& out, double tau) {
  auto route = ingest::load_route_file(route_path);
  auto grid = ingest::build_grid(route);

  std::ifstream in(trajectories, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + trajectories);
  auto journeys = ingest::parse_trajectories(in, tau);
  if (journeys.empty()) throw std::runtime_error("no journeys in " + trajectories);

  std::vector<std::pair<std::string, interp::DistTimePairs>> trips;
  std::vector<double> departs;
  trips.reserve(journeys.size());
  for (const auto& j : journeys) {
    trips.emplace_back(j.trip_id, ingest::cumulative_distance(j));
    departs.push_back(std::fmod(j.fixes.front().timestamp, 86400.0));
  }
  auto matrix = interp::interpolate_trips(trips, grid);

  json effective;
  effective["command"] = "ingest";
  effective["tau"] = tau;
  effective["route_id"] = route.route_id;
  std::string digest = config_digest(effective);

  interp::save_arrival_matrix(matrix, grid, out, digest);
  std::string dep_path = (fs::path(out).parent_path() /
                          (fs::path(out).stem().string() + "_departures.csv")).string();
  save_departures(matrix.trip_ids, departs, dep_path, digest);
  std::fprintf(stdout, "ingested %d journeys onto %d segments -> %s\n", matrix.trips(),
               matrix.segments(), out.c_str());
  return 0;
}

int cmd_synth(const std::string& config_path, const std::string& out_dir,
              std::optional<std::uint64_t> seed) {
  eval::SyntheticRouteConfig cfg;
  if (!config_path.empty()) cfg = eval::synthetic_config_from_json(config_path);
  if (seed.has_value()) cfg.seed = *seed;
  cfg.validate();

  json effective = synth_config_to_json(cfg);
  effective["command"] = "synth";
  std::string digest = config_digest(effective);

  auto data = eval::generate_synthetic_route(cfg);
  ensure_dir(out_dir);

  ingest::RouteDescription route;
  route.route_id = data.grid.route_id;
  route.route_length = data.grid.route_length();
  route.spacing = data.grid.spacing;
  route.line_count = data.line_count;
  for (const auto& seg : data.grid.segments) {
    if (seg.kind == ingest::SegmentKind::Stop)
      route.stops.emplace_back(seg.cum_distance, seg.start);
    else if (seg.kind == ingest::SegmentKind::Intersection)
      route.intersections.emplace_back(seg.cum_distance, seg.start);
  }
  fs::path out(out_dir);
  ingest::save_route_file(route, (out / "route.json").string(), digest);
  interp::save_arrival_matrix(data.train, data.grid, (out / "train.csv").string(), digest);
  interp::save_arrival_matrix(data.test, data.grid, (out / "test.csv").string(), digest);
  save_departures(data.train.trip_ids, data.depart_train_s,
                  (out / "train_departures.csv").string(), digest);
  save_departures(data.test.trip_ids, data.depart_test_s,
                  (out / "test_departures.csv").string(), digest);
  std::fprintf(stdout, "synthetic route with %d segments, %d train / %d test trips -> %s\n",
               data.grid.size() - 1, data.train.trips(), data.test.trips(), out_dir.c_str());
  return 0;
}

int cmd_train(const std::string& data_dir, const std::string& config_path,
              const std::string& out_dir, std::optional<std::uint64_t> seed) {
  json cfg_json = load_config_or_empty(config_path);
  training::TrainConfig cfg = train_config_from_json(cfg_json);
  training::RewardConfig reward = reward_config_from_json(cfg_json);
  if (seed.has_value()) cfg.seed = *seed;
  else if (!cfg_json.contains("seed"))
    throw std::runtime_error("train requires a seed (--seed or \"seed\" in the config)");
  cfg.validate();

  LoadedData data = load_dataset(data_dir, false);

  json effective = train_config_to_json(cfg, reward);
  effective["command"] = "train";
  effective["route_id"] = data.route.route_id;
  std::string digest = config_digest(effective);

  training::RouteContext ctx;
  ctx.grid = &data.grid;
  ctx.mean_depart_s = data.mean_depart_s;
  ctx.line_count = data.route.line_count;

  training::TrainResult res = training::dprl_train(data.train, ctx, cfg, reward);

  ensure_dir(out_dir);
  fs::path out(out_dir);
  lrm::save_model(res.model, (out / "lrm.json").string(), digest);
  policy::PolicyCheckpoint ckpt;
  ckpt.params = res.params;
  ckpt.scaler = res.scaler;
  ckpt.route_id = data.route.route_id;
  ckpt.seed = cfg.seed;
  policy::save_policy(ckpt, (out / "policy.json").string(), digest);
  training::save_convergence_log(res.log, (out / "convergence.csv").string(), digest);

  if (!res.log.empty()) {
    std::vector<std::string> ticks;
    svg::Series mae_series{"train MAE", {}};
    for (const auto& row : res.log) {
      ticks.push_back(std::to_string(row.epoch));
      mae_series.y.push_back(row.train_mae);
    }
    svg::write_line_chart((out / "convergence.svg").string(), "training convergence", "epoch",
                          "MAE (minutes)", ticks, {mae_series});
  }

  json summary;
  summary["config_digest"] = digest;
  summary["seed"] = cfg.seed;
  summary["selected_indices"] = res.selection.indices;
  if (!res.log.empty()) summary["final_train_mae_minutes"] = res.log.back().train_mae;
  if (data.has_test)
    summary["test_mae_minutes"] = eval::evaluate_model_mae(res.model, as_eval_dataset(data));
  detail::save_json_file(summary, (out / "summary.json").string());

  std::fprintf(stdout, "trained %d epochs -> %s\n", cfg.epochs, out_dir.c_str());
  return 0;
}

int cmd_evaluate(const std::string& data_dir, const std::string& checkpoint,
                 const std::string& out_dir) {
  LoadedData data = load_dataset(data_dir, true);
  lrm::GaussianEtaModel model = lrm::load_model(checkpoint);

  auto ckpt_json = detail::load_json_file(checkpoint);
  json effective;
  effective["command"] = "evaluate";
  effective["checkpoint_digest"] = ckpt_json.value("config_digest", "");
  std::string digest = config_digest(effective);

  double m = eval::evaluate_model_mae(model, as_eval_dataset(data));

  ensure_dir(out_dir);
  json out;
  out["config_digest"] = digest;
  out["mae_minutes"] = m;
  out["test_trips"] = data.test.trips();
  detail::save_json_file(out, (fs::path(out_dir) / "eval.json").string());
  std::fprintf(stdout, "test mae: %s minutes\n", detail::format_double(m).c_str());
  return 0;
}

int cmd_ablate(const std::string& data_dir, const std::string& config_path,
               const std::string& sweep, const std::string& out_dir,
               std::optional<std::uint64_t> seed) {
  json cfg_json = load_config_or_empty(config_path);
  training::TrainConfig cfg = train_config_from_json(cfg_json);
  training::RewardConfig reward = reward_config_from_json(cfg_json);
  if (seed.has_value()) cfg.seed = *seed;
  else if (!cfg_json.contains("seed"))
    throw std::runtime_error("ablate requires a seed (--seed or \"seed\" in the config)");
  cfg.validate();
  int num_seeds = cfg_json.value("num_seeds", 5);
  if (num_seeds < 1) throw std::runtime_error("num_seeds must be >= 1");

  LoadedData data = load_dataset(data_dir, true);
  eval::Dataset ds = as_eval_dataset(data);

  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < num_seeds; ++i) seeds.push_back(cfg.seed + static_cast<std::uint64_t>(i));

  json effective = train_config_to_json(cfg, reward);
  effective["command"] = "ablate";
  effective["sweep"] = sweep;
  effective["num_seeds"] = num_seeds;
  effective["route_id"] = data.route.route_id;
  std::string digest = config_digest(effective);

  std::vector<eval::EvalReport> reports;
  if (sweep == "selection") {
    reports = eval::run_selection_ablation(ds, cfg, reward, seeds);
  } else if (sweep == "proportion") {
    reports = eval::sweep_proportion(ds, cfg, reward, seeds);
  } else if (sweep == "reward") {
    reports = eval::sweep_reward_strategy(ds, cfg, reward, seeds);
  } else if (sweep == "mask") {
    reports = eval::sweep_mask(ds, cfg, reward, seeds);
  } else if (sweep == "iterations") {
    reports = eval::sweep_action_iterations(ds, cfg, reward, seeds);
  } else {
    throw std::runtime_error("unknown sweep: " + sweep +
                             " (expected selection|proportion|reward|mask|iterations)");
  }
  for (auto& r : reports) r.config_digest = digest;

  ensure_dir(out_dir);
  fs::path out(out_dir);
  eval::save_reports(reports, (out / ("report_" + sweep + ".json")).string(), digest);
  eval::write_sweep_plot(reports, (out / ("sweep_" + sweep + ".svg")).string(),
                         "sweep: " + sweep);
  for (const auto& r : reports)
    std::fprintf(stdout, "%s: median test mae %s minutes\n", r.label.c_str(),
                 detail::format_double(r.median_mae).c_str());
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"non-uniform road segment selection for bus arrival prediction"};
  app.require_subcommand(1);

  std::string trajectories, route_path, config_path, data_dir, out_path, checkpoint, sweep;
  double tau = 300.0;
  std::uint64_t seed_val = 0;
  bool seed_given = false;

  auto* ingest_cmd = app.add_subcommand("ingest", "trajectories -> arrival matrix");
  ingest_cmd->add_option("--trajectories", trajectories, "raw trajectory csv")
      ->required()
      ->check(CLI::ExistingFile);
  ingest_cmd->add_option("--route", route_path, "route description json")
      ->required()
      ->check(CLI::ExistingFile);
  ingest_cmd->add_option("--out", out_path, "output arrival matrix csv")->required();
  ingest_cmd->add_option("--tau", tau, "journey split threshold, seconds");

  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic route dataset");
  synth_cmd->add_option("--config", config_path, "synthetic route config json")
      ->check(CLI::ExistingFile);
  synth_cmd->add_option("--out", out_path, "output dataset directory")->required();
  auto* synth_seed = synth_cmd->add_option("--seed", seed_val, "generator seed");

  auto* train_cmd = app.add_subcommand("train", "train the selection policy");
  train_cmd->add_option("--data", data_dir, "dataset directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  train_cmd->add_option("--config", config_path, "train config json")->check(CLI::ExistingFile);
  train_cmd->add_option("--out", out_path, "output directory")->required();
  auto* train_seed = train_cmd->add_option("--seed", seed_val, "training seed");

  auto* eval_cmd = app.add_subcommand("evaluate", "score a model checkpoint on the test split");
  eval_cmd->add_option("--data", data_dir, "dataset directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--checkpoint", checkpoint, "model checkpoint json")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--out", out_path, "output directory")->required();

  auto* ablate_cmd = app.add_subcommand("ablate", "run a sweep over training variants");
  ablate_cmd->add_option("--data", data_dir, "dataset directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  ablate_cmd->add_option("--config", config_path, "train config json")->check(CLI::ExistingFile);
  ablate_cmd->add_option("--sweep", sweep, "selection|proportion|reward|mask|iterations")
      ->required();
  ablate_cmd->add_option("--out", out_path, "output directory")->required();
  auto* ablate_seed = ablate_cmd->add_option("--seed", seed_val, "base seed");

  std::vector<std::string> argv_copy = args;
  std::vector<const char*> argv;
  argv.push_back("segsel");
  for (const auto& a : argv_copy) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (ingest_cmd->parsed()) return cmd_ingest(trajectories, route_path, out_path, tau);
    if (synth_cmd->parsed()) {
      seed_given = synth_seed->count() > 0;
      return cmd_synth(config_path, out_path,
                       seed_given ? std::optional<std::uint64_t>(seed_val) : std::nullopt);
    }
    if (train_cmd->parsed()) {
      seed_given = train_seed->count() > 0;
      return cmd_train(data_dir, config_path, out_path,
                       seed_given ? std::optional<std::uint64_t>(seed_val) : std::nullopt);
    }
    if (eval_cmd->parsed()) return cmd_evaluate(data_dir, checkpoint, out_path);
    if (ablate_cmd->parsed()) {
      seed_given = ablate_seed->count() > 0;
      return cmd_ablate(data_dir, config_path, sweep, out_path,
                        seed_given ? std::optional<std::uint64_t>(seed_val) : std::nullopt);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}

}  // namespace segsel::cli
