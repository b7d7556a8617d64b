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

#include "segsel/interp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>

#include "segsel/detail/io.hpp"
#include "segsel/log.hpp"

namespace segsel::interp {

double VariogramModel::operator()(double h) const {
  if (h <= 0.0) return 0.0;
  return nugget + (sill - nugget) * (1.0 - std::exp(-h / range_param));
}

VariogramModel fit_variogram(const DistTimePairs& pairs, double spacing) {
  if (!(spacing > 0.0)) throw std::invalid_argument("fit_variogram: spacing must be positive");
  if (pairs.size() < 4)
    throw std::invalid_argument("fit_variogram: need at least 4 pairs, got " +
                                std::to_string(pairs.size()));
  {
    std::vector<double> ds;
    ds.reserve(pairs.size());
    for (const auto& [d, t] : pairs) ds.push_back(d);
    std::sort(ds.begin(), ds.end());
    std::size_t distinct = 0;
    for (std::size_t i = 0; i < ds.size(); ++i)
      if (i == 0 || ds[i] - ds[i - 1] > 1e-9) ++distinct;
    if (distinct < 3)
      throw std::invalid_argument("fit_variogram: need at least 3 distinct distances");
  }

  // empirical semivariogram, one bin per spacing step
  struct Bin {
    double gamma_sum = 0.0;
    double lag_sum = 0.0;
    long n = 0;
  };
  std::map<long, Bin> bins;
  double max_lag = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i)
    for (std::size_t j = i + 1; j < pairs.size(); ++j) {
      double lag = std::abs(pairs[j].first - pairs[i].first);
      double dt = pairs[j].second - pairs[i].second;
      long k = std::lround(lag / spacing);
      auto& b = bins[k];
      b.gamma_sum += 0.5 * dt * dt;
      b.lag_sum += lag;
      b.n += 1;
      max_lag = std::max(max_lag, lag);
    }

  std::vector<double> h, g, w;
  double gmax = 0.0;
  for (const auto& [k, b] : bins) {
    double lag = b.lag_sum / static_cast<double>(b.n);
    if (lag <= 0.0) continue;  // coincident pairs carry no lag information
    h.push_back(lag);
    g.push_back(b.gamma_sum / static_cast<double>(b.n));
    w.push_back(static_cast<double>(b.n));
    gmax = std::max(gmax, g.back());
  }

  if (gmax <= 0.0) {
    // all times identical
    return VariogramModel{0.0, 0.0, spacing};
  }
  if (h.size() < 2) {
    // one usable bin: no way to separate nugget from structure
    return VariogramModel{0.0, g.front(), spacing};
  }

  // grid search over range, weighted LS for (nugget a, partial sill b) with
  // nonnegativity clamps
  double best_sse = std::numeric_limits<double>::infinity();
  double best_a = 0.0, best_b = gmax, best_r = spacing;
  const int kRangeSteps = 48;
  double r_lo = spacing * 0.25;
  double r_hi = std::max(r_lo * 2.0, max_lag * 4.0);
  for (int s = 0; s < kRangeSteps; ++s) {
    double r = r_lo * std::pow(r_hi / r_lo, static_cast<double>(s) / (kRangeSteps - 1));
    double sw = 0, swx = 0, swxx = 0, swy = 0, swxy = 0;
    for (std::size_t i = 0; i < h.size(); ++i) {
      double x = 1.0 - std::exp(-h[i] / r);
      sw += w[i];
      swx += w[i] * x;
      swxx += w[i] * x * x;
      swy += w[i] * g[i];
      swxy += w[i] * x * g[i];
    }
    double det = sw * swxx - swx * swx;
    double a, b;
    if (std::abs(det) < 1e-30) {
      a = 0.0;
      b = swxx > 0.0 ? swxy / swxx : 0.0;
    } else {
      a = (swxx * swy - swx * swxy) / det;
      b = (sw * swxy - swx * swy) / det;
    }
    if (a < 0.0) {
      a = 0.0;
      b = swxx > 0.0 ? swxy / swxx : 0.0;
    }
    if (b < 0.0) {
      b = 0.0;
      a = sw > 0.0 ? swy / sw : 0.0;
    }
    double sse = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
      double x = 1.0 - std::exp(-h[i] / r);
      double e = a + b * x - g[i];
      sse += w[i] * e * e;
    }
    if (sse < best_sse) {
      best_sse = sse;
      best_a = a;
      best_b = b;
      best_r = r;
    }
  }
  if (best_b <= 0.0) return VariogramModel{best_a, best_a, spacing};
  return VariogramModel{best_a, best_a + best_b, best_r};
}

// piecewise linear over the observations, clamped at the ends
static double linear_interp(const DistTimePairs& pairs, double d) {
  if (d <= pairs.front().first) return pairs.front().second;
  if (d >= pairs.back().first) return pairs.back().second;
  auto it = std::upper_bound(pairs.begin(), pairs.end(), d,
                             [](double v, const std::pair<double, double>& p) { return v < p.first; });
  const auto& hi = *it;
  const auto& lo = *(it - 1);
  double t = (d - lo.first) / (hi.first - lo.first);
  return lo.second + t * (hi.second - lo.second);
}

std::vector<double> krige_arrival_times(const DistTimePairs& pairs, const VariogramModel& model,
                                        const ingest::SegmentGrid& grid) {
  if (pairs.empty()) throw std::invalid_argument("krige_arrival_times: no observations");
  for (std::size_t i = 1; i < pairs.size(); ++i)
    if (!(pairs[i].first > pairs[i - 1].first))
      throw std::invalid_argument("krige_arrival_times: distances must be strictly increasing");
  if (grid.size() == 0) throw std::invalid_argument("krige_arrival_times: empty grid");

  double d_lo = pairs.front().first;
  double d_hi = pairs.back().first;
  for (const auto& seg : grid.segments)
    if (seg.cum_distance < d_lo - grid.spacing - 1e-9 ||
        seg.cum_distance > d_hi + grid.spacing + 1e-9)
      throw std::runtime_error(
          "krige_arrival_times: grid point at " + detail::format_double(seg.cum_distance) +
          " m is more than one spacing outside the observed span [" + detail::format_double(d_lo) +
          ", " + detail::format_double(d_hi) + "]");

  const int n = static_cast<int>(pairs.size());
  bool fallback = n < 2 || model.sill <= 0.0;

  Eigen::FullPivLU<Eigen::MatrixXd> lu;
  if (!fallback) {
    // ordinary kriging system in variogram form, Lagrange-bordered
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n + 1, n + 1);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j)
        a(i, j) = model(std::abs(pairs[static_cast<std::size_t>(i)].first -
                                 pairs[static_cast<std::size_t>(j)].first));
      a(i, i) += 1e-8 * model.sill;
      a(i, n) = 1.0;
      a(n, i) = 1.0;
    }
    lu.compute(a);
    if (!lu.isInvertible()) {
      fallback = true;
      log_info("krige_arrival_times: singular kriging system, using linear fallback");
    }
  }

  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(grid.size()));
  Eigen::VectorXd rhs(n + 1);
  for (const auto& seg : grid.segments) {
    double d = seg.cum_distance;
    // exact passthrough at observation sites
    auto it = std::lower_bound(pairs.begin(), pairs.end(), d,
                               [](const std::pair<double, double>& p, double v) { return p.first < v; });
    const std::pair<double, double>* site = nullptr;
    if (it != pairs.end() && std::abs(it->first - d) <= 1e-9) site = &*it;
    else if (it != pairs.begin() && std::abs((it - 1)->first - d) <= 1e-9) site = &*(it - 1);
    if (site != nullptr) {
      out.push_back(site->second);
      continue;
    }
    if (fallback) {
      out.push_back(linear_interp(pairs, d));
      continue;
    }
    for (int i = 0; i < n; ++i)
      rhs(i) = model(std::abs(pairs[static_cast<std::size_t>(i)].first - d));
    rhs(n) = 1.0;
    Eigen::VectorXd wgt = lu.solve(rhs);
    double est = 0.0;
    for (int i = 0; i < n; ++i) est += wgt(i) * pairs[static_cast<std::size_t>(i)].second;
    out.push_back(est);
  }
  return out;
}

std::vector<double> enforce_monotone(const std::vector<double>& times) {
  std::vector<double> mean;
  std::vector<std::size_t> count;
  mean.reserve(times.size());
  count.reserve(times.size());
  for (double x : times) {
    mean.push_back(x);
    count.push_back(1);
    while (mean.size() > 1 && mean[mean.size() - 2] > mean.back()) {
      double m2 = mean.back();
      std::size_t c2 = count.back();
      mean.pop_back();
      count.pop_back();
      double m1 = mean.back();
      std::size_t c1 = count.back();
      mean.back() = (m1 * static_cast<double>(c1) + m2 * static_cast<double>(c2)) /
                    static_cast<double>(c1 + c2);
      count.back() = c1 + c2;
    }
  }
  std::vector<double> out;
  out.reserve(times.size());
  for (std::size_t b = 0; b < mean.size(); ++b)
    for (std::size_t i = 0; i < count[b]; ++i) out.push_back(mean[b]);
  return out;
}

ArrivalMatrix interpolate_trips(const std::vector<std::pair<std::string, DistTimePairs>>& trips,
                                const ingest::SegmentGrid& grid) {
  if (trips.empty()) throw std::invalid_argument("interpolate_trips: no trips");
  ArrivalMatrix m;
  m.grid_ref = grid.route_id;
  m.times.resize(static_cast<Eigen::Index>(trips.size()), grid.size());
  m.trip_ids.reserve(trips.size());
  long fallbacks = 0;
  for (std::size_t r = 0; r < trips.size(); ++r) {
    const auto& [trip_id, pairs] = trips[r];
    std::vector<double> row;
    bool sparse = pairs.size() < 4;
    if (!sparse) {
      std::size_t distinct = 1;
      for (std::size_t i = 1; i < pairs.size(); ++i)
        if (pairs[i].first - pairs[i - 1].first > 1e-9) ++distinct;
      sparse = distinct < 3;
    }
    try {
      if (sparse) {
        ++fallbacks;
        VariogramModel degenerate{0.0, 0.0, grid.spacing};
        row = krige_arrival_times(pairs, degenerate, grid);
      } else {
        VariogramModel vg = fit_variogram(pairs, grid.spacing);
        row = krige_arrival_times(pairs, vg, grid);
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("interpolate_trips: trip " + trip_id + ": " + e.what());
    }
    row = enforce_monotone(row);
    for (int c = 0; c < grid.size(); ++c) m.times(static_cast<Eigen::Index>(r), c) = row[static_cast<std::size_t>(c)];
    m.trip_ids.push_back(trip_id);
  }
  if (fallbacks > 0)
    log_info("interpolate_trips: " + std::to_string(fallbacks) +
             " trips too sparse for a variogram fit, interpolated linearly");
  return m;
}

void save_arrival_matrix(const ArrivalMatrix& m, const ingest::SegmentGrid& grid,
                         const std::string& path, const std::string& config_digest) {
  if (m.segments() != grid.size())
    throw std::invalid_argument("save_arrival_matrix: matrix does not match grid");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path);
  if (!config_digest.empty()) out << "# config_digest=" << config_digest << "\n";
  out << "trip_id";
  for (const auto& seg : grid.segments) out << "," << detail::format_double(seg.cum_distance);
  out << "\n";
  for (int r = 0; r < m.trips(); ++r) {
    out << m.trip_ids[static_cast<std::size_t>(r)];
    for (int c = 0; c < m.segments(); ++c) out << "," << detail::format_double(m.times(r, c));
    out << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

ArrivalMatrix load_arrival_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::string line;
  long line_no = 0;
  bool header_seen = false;
  std::size_t cols = 0;
  std::vector<std::string> ids;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv = detail::trim(line);
    if (sv.empty() || sv.front() == '#') continue;
    auto cells = detail::split_line(sv);
    if (!header_seen) {
      if (cells.size() < 2 || cells[0] != "trip_id")
        throw std::runtime_error("arrival matrix parse error at line " + std::to_string(line_no) +
                                 ": expected header trip_id,<cum_distances>");
      cols = cells.size() - 1;
      header_seen = true;
      continue;
    }
    if (cells.size() != cols + 1)
      throw std::runtime_error("arrival matrix parse error at line " + std::to_string(line_no) +
                               ": expected " + std::to_string(cols + 1) + " fields");
    ids.push_back(cells[0]);
    for (std::size_t i = 1; i < cells.size(); ++i)
      values.push_back(detail::parse_double(cells[i], path + " line " + std::to_string(line_no)));
  }
  if (!header_seen || ids.empty())
    throw std::runtime_error("arrival matrix " + path + " has no data rows");
  ArrivalMatrix m;
  m.trip_ids = std::move(ids);
  m.times.resize(static_cast<Eigen::Index>(m.trip_ids.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < m.trip_ids.size(); ++r)
    for (std::size_t c = 0; c < cols; ++c)
      m.times(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = values[r * cols + c];
  return m;
}

}  // namespace segsel::interp
