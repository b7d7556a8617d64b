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

#include "segsel/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace segsel::svg {

static std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

static std::string fmt_tick(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

static std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

void write_line_chart(const std::string& path,
                      const std::string& title,
                      const std::string& x_label,
                      const std::string& y_label,
                      const std::vector<std::string>& x_ticks,
                      const std::vector<Series>& series) {
  if (x_ticks.empty() || series.empty())
    throw std::invalid_argument("write_line_chart: nothing to plot");
  for (const auto& s : series)
    if (s.y.size() != x_ticks.size())
      throw std::invalid_argument("write_line_chart: series '" + s.label + "' length mismatch");

  const double w = 720, h = 440;
  const double ml = 70, mr = 20, mt = 40, mb = 60;
  const double pw = w - ml - mr, ph = h - mt - mb;

  double ymin = std::numeric_limits<double>::infinity(), ymax = -ymin;
  for (const auto& s : series)
    for (double v : s.y) {
      ymin = std::min(ymin, v);
      ymax = std::max(ymax, v);
    }
  if (!(ymin <= ymax)) throw std::invalid_argument("write_line_chart: non-finite data");
  if (ymax - ymin < 1e-12) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;

  const std::size_t n = x_ticks.size();
  auto px = [&](std::size_t i) {
    return n == 1 ? ml + pw / 2 : ml + pw * static_cast<double>(i) / static_cast<double>(n - 1);
  };
  auto py = [&](double v) { return mt + ph * (1.0 - (v - ymin) / (ymax - ymin)); };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_line_chart: cannot open " + path);

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
  out << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"16\">"
      << escape(title) << "</text>\n";

  // y grid + ticks
  for (int k = 0; k <= 4; ++k) {
    double v = ymin + (ymax - ymin) * k / 4.0;
    double y = py(v);
    out << "<line x1=\"" << fmt(ml) << "\" y1=\"" << fmt(y) << "\" x2=\"" << fmt(ml + pw)
        << "\" y2=\"" << fmt(y) << "\" stroke=\"#dddddd\"/>\n";
    out << "<text x=\"" << fmt(ml - 8) << "\" y=\"" << fmt(y + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fmt_tick(v)
        << "</text>\n";
  }

  // x ticks; thin labels when crowded
  std::size_t step = std::max<std::size_t>(1, n / 12);
  for (std::size_t i = 0; i < n; i += step) {
    double x = px(i);
    out << "<line x1=\"" << fmt(x) << "\" y1=\"" << fmt(mt + ph) << "\" x2=\"" << fmt(x)
        << "\" y2=\"" << fmt(mt + ph + 5) << "\" stroke=\"#333333\"/>\n";
    out << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(mt + ph + 20)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
        << escape(x_ticks[i]) << "</text>\n";
  }

  out << "<rect x=\"" << fmt(ml) << "\" y=\"" << fmt(mt) << "\" width=\"" << fmt(pw)
      << "\" height=\"" << fmt(ph) << "\" fill=\"none\" stroke=\"#333333\"/>\n";
  out << "<text x=\"" << w / 2 << "\" y=\"" << h - 14
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << escape(x_label)
      << "</text>\n";
  out << "<text x=\"18\" y=\"" << h / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
         "transform=\"rotate(-90 18 "
      << h / 2 << ")\">" << escape(y_label) << "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = colors[si % 6];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < n; ++i)
      out << fmt(px(i)) << "," << fmt(py(s.y[i])) << (i + 1 < n ? " " : "");
    out << "\"/>\n";
    for (std::size_t i = 0; i < n; ++i)
      out << "<circle cx=\"" << fmt(px(i)) << "\" cy=\"" << fmt(py(s.y[i]))
          << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    // legend
    double lx = ml + 12, ly = mt + 14 + 18 * static_cast<double>(si);
    out << "<line x1=\"" << fmt(lx) << "\" y1=\"" << fmt(ly - 4) << "\" x2=\"" << fmt(lx + 22)
        << "\" y2=\"" << fmt(ly - 4) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << fmt(lx + 28) << "\" y=\"" << fmt(ly)
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << escape(s.label) << "</text>\n";
  }

  out << "</svg>\n";
  if (!out) throw std::runtime_error("write_line_chart: write failed for " + path);
}

}  // namespace segsel::svg
