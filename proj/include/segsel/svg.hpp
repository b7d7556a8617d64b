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

#include <string>
#include <vector>

namespace segsel::svg {

struct Series {
  std::string label;
  std::vector<double> y;  // one value per x tick
};

// Minimal deterministic line chart. X positions are the tick indices; ticks
// are labeled with the given strings (epoch numbers, fractions, strategy
// names...). Multiple series share the x axis and get distinct colors plus a
// legend. Output is a self-contained SVG file.
void write_line_chart(const std::string& path,
                      const std::string& title,
                      const std::string& x_label,
                      const std::string& y_label,
                      const std::vector<std::string>& x_ticks,
                      const std::vector<Series>& series);

}  // namespace segsel::svg
