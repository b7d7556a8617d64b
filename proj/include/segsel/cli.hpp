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

namespace segsel::cli {

// Full command-line entry point (argv[0] excluded from `args`). Returns the
// process exit code: 0 on success, nonzero on any failure. Runs in-process so
// tests can drive it directly.
int run(const std::vector<std::string>& args);

}  // namespace segsel::cli
