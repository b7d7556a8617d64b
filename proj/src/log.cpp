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

#include "segsel/log.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace segsel {

static LogLevel parse_level(const char* s) {
  if (s == nullptr || *s == '\0') return LogLevel::Warn;
  if (std::strcmp(s, "error") == 0 || std::strcmp(s, "0") == 0) return LogLevel::Error;
  if (std::strcmp(s, "warn") == 0 || std::strcmp(s, "1") == 0) return LogLevel::Warn;
  if (std::strcmp(s, "info") == 0 || std::strcmp(s, "2") == 0) return LogLevel::Info;
  if (std::strcmp(s, "debug") == 0 || std::strcmp(s, "3") == 0) return LogLevel::Debug;
  return LogLevel::Warn;
}

LogLevel log_level() {
  static const LogLevel lvl = parse_level(std::getenv("SEGSEL_LOG"));
  return lvl;
}

void log_msg(LogLevel level, const std::string& msg) {
  if (static_cast<int>(level) > static_cast<int>(log_level())) return;
  static const char* names[] = {"error", "warn", "info", "debug"};
  std::fprintf(stderr, "[segsel %s] %s\n", names[static_cast<int>(level)], msg.c_str());
}

}  // namespace segsel
