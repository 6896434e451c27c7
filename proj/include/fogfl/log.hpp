/*
 * Copyright 2026 The fogfl Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <atomic>
#include <iostream>
#include <mutex>
#include <sstream>

namespace fogfl::log {

enum class Level { Debug = 0, Info = 1, Warn = 2, Error = 3, Off = 4 };

inline std::atomic<Level>& threshold() {
  static std::atomic<Level> level{Level::Warn};
  return level;
}

inline void set_level(Level l) { threshold().store(l); }

template <typename... Args>
void write(Level l, const Args&... args) {
  if (l < threshold().load()) return;
  static std::mutex mu;
  static constexpr const char* kTags[] = {"debug", "info", "warn", "error"};
  std::ostringstream oss;
  oss << "[fogfl " << kTags[static_cast<int>(l)] << "] ";
  (oss << ... << args);
  std::lock_guard lock(mu);
  std::cerr << oss.str() << '\n';
}

template <typename... Args> void debug(const Args&... a) { write(Level::Debug, a...); }
template <typename... Args> void info(const Args&... a) { write(Level::Info, a...); }
template <typename... Args> void warn(const Args&... a) { write(Level::Warn, a...); }
template <typename... Args> void error(const Args&... a) { write(Level::Error, a...); }

}  // namespace fogfl::log
