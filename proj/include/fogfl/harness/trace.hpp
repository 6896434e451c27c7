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

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>

#include "fogfl/error.hpp"

namespace fogfl::harness {

inline constexpr const char* kTraceHeader =
    "round,virtual_time_s,accuracy,selected,aggregated,discarded_stale,selector_state";

struct TraceRow {
  std::uint32_t round = 0;
  double virtual_time_s = 0.0;
  double accuracy = 0.0;
  std::uint32_t selected = 0;
  std::uint32_t aggregated = 0;
  std::uint32_t discarded_stale = 0;
  std::string selector_state;  // ';'-separated key=value pairs

  friend bool operator==(const TraceRow&, const TraceRow&) = default;
};

/// Time and accuracy are printed with six decimals so the text is stable.
inline std::string format_trace(std::span<const TraceRow> rows) {
  std::string out = kTraceHeader;
  out += '\n';
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%u,%.6f,%.6f,%u,%u,%u,", r.round, r.virtual_time_s,
                  r.accuracy, r.selected, r.aggregated, r.discarded_stale);
    out += buf;
    out += r.selector_state;
    out += '\n';
  }
  return out;
}

inline void emit_trace(std::span<const TraceRow> rows, const std::filesystem::path& path) {
  if (rows.empty()) throw Error(Errc::InvalidArgument, "refusing to write an empty trace");
  const std::string text = format_trace(rows);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot open " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(Errc::IoError, "write failed: " + path.string());
}

}  // namespace fogfl::harness
