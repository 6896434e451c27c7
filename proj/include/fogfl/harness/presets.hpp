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

// Built-in experiment presets: the six data allocations for 10 and for 30
// workers, on a cluster of three identical VMs that host the worker models
// in contiguous blocks (4/3/3 for ten workers, 10/10/10 for thirty). A worker
// gets 1/(models on its VM) of that VM's CPU.

#pragma once

#include <string>
#include <vector>

#include "fogfl/error.hpp"
#include "fogfl/harness/scenario.hpp"
#include "fogfl/trainer.hpp"

namespace fogfl::harness {

inline constexpr double kVmCpuFreq = 2.4e9;

/// Models per VM for a given worker count, three VMs.
inline std::vector<std::uint32_t> vm_layout(std::uint32_t workers) {
  const std::uint32_t base = workers / 3;
  std::vector<std::uint32_t> out(3, base);
  for (std::uint32_t i = 0; i < workers % 3; ++i) ++out[i];
  return out;
}

inline std::vector<WorkerSpec> vm_cluster(std::uint32_t workers) {
  std::vector<WorkerSpec> out;
  for (auto n : vm_layout(workers)) {
    for (std::uint32_t i = 0; i < n; ++i) {
      WorkerSpec w;
      w.cpu_freq_hz = kVmCpuFreq;
      w.cpu_avail = 1.0 / static_cast<double>(n);
      out.push_back(w);
    }
  }
  return out;
}

inline std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (int table : {3, 4}) {
    for (int c = 1; c <= 6; ++c) out.push_back("table" + std::to_string(table) + "-config" + std::to_string(c));
  }
  return out;
}

inline Scenario preset(const std::string& name) {
  int table = 0, config = 0;
  if (std::sscanf(name.c_str(), "table%d-config%d", &table, &config) != 2 ||
      (table != 3 && table != 4) || config < 1 || config > 6 ||
      name != "table" + std::to_string(table) + "-config" + std::to_string(config)) {
    throw Error(Errc::ValidationError, "unknown preset " + name);
  }
  Scenario s;
  s.name = name;
  s.partition = table == 3 ? table3(static_cast<std::uint32_t>(config))
                           : table4(static_cast<std::uint32_t>(config));
  s.workers = vm_cluster(s.partition.worker_count);
  s.calibration.server_cpu_freq = kVmCpuFreq;
  s.calibration.t_onedata = 0.5;
  s.task.kind = TaskKind::Surrogate;
  s.validate();
  return s;
}

}  // namespace fogfl::harness
