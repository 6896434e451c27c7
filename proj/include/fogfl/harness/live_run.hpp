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

// Runs a scenario over real sockets on loopback, one process, one agent
// per worker. Simulated compute time is slept, scaled by `time_scale`.

#pragma once

#include <memory>
#include <vector>

#include "fogfl/harness/scenario.hpp"
#include "fogfl/harness/sim.hpp"
#include "fogfl/harness/trace.hpp"
#include "fogfl/live.hpp"

namespace fogfl::harness {

struct LiveRunResult {
  std::vector<TraceRow> rows;  // virtual_time_s is wall time divided by time_scale
  std::vector<std::vector<WorkerId>> aggregated_ids;  // parallel to rows
  std::uint32_t final_version = 0;
};

inline LiveRunResult run_live(const Scenario& s, double time_scale = 0.01) {
  s.validate();
  if (!(time_scale > 0.0)) throw Error(Errc::InvalidArgument, "time_scale must be positive");
  const auto task = make_task(s.task);
  const auto shards = partition(s.partition, s.task);
  const auto timings = worker_timings(s);

  std::vector<std::unique_ptr<WorkerAgent>> agents;
  for (std::size_t i = 0; i < shards.size(); ++i) {
    WorkerAgentConfig wc;
    wc.train_delay_per_epoch_s = timings[i].profile.t_one * time_scale;
    wc.learning_rate = s.learning_rate;
    wc.seed = s.seed;
    agents.push_back(std::make_unique<WorkerAgent>(wc, *task, shards[i]));
  }

  LiveServerConfig lc;
  lc.aggregation_time_s = s.aggregation_time_s * time_scale;
  lc.idle_round_s = s.idle_round_s * time_scale;
  lc.time_scale = time_scale;
  LiveServer server(lc, s.server_config(), *task);
  for (std::size_t i = 0; i < agents.size(); ++i) {
    server.add_worker(agents[i]->endpoint(), timings[i].profile);
  }

  LiveRunResult out;
  for (const auto& r : server.run(s.total_rounds, s.target_accuracy)) {
    out.rows.push_back(TraceRow{r.record.round, r.wall_time_s / time_scale, r.record.accuracy,
                                r.record.selected, r.record.aggregated, r.record.discarded_stale,
                                r.record.selector_state});
    out.aggregated_ids.push_back(r.record.aggregated_ids);
  }
  out.final_version = server.version();
  server.shutdown_workers();
  server.stop();
  for (auto& a : agents) a->stop();
  return out;
}

}  // namespace fogfl::harness
