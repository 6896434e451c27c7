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

// fogfl command line.
//
//   fogfl run --scenario s.toml [--preset name] [--mode sync|async]
//             [--selector all|random[:k]|rminmax|timebased] [--seed n] [--out trace.csv]
//   fogfl preset --list
//   fogfl preset --emit table3-config2 [--out file.toml]
//   fogfl preset --emit-all dir
//   fogfl live --role worker --listen host:port --scenario s.toml --worker-index i
//   fogfl live --role server --listen host:port --scenario s.toml --workers h:p,h:p,...
//
// Exit status: 0 ok, 1 runtime failure, 2 bad usage or invalid scenario.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fogfl/harness/presets.hpp"
#include "fogfl/harness/scenario.hpp"
#include "fogfl/harness/sim.hpp"
#include "fogfl/harness/trace.hpp"
#include "fogfl/live.hpp"
#include "fogfl/log.hpp"

namespace {

using namespace fogfl;
using namespace fogfl::harness;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct RunArgs {
  std::string scenario;
  std::string preset;
  std::string mode;
  std::string selector;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint32_t> rounds;
  std::string out;
};

struct PresetArgs {
  bool list = false;
  std::string emit;
  std::string emit_all;
  std::string out;
};

struct LiveArgs {
  std::string role;
  std::string listen = "127.0.0.1:0";
  std::string scenario;
  std::string preset;
  std::uint32_t worker_index = 0;
  std::vector<std::string> workers;
  double time_scale = 1.0;
  std::optional<std::uint32_t> rounds;
  std::string out;
};

Scenario load(const std::string& path, const std::string& preset_name) {
  if (!path.empty() && !preset_name.empty()) {
    throw Error(Errc::ValidationError, "give --scenario or --preset, not both");
  }
  if (!preset_name.empty()) return preset(preset_name);
  if (path.empty()) throw Error(Errc::ValidationError, "--scenario is required");
  return load_scenario(path);
}

void apply_selector(Scenario& s, const std::string& text) {
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  const auto kind = selector_from_name(name);
  if (!kind) throw Error(Errc::ValidationError, "selector: unknown selector " + name);
  s.selector.kind = *kind;
  if (colon != std::string::npos) {
    if (*kind != SelectorKind::Random) {
      throw Error(Errc::ValidationError, "selector: only random takes an argument");
    }
    try {
      s.selector.k = static_cast<std::uint32_t>(std::stoul(text.substr(colon + 1)));
    } catch (const std::exception&) {
      throw Error(Errc::ValidationError, "selector: bad k in " + text);
    }
  }
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot open " + path);
  out << text;
  if (!out) throw Error(Errc::IoError, "write failed: " + path);
}

int cmd_run(const RunArgs& a) {
  Scenario s = load(a.scenario, a.preset);
  if (!a.mode.empty()) {
    const auto m = mode_from_name(a.mode);
    if (!m) throw Error(Errc::ValidationError, "mode: expected sync or async");
    s.mode = *m;
  }
  if (!a.selector.empty()) apply_selector(s, a.selector);
  if (a.seed) s.seed = *a.seed;
  if (a.rounds) s.total_rounds = *a.rounds;
  s.validate();
  const SimResult r = run_sim(s);
  if (a.out.empty() || a.out == "-") {
    std::cout << format_trace(r.rows);
  } else {
    emit_trace(r.rows, a.out);
  }
  return kExitOk;
}

int cmd_preset(const PresetArgs& a) {
  if (a.list) {
    for (const auto& n : preset_names()) std::cout << n << '\n';
    return kExitOk;
  }
  if (!a.emit.empty()) {
    write_text(a.out, to_toml(preset(a.emit)));
    return kExitOk;
  }
  if (!a.emit_all.empty()) {
    std::filesystem::create_directories(a.emit_all);
    for (const auto& n : preset_names()) {
      write_text((std::filesystem::path(a.emit_all) / (n + ".toml")).string(), to_toml(preset(n)));
    }
    return kExitOk;
  }
  throw Error(Errc::ValidationError, "preset: give --list, --emit or --emit-all");
}

int cmd_live_worker(const LiveArgs& a, const Scenario& s) {
  if (a.worker_index >= s.workers.size()) {
    throw Error(Errc::ValidationError, "worker-index: scenario has " +
                                           std::to_string(s.workers.size()) + " workers");
  }
  const auto task = make_task(s.task);
  const auto shards = partition(s.partition, s.task);
  const auto timings = worker_timings(s);
  WorkerAgentConfig wc;
  wc.listen = wire::parse_endpoint(a.listen);
  wc.blob_listen = Endpoint{wc.listen.host, 0};
  wc.train_delay_per_epoch_s = timings[a.worker_index].profile.t_one * a.time_scale;
  wc.learning_rate = s.learning_rate;
  wc.seed = s.seed;
  WorkerAgent agent(wc, *task, shards[a.worker_index]);
  std::cerr << "worker " << a.worker_index << " listening on " << agent.endpoint().to_string() << '\n';
  agent.wait_for_shutdown();
  agent.stop();
  return kExitOk;
}

int cmd_live_server(const LiveArgs& a, const Scenario& s) {
  if (a.workers.size() != s.workers.size()) {
    throw Error(Errc::ValidationError, "workers: scenario has " + std::to_string(s.workers.size()) +
                                           " workers, got " + std::to_string(a.workers.size()));
  }
  const auto task = make_task(s.task);
  const auto timings = worker_timings(s);
  LiveServerConfig lc;
  lc.listen = wire::parse_endpoint(a.listen);
  lc.blob_listen = Endpoint{lc.listen.host, 0};
  lc.aggregation_time_s = s.aggregation_time_s * a.time_scale;
  lc.idle_round_s = s.idle_round_s * a.time_scale;
  lc.time_scale = a.time_scale;
  LiveServer server(lc, s.server_config(), *task);
  for (std::size_t i = 0; i < a.workers.size(); ++i) {
    server.add_worker(wire::parse_endpoint(a.workers[i]), timings[i].profile);
  }
  std::vector<TraceRow> rows;
  for (const auto& r : server.run(s.total_rounds, s.target_accuracy)) {
    rows.push_back(TraceRow{r.record.round, r.wall_time_s / a.time_scale, r.record.accuracy,
                            r.record.selected, r.record.aggregated, r.record.discarded_stale,
                            r.record.selector_state});
  }
  server.shutdown_workers();
  if (a.out.empty() || a.out == "-") {
    std::cout << format_trace(rows);
  } else {
    emit_trace(rows, a.out);
  }
  return kExitOk;
}

int cmd_live(const LiveArgs& a) {
  Scenario s = load(a.scenario, a.preset);
  if (a.rounds) s.total_rounds = *a.rounds;
  if (!(a.time_scale > 0.0)) throw Error(Errc::ValidationError, "time-scale must be positive");
  if (a.role == "worker") return cmd_live_worker(a, s);
  return cmd_live_server(a, s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fogfl: federated learning orchestration and simulation"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "log progress to stderr");

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "simulate a scenario and write its trace");
  run_cmd->add_option("--scenario", run.scenario, "scenario TOML file");
  run_cmd->add_option("--preset", run.preset, "built-in preset instead of a file");
  run_cmd->add_option("--mode", run.mode, "override mode")->check(CLI::IsMember({"sync", "async"}));
  run_cmd->add_option("--selector", run.selector, "override selector: all, random[:k], rminmax, timebased");
  run_cmd->add_option("--seed", run.seed, "override seed");
  run_cmd->add_option("--rounds", run.rounds, "override total_rounds");
  run_cmd->add_option("--out", run.out, "trace CSV path (default stdout)");

  PresetArgs pre;
  auto* pre_cmd = app.add_subcommand("preset", "list or emit built-in presets");
  pre_cmd->add_flag("--list", pre.list, "print preset names");
  pre_cmd->add_option("--emit", pre.emit, "print one preset as TOML");
  pre_cmd->add_option("--emit-all", pre.emit_all, "write every preset into a directory");
  pre_cmd->add_option("--out", pre.out, "output file for --emit");

  LiveArgs live;
  auto* live_cmd = app.add_subcommand("live", "run a server or worker over TCP");
  live_cmd->add_option("--role", live.role, "server or worker")
      ->required()
      ->check(CLI::IsMember({"server", "worker"}));
  live_cmd->add_option("--listen", live.listen, "control endpoint host:port");
  live_cmd->add_option("--scenario", live.scenario, "scenario TOML file");
  live_cmd->add_option("--preset", live.preset, "built-in preset instead of a file");
  live_cmd->add_option("--worker-index", live.worker_index, "worker role: 0-based index in the scenario");
  live_cmd->add_option("--workers", live.workers, "server role: worker endpoints in scenario order")
      ->delimiter(',');
  live_cmd->add_option("--time-scale", live.time_scale, "wall seconds per simulated second");
  live_cmd->add_option("--rounds", live.rounds, "server role: override total_rounds");
  live_cmd->add_option("--out", live.out, "server role: trace CSV path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }
  if (verbose) log::set_level(log::Level::Info);

  try {
    if (*run_cmd) return cmd_run(run);
    if (*pre_cmd) return cmd_preset(pre);
    return cmd_live(live);
  } catch (const Error& e) {
    std::cerr << "fogfl: " << e.what() << '\n';
    const bool usage = e.code() == Errc::ValidationError || e.code() == Errc::ParseError;
    return usage ? kExitUsage : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "fogfl: " << e.what() << '\n';
    return kExitRuntime;
  }
}
