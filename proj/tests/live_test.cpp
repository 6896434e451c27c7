#include <gtest/gtest.h>

#include <chrono>
#include <future>
#include <thread>

#include "fogfl/harness/live_run.hpp"
#include "fogfl/harness/sim.hpp"
#include "fogfl/live.hpp"

namespace fogfl {
namespace {

using namespace std::chrono_literals;

struct Fixture : ::testing::Test {
  TaskSpec spec = [] {
    TaskSpec t;
    t.kind = TaskKind::SyntheticClassify;
    t.test_examples = 256;
    return t;
  }();
  std::unique_ptr<Task> task = make_task(spec);
  std::vector<Shard> shards = partition(PartitionConfig{0, 2, {2, 3}}, spec);

  LiveServerConfig server_cfg() const {
    LiveServerConfig c;
    c.request_timeout = 3s;
    return c;
  }

  WorkerAgentConfig agent_cfg(double delay = 0.0) const {
    WorkerAgentConfig c;
    c.train_delay_per_epoch_s = delay;
    return c;
  }

  static WorkerProfile hint(std::uint32_t id) {
    WorkerProfile p;
    p.worker_id = WorkerId{id};
    p.t_one = 1.0;
    p.t_transmit = 0.1;
    return p;
  }
};

TEST_F(Fixture, HandshakeAddsWorker) {
  WorkerAgent agent(agent_cfg(), *task, shards[0]);
  LiveServer server(server_cfg(), ServerConfig{}, *task);
  EXPECT_EQ(server.roster_size(), 0u);
  const auto id = server.add_worker(agent.endpoint(), hint(1));
  EXPECT_EQ(id, WorkerId{1});
  EXPECT_EQ(server.roster_size(), 1u);
  ASSERT_TRUE(agent.server_ref().has_value());
  EXPECT_EQ(*agent.server_ref(), server.model_ref());
}

TEST_F(Fixture, DuplicateInviteIsIdempotent) {
  WorkerAgent agent(agent_cfg(), *task, shards[0]);
  LiveServer server(server_cfg(), ServerConfig{}, *task);
  const auto a = server.add_worker(agent.endpoint(), hint(1));
  const auto b = server.add_worker(agent.endpoint(), hint(1));
  EXPECT_EQ(a, b);
  EXPECT_EQ(server.roster_size(), 1u);
}

TEST_F(Fixture, UnreachableWorker) {
  LiveServer server(server_cfg(), ServerConfig{}, *task);
  Endpoint dead{"127.0.0.1", 0};
  {
    WorkerAgent gone(agent_cfg(), *task, shards[0]);
    dead = gone.endpoint();
  }
  try {
    server.add_worker(dead, hint(1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::Unreachable);
  }
  EXPECT_EQ(server.roster_size(), 0u);
}

TEST_F(Fixture, RequestTrainingReportsEpochsAndVersion) {
  WorkerAgent agent(agent_cfg(), *task, shards[1]);
  LiveServer server(server_cfg(), ServerConfig{}, *task);
  const auto id = server.add_worker(agent.endpoint(), hint(1));
  const auto done = server.request_training(id, 3);
  EXPECT_EQ(done.local_epochs, 3u);
  EXPECT_EQ(done.base_version, server.version());
  EXPECT_EQ(done.worker_ref, agent.model_ref());
  EXPECT_EQ(agent.status(), AgentStatus::Reporting);
}

TEST_F(Fixture, SecondRequestWhileTrainingIsBusy) {
  WorkerAgent agent(agent_cfg(0.5), *task, shards[0]);
  LiveServer server(server_cfg(), ServerConfig{}, *task);
  const auto id = server.add_worker(agent.endpoint(), hint(1));
  auto first = std::async(std::launch::async, [&] { return server.request_training(id, 1); });
  std::this_thread::sleep_for(100ms);
  try {
    server.request_training(id, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::WorkerBusy);
  }
  EXPECT_EQ(first.get().local_epochs, 1u);
}

TEST_F(Fixture, WorkerRefusesUnknownServer) {
  WorkerAgent agent(agent_cfg(), *task, shards[0]);
  LiveServer owner(server_cfg(), ServerConfig{}, *task);
  owner.add_worker(agent.endpoint(), hint(1));
  LiveServer stranger(server_cfg(), ServerConfig{}, *task);
  const auto id = stranger.adopt_worker(agent.model_ref(), hint(1));
  try {
    stranger.request_training(id, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::Rejected);
    EXPECT_NE(std::string(e.what()).find("unrecognized-server"), std::string::npos);
  }
  EXPECT_EQ(agent.status(), AgentStatus::Idle);
}

TEST_F(Fixture, ShutdownReachesWorkers) {
  WorkerAgent agent(agent_cfg(), *task, shards[0]);
  LiveServer server(server_cfg(), ServerConfig{}, *task);
  server.add_worker(agent.endpoint(), hint(1));
  server.shutdown_workers();
  const auto until = std::chrono::steady_clock::now() + 3s;
  while (!agent.shutdown_requested() && std::chrono::steady_clock::now() < until) {
    std::this_thread::sleep_for(10ms);
  }
  EXPECT_TRUE(agent.shutdown_requested());
}

TEST(LiveRun, MatchesSimulationRoundForRound) {
  harness::Scenario s;
  s.name = "trio";
  s.total_rounds = 8;
  s.observe_alpha = 0.0;
  s.selector.kind = SelectorKind::RMinMax;
  s.partition = PartitionConfig{0, 3, {2, 3, 6}};
  s.workers.resize(3);
  s.calibration.t_onedata = 0.5;
  s.calibration.server_cpu_freq = s.workers[0].cpu_freq_hz;

  const auto sim = harness::run_sim(s);
  const auto live = harness::run_live(s, 0.01);
  ASSERT_EQ(live.rows.size(), sim.rows.size());
  for (std::size_t i = 0; i < sim.rows.size(); ++i) {
    const auto& a = sim.rows[i];
    const auto& b = live.rows[i];
    EXPECT_EQ(a.round, b.round);
    EXPECT_EQ(a.selected, b.selected) << "round " << a.round;
    EXPECT_EQ(a.aggregated, b.aggregated) << "round " << a.round;
    EXPECT_EQ(a.selector_state, b.selector_state) << "round " << a.round;
    EXPECT_DOUBLE_EQ(a.accuracy, b.accuracy) << "round " << a.round;
    EXPECT_EQ(sim.aggregated_ids[i], live.aggregated_ids[i]);
  }
  EXPECT_EQ(live.final_version, sim.final_version);
}

}  // namespace
}  // namespace fogfl
