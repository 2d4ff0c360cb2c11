// Copyright 2026 The Pitchlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pitchlab/orchestrator.h"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

#include "json.hpp"

namespace pitchlab {
namespace {

using std::chrono::milliseconds;

MiniPitchConfig Small() {
  MiniPitchConfig c;
  c.n_per_team = 1;
  c.max_steps = 50;
  return c;
}

std::shared_ptr<const Policy> Script(const std::string& s, const MiniPitchConfig& c = Small()) {
  return std::make_shared<Policy>(ScriptedPolicy(s, s, c.Fingerprint()));
}

Episode Fake(int version, int worker = 0, long long ordinal = 0) {
  Episode e;
  e.policy_version = version;
  e.worker = worker;
  e.ordinal = ordinal;
  return e;
}

PipelineConfig SmallPipeline() {
  PipelineConfig c;
  c.stop.max_steps = 3000;
  c.payoff_episodes = 4;
  c.batch_episodes = 4;
  c.initial_scripts = {"idle", "builtin:2"};
  return c;
}

TEST(EpisodeServerTest, SyncBatchIsOrderedAndConsumedOnce) {
  EpisodeServer s(BufferConfig{});
  s.Push(Fake(0, 1, 0));
  s.Push(Fake(0, 0, 1));
  s.Push(Fake(0, 0, 0));
  auto batch = s.Take(3, 0, ExecutionMode::kSync, milliseconds(100));
  ASSERT_EQ(batch.size(), 3u);
  EXPECT_EQ(batch[0]->worker, 0);
  EXPECT_EQ(batch[0]->ordinal, 0);
  EXPECT_EQ(batch[1]->ordinal, 1);
  EXPECT_EQ(batch[2]->worker, 1);
  EXPECT_EQ(s.size(), 0u);
  EXPECT_EQ(s.Audit().max_reuse, 1);
}

TEST(EpisodeServerTest, SyncDropsOlderVersions) {
  EpisodeServer s(BufferConfig{});
  s.Push(Fake(0));
  s.Push(Fake(1));
  auto batch = s.Take(1, 1, ExecutionMode::kSync, milliseconds(100));
  EXPECT_EQ(batch[0]->policy_version, 1);
  EXPECT_EQ(s.Audit().evicted_stale, 1);
}

TEST(EpisodeServerTest, AsyncReuseCap) {
  BufferConfig cfg;
  cfg.reuse_cap = 2;
  EpisodeServer s(cfg);
  for (int i = 0; i < 3; ++i) s.Push(Fake(0));
  for (int round = 0; round < 3; ++round) {
    auto b = s.Take(2, 0, ExecutionMode::kAsync, milliseconds(100));
    EXPECT_EQ(b.size(), 2u);
    EXPECT_NE(b[0]->id, b[1]->id);
  }
  // Six hand-outs of three episodes with cap two: all exhausted.
  EXPECT_EQ(s.size(), 0u);
  BufferAudit a = s.Audit();
  EXPECT_EQ(a.uses, 6);
  for (const auto& [id, n] : a.use_counts) EXPECT_EQ(n, 2);
}

TEST(EpisodeServerTest, AsyncEvictsStale) {
  BufferConfig cfg;
  cfg.staleness = 1;
  EpisodeServer s(cfg);
  s.Push(Fake(0));
  s.Push(Fake(2));
  s.Push(Fake(3));
  auto b = s.Take(2, 3, ExecutionMode::kAsync, milliseconds(100));
  for (const auto& e : b) EXPECT_GE(e->policy_version, 2);
  EXPECT_EQ(s.Audit().evicted_stale, 1);
  EXPECT_EQ(s.Audit().stale_uses, 0);
}

TEST(EpisodeServerTest, StarvationAndClose) {
  EpisodeServer s(BufferConfig{});
  EXPECT_THROW(s.Take(1, 0, ExecutionMode::kAsync, milliseconds(20)), StarvationError);
  EXPECT_THROW(s.Take(2000, 0, ExecutionMode::kAsync, milliseconds(20)), ConfigError);
  s.Close();
  EXPECT_FALSE(s.Push(Fake(0)));
  EXPECT_TRUE(s.Take(1, 0, ExecutionMode::kAsync, milliseconds(20)).empty());
}

TEST(EpisodeServerTest, PushBlocksWhenFull) {
  BufferConfig cfg;
  cfg.capacity = 1;
  cfg.reuse_cap = 1;
  EpisodeServer s(cfg);
  s.Push(Fake(0));
  std::atomic<bool> pushed{false};
  std::thread t([&] {
    s.Push(Fake(0));
    pushed = true;
  });
  std::this_thread::sleep_for(milliseconds(50));
  EXPECT_FALSE(pushed);
  s.Take(1, 0, ExecutionMode::kAsync, milliseconds(100));
  t.join();
  EXPECT_TRUE(pushed);
}

TEST(PolicyServerTest, VersionsAndWait) {
  PolicyServer s;
  EXPECT_EQ(s.Latest().version, -1);
  EXPECT_EQ(s.Publish(*Script("idle"), 0.1), 0);
  EXPECT_EQ(s.Publish(*Script("random"), 0.1), 1);
  auto p = s.WaitNewer(0, {});
  ASSERT_TRUE(p);
  EXPECT_EQ(p->policy->id, "random");
  s.Close();
  EXPECT_FALSE(s.WaitNewer(1, {}));
}

TEST(RolloutTest, QuotaAndDegenerateOpponent) {
  RolloutTask task{Small(), OpponentMix::PointMass(Script("builtin:0")), 10, 7, {}};
  PolicyServer ps;
  ps.Publish(*Script("random"), 0.0);
  EpisodeServer es(BufferConfig{});
  long long n = RunRolloutWorker(task, 0, ps, es, ExecutionMode::kAsync, 1, {});
  EXPECT_EQ(n, 10);
  EXPECT_EQ(es.Audit().pushed, 10);
  auto batch = es.Take(10, 0, ExecutionMode::kAsync, milliseconds(100));
  for (const auto& e : batch) EXPECT_EQ(e->opponent_id, "builtin:0");
}

TEST(RolloutTest, DeterministicPerWorkerAndOrdinal) {
  auto mix = OpponentMix{{Script("random"), Script("builtin:1")}, {0.5, 0.5}};
  RolloutTask task{Small(), mix, 0, 11, {}};
  PublishedPolicy pub{Script("random"), 0, 0.0};
  Episode a = PlayRolloutEpisode(task, 2, 5, pub);
  Episode b = PlayRolloutEpisode(task, 2, 5, pub);
  EXPECT_EQ(WriteReplay(a.replay), WriteReplay(b.replay));
  EXPECT_EQ(a.opponent_id, b.opponent_id);
  Episode c = PlayRolloutEpisode(task, 3, 5, pub);
  EXPECT_NE(WriteReplay(a.replay), WriteReplay(c.replay));
}

TEST(TrainingLoopTest, ZeroBudgetReturnsInitialPolicy) {
  TrainTask t;
  t.env = Small();
  t.opponents = OpponentMix::PointMass(Script("idle"));
  t.stop.max_steps = 0;
  t.prior = Script("shooter");
  EXPECT_EQ(RunTrainingLoop(t).policy.Serialize(), t.prior->Serialize());
  t.prior = nullptr;
  TrainResult r = RunTrainingLoop(t);
  EXPECT_EQ(r.policy.kind, PolicyKind::kTabular);
  EXPECT_EQ(r.samples, 0);
}

TEST(TrainingLoopTest, SyncUpdatesEqualEpisodesOverBatch) {
  TrainTask t;
  t.env = Small();
  t.opponents = OpponentMix::PointMass(Script("idle"));
  t.stop.max_steps = 4000;
  t.workers = 3;
  t.batch_episodes = 5;
  t.seed = 2;
  TrainResult r = RunTrainingLoop(t);
  EXPECT_GE(r.samples, 4000);
  EXPECT_EQ(r.episodes_trained, r.updates * t.batch_episodes);
  EXPECT_EQ(r.audit.max_reuse, 1);
  EXPECT_EQ(r.audit.stale_uses, 0);
  EXPECT_EQ(static_cast<long long>(r.opponent_log.size()), r.episodes_trained);
  EXPECT_EQ(r.metrics.size(), static_cast<size_t>(r.updates));
  for (size_t i = 1; i < r.metrics.size(); ++i) {
    EXPECT_GT(r.metrics[i].step, r.metrics[i - 1].step);
    EXPECT_GE(r.metrics[i].wall_clock, r.metrics[i - 1].wall_clock);
  }
}

TEST(TrainingLoopTest, SyncIsReproducible) {
  TrainTask t;
  t.env = Small();
  t.opponents = OpponentMix{{Script("random"), Script("builtin:2")}, {0.3, 0.7}};
  t.stop.max_steps = 3000;
  t.workers = 4;
  t.batch_episodes = 4;
  t.seed = 9;
  EXPECT_EQ(RunTrainingLoop(t).policy.Serialize(), RunTrainingLoop(t).policy.Serialize());
}

TEST(TrainingLoopTest, AsyncRespectsReuseAndStaleness) {
  TrainTask t;
  t.env = Small();
  t.opponents = OpponentMix::PointMass(Script("idle"));
  t.stop.max_steps = 8000;
  t.mode = ExecutionMode::kAsync;
  t.workers = 4;
  t.batch_episodes = 4;
  t.buffer.reuse_cap = 2;
  t.buffer.staleness = 4;
  t.step_latency = std::chrono::microseconds(200);
  t.seed = 4;
  TrainResult r = RunTrainingLoop(t);
  EXPECT_GE(r.samples, 8000);
  EXPECT_LE(r.audit.max_reuse, 2);
  EXPECT_EQ(r.audit.stale_uses, 0);
  long long uses = 0;
  for (const auto& [id, n] : r.audit.use_counts) {
    EXPECT_LE(n, 2);
    uses += n;
  }
  EXPECT_EQ(uses, r.updates * t.batch_episodes);
}

TEST(TrainingLoopTest, StopsAtTargetWinRate) {
  TrainTask t;
  MiniPitchConfig env = Small();
  env.max_steps = 100;
  t.env = env;
  t.opponents = OpponentMix::PointMass(Script("idle", env));
  t.stop.max_steps = 2000000;
  t.stop.window = 20;
  t.stop.target_win_rate = 0.5;
  t.seed = 1;
  TrainResult r = RunTrainingLoop(t);
  EXPECT_TRUE(r.reached_target);
  EXPECT_LT(r.samples, t.stop.max_steps);
  EXPECT_GE(r.metrics.back().win_rate, 0.5);
}

TEST(TrainingLoopTest, Validation) {
  TrainTask t;
  t.env = Small();
  EXPECT_THROW(RunTrainingLoop(t), ConfigError);  // no opponents
  t.opponents = OpponentMix::PointMass(Script("idle"));
  t.workers = 0;
  EXPECT_THROW(RunTrainingLoop(t), ConfigError);
  t.workers = 1;
  t.stop.window = 0;
  EXPECT_THROW(RunTrainingLoop(t), ConfigError);
}

TEST(EvaluateTest, IdenticalPoliciesCancel) {
  EnvSpec env = EnvSpec::Pitch(Small());
  auto p = Script("builtin:0");
  EvalResult r = Evaluate(env, *p, *p, 20, 3);
  EXPECT_EQ(r.mean_goal_difference, 0.0);
  EXPECT_EQ(r.win_rate, r.loss_rate);
  EXPECT_DOUBLE_EQ(r.win_rate + r.draw_rate + r.loss_rate, 1.0);
}

TEST(EvaluateTest, ShooterBeatsIdle) {
  MiniPitchConfig c = Small();
  c.max_steps = 100;
  EnvSpec env = EnvSpec::Pitch(c);
  EvalResult r = Evaluate(env, *Script("shooter", c), *Script("idle", c), 20, 5);
  EXPECT_EQ(r.win_rate, 1.0);
  EXPECT_GT(r.mean_goal_difference, 0.0);
}

TEST(EvaluateTest, MatrixAndErrors) {
  EnvSpec env = EnvSpec::Parse("rps");
  Policy rock = MixedPolicy("r", {1, 0, 0}, env.Fingerprint());
  Policy scissors = MixedPolicy("s", {0, 0, 1}, env.Fingerprint());
  EvalResult r = Evaluate(env, rock, scissors, 6, 1);
  EXPECT_EQ(r.win_rate, 1.0);
  EXPECT_THROW(Evaluate(env, rock, scissors, 0, 1), ConfigError);
  Policy bad = MixedPolicy("b", {0.5, 0.5}, env.Fingerprint());
  EXPECT_THROW(Evaluate(env, rock, bad, 2, 1), ConfigError);
}

TEST(CrossPlayTest, WinDrawIdentity) {
  MiniPitchConfig c = Small();
  EnvSpec env = EnvSpec::Pitch(c);
  auto a = Script("shooter"), b = Script("builtin:1"), d = Script("idle");
  CrossPlay cp = CrossPlayMatrix(env, {a.get(), b.get(), d.get()}, 10, 2);
  for (int i = 0; i < 3; ++i) {
    double row = 0;
    for (int j = 0; j < 3; ++j) {
      EXPECT_DOUBLE_EQ(cp.win[i][j] + cp.win[j][i] + cp.draw[i][j], 1.0);
      EXPECT_EQ(cp.draw[i][j], cp.draw[j][i]);
      row += cp.win[i][j];
    }
    EXPECT_LE(row, 3.0);
  }
  std::string csv = CrossPlayCsv({"a", "b", "d"}, cp);
  EXPECT_EQ(csv.substr(0, 19), "matrix,policy,a,b,d");
}

TEST(CrossPlayTest, CopiesOfOnePolicyAreSymmetric) {
  EnvSpec env = EnvSpec::Pitch(Small());
  auto a = Script("builtin:0");
  CrossPlay cp = CrossPlayMatrix(env, {a.get(), a.get()}, 10, 4);
  EXPECT_EQ(cp.win[0][1], cp.win[1][0]);
}

TEST(StyleRadarTest, RangeAndConstantRule) {
  MiniPitchConfig c = Small();
  auto a = Script("builtin:0"), b = Script("idle"), s = Script("shooter");
  for (const auto& m : StyleRadar(c, {a.get(), b.get(), s.get()}, 4, 1))
    for (double v : m) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  for (const auto& m : StyleRadar(c, {a.get(), a.get()}, 4, 1))
    for (double v : m) EXPECT_EQ(v, 0.5);
}

TEST(PopulationTest, Invariants) {
  Population pop;
  pop.Add({"a", MemberRole::kBuiltIn, 0, Script("idle"), {}});
  EXPECT_THROW(pop.Add({"a", MemberRole::kBuiltIn, 1, Script("idle"), {}}), ConfigError);
  EXPECT_THROW(pop.Add({"b", MemberRole::kBuiltIn, 2, Script("idle"), {}}), ConfigError);
  EXPECT_THROW(pop.Add({"c", MemberRole::kBuiltIn, 1, nullptr, {}}), ConfigError);
  pop.Add({"b", MemberRole::kExploiter, 0, Script("idle"), {}});
  EXPECT_EQ(pop.NextGeneration(MemberRole::kExploiter), 1);
  EXPECT_EQ(pop.payoff().size(), 2);
  EXPECT_EQ(ParseRole("main"), MemberRole::kMainAgent);
  EXPECT_THROW(ParseRole("coach"), ConfigError);
}

TEST(PsroTest, RockPaperScissorsThreeSeeds) {
  PipelineConfig c;
  c.generations = 5;
  c.initial_actions = {0, 1, 2};
  EnvSpec env = EnvSpec::Parse("rps");
  PipelineResult r = RunPsro(env, InitialPopulation(env, c), c);
  EXPECT_EQ(r.population.size(), 8);
  EXPECT_LT(r.final_exploitability, 0.05);
}

TEST(PsroTest, ZeroGenerationsLeavesPopulation) {
  PipelineConfig c;
  c.generations = 0;
  EnvSpec env = EnvSpec::Parse("rps");
  PipelineResult r = RunPsro(env, InitialPopulation(env, c), c);
  EXPECT_EQ(r.population.size(), 1);
  EXPECT_TRUE(r.history.empty());
}

TEST(PsroTest, NonSymmetricMatrix) {
  PipelineConfig c;
  c.generations = 8;
  EnvSpec env = EnvSpec::Matrix(MatrixGame({{0, 2}, {1, 0}}));
  EXPECT_FALSE(env.symmetric());
  EXPECT_EQ(env.strategy_size(), 4);
  PipelineResult r = RunPsro(env, InitialPopulation(env, c), c);
  EXPECT_LT(r.final_exploitability, 0.05);
  Matrix m = r.population.payoff().Payoffs(PayoffMetric::kWinRate);
  for (size_t i = 0; i < m.size(); ++i)
    for (size_t j = 0; j < m.size(); ++j) EXPECT_EQ(m[i][j], -m[j][i]);
}

TEST(PsroTest, MiniPitchAntisymmetricAndReproducible) {
  PipelineConfig c = SmallPipeline();
  c.generations = 2;
  c.seed = 3;
  c.workers = 2;
  EnvSpec env = EnvSpec::Pitch(Small());
  PipelineResult a = RunPsro(env, InitialPopulation(env, c), c);
  PipelineResult b = RunPsro(env, InitialPopulation(env, c), c);
  EXPECT_EQ(a.population.payoff().ids(), b.population.payoff().ids());
  EXPECT_EQ(a.population.payoff().ToCsv(PayoffMetric::kWinRate),
            b.population.payoff().ToCsv(PayoffMetric::kWinRate));
  EXPECT_EQ(a.final_nash.row, b.final_nash.row);
  for (auto metric : {PayoffMetric::kWinRate, PayoffMetric::kGoalDifference}) {
    Matrix m = a.population.payoff().Payoffs(metric);
    for (size_t i = 0; i < m.size(); ++i)
      for (size_t j = 0; j < m.size(); ++j) EXPECT_EQ(m[i][j], -m[j][i]);
  }
  ASSERT_EQ(a.history.size(), 2u);
  EXPECT_EQ(a.history[1].support_ids.size(), 3u);
  // Warm start: the second BR continues from the first.
  EXPECT_EQ(a.population.member(3).policy->version, 2);
}

TEST(LeagueTest, StructureAndExploiterOpponents) {
  PipelineConfig c = SmallPipeline();
  c.generations = 1;
  EnvSpec env = EnvSpec::Pitch(Small());
  Population init = InitialPopulation(env, c);
  PipelineResult r = RunLeague(env, std::move(init), nullptr, c);
  ASSERT_EQ(r.population.size(), 4);
  const auto& exploiter = r.population.member(3);
  EXPECT_EQ(exploiter.role, MemberRole::kExploiter);
  ASSERT_FALSE(exploiter.opponent_log.empty());
  for (const auto& id : exploiter.opponent_log) EXPECT_EQ(id, "main_0");
  EXPECT_EQ(r.population.member(2).role, MemberRole::kMainAgent);
}

TEST(LeagueTest, PfspIgnoresMembersBeatenEveryTime) {
  PipelineConfig c;
  c.generations = 3;
  c.initial_actions = {0, 1, 2};
  EnvSpec env = EnvSpec::Parse("rps");
  PipelineResult r = RunLeague(env, InitialPopulation(env, c), nullptr, c);
  EXPECT_EQ(r.population.size(), 9);
  // From the second generation on the weights come from the previous main.
  for (size_t g = 1; g < r.history.size(); ++g) {
    const auto& h = r.history[g];
    int prev = r.population.IndexOf("main_" + std::to_string(g - 1));
    for (size_t i = 0; i < h.support_ids.size(); ++i) {
      PayoffEntry e = r.population.payoff().entry(prev, static_cast<int>(i));
      if (static_cast<int>(i) != prev && e.games > 0 && e.wins == e.games) {
        EXPECT_EQ(h.meta_strategy[i], 0.0) << h.support_ids[i];
      }
    }
  }
  for (const auto& m : r.population.members()) {
    if (m.role != MemberRole::kExploiter) continue;
    std::string main = "main_" + std::to_string(m.generation);
    EXPECT_EQ(m.opponent_log, std::vector<std::string>{main});
  }
}

TEST(RunDirectoryTest, WriteAndLoad) {
  namespace fs = std::filesystem;
  PipelineConfig c = SmallPipeline();
  c.generations = 1;
  EnvSpec env = EnvSpec::Pitch(Small());
  PipelineResult r = RunPsro(env, InitialPopulation(env, c), c);
  fs::path dir = fs::temp_directory_path() / "pitchlab_rundir_test";
  fs::remove_all(dir);
  WriteRunDirectory(dir.string(), env, r, PayoffMetric::kWinRate);
  for (const char* f : {"population.json", "payoff.csv", "elo.csv", "nash.csv", "metrics.csv",
                        "generations.csv"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  EXPECT_FALSE(fs::is_empty(dir / "replays"));
  for (const auto& entry : fs::directory_iterator(dir / "replays"))
    EXPECT_NO_THROW(ReadReplayFile(entry.path().string()));
  std::ifstream m(dir / "metrics.csv");
  std::string header;
  std::getline(m, header);
  EXPECT_EQ(header, "policy,step,win_rate,wall_clock");
  Population back = LoadPopulation(dir.string());
  ASSERT_EQ(back.size(), r.population.size());
  for (int i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back.member(i).id, r.population.member(i).id);
    EXPECT_EQ(back.member(i).policy->Serialize(), r.population.member(i).policy->Serialize());
  }
  fs::remove_all(dir);
}

TEST(PipelineConfigTest, KeyValues) {
  KeyValues kv = ParseKeyValues(
      "generations=4\nmode=async\nworkers=8\nbuffer.reuse=3\nstep_latency_ms=10\n"
      "initial=builtin:0,random\nlearner.learning_rate=0.2\nreward.scheme=sparse\n");
  PipelineConfig c = PipelineConfig::FromKeyValues(kv);
  EXPECT_EQ(c.generations, 4);
  EXPECT_EQ(c.mode, ExecutionMode::kAsync);
  EXPECT_EQ(c.workers, 8);
  EXPECT_EQ(c.buffer.reuse_cap, 3);
  EXPECT_EQ(c.step_latency, std::chrono::microseconds(10000));
  EXPECT_EQ(c.initial_scripts, (std::vector<std::string>{"builtin:0", "random"}));
  EXPECT_DOUBLE_EQ(c.learner.learning_rate, 0.2);
  EXPECT_EQ(c.rewards.scheme, RewardScheme::kSparse);
  EXPECT_THROW(PipelineConfig::FromKeyValues(ParseKeyValues("bogus=1\n")), ConfigError);
  EXPECT_THROW(PipelineConfig::FromKeyValues(ParseKeyValues("mode=fast\n")), ConfigError);
  EXPECT_THROW(PipelineConfig::FromKeyValues(ParseKeyValues("workers=0\n")), ConfigError);
}

TEST(EnvSpecTest, Parse) {
  EXPECT_TRUE(EnvSpec::Parse("rps").symmetric());
  EnvSpec p = EnvSpec::Parse("minipitch:n_per_team=2,max_steps=60");
  EXPECT_EQ(p.kind, EnvSpec::Kind::kMiniPitch);
  EXPECT_EQ(p.pitch.n_per_team, 2);
  EXPECT_EQ(p.pitch.max_steps, 60);
  EXPECT_THROW(EnvSpec::Parse("chess"), ConfigError);
  EXPECT_THROW(EnvSpec::Parse("minipitch:/no/such/file"), ConfigError);
}

}  // namespace
}  // namespace pitchlab
