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

// Training system: episode and policy servers, rollout workers, the
// training loop (sync and async), populations, PSRO and league pipelines,
// evaluation, and run-directory artifacts.

#ifndef PITCHLAB_ORCHESTRATOR_H_
#define PITCHLAB_ORCHESTRATOR_H_

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <stdexcept>
#include <stop_token>
#include <string>
#include <vector>

#include "pitchlab/common.h"
#include "pitchlab/game.h"
#include "pitchlab/learner.h"
#include "pitchlab/match_analysis.h"
#include "pitchlab/metagame.h"
#include "pitchlab/rewards.h"

namespace pitchlab {

// The trainer waited longer than its timeout for episodes.
class StarvationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ExecutionMode { kSync, kAsync };
ExecutionMode ParseExecutionMode(const std::string& s);
std::string_view ExecutionModeName(ExecutionMode mode);

// --- Environments ------------------------------------------------------------

// Either a zero-sum matrix game or a MiniPitch scenario. Matrix policies mix
// over rows when the game is symmetric (A = -A^T); otherwise a policy is a
// (row mix, column mix) pair stored back to back and plays both roles.
struct EnvSpec {
  enum class Kind { kMatrix, kMiniPitch };
  Kind kind = Kind::kMatrix;
  MatrixGame matrix;
  MiniPitchConfig pitch;

  // "rps" | "matrix:FILE" | "minipitch" | "minipitch:CFG".
  static EnvSpec Parse(const std::string& spec);
  static EnvSpec Matrix(MatrixGame game);
  static EnvSpec Pitch(MiniPitchConfig config);

  bool symmetric() const;
  int strategy_size() const;  // length of a matrix policy's mix
  std::string Fingerprint() const;
};

// --- Episode server ----------------------------------------------------------

struct BufferConfig {
  int capacity = 1024;
  int reuse_cap = 2;   // R
  int staleness = 4;   // V, in policy versions
  void Validate() const;
};

struct Episode {
  uint64_t id = 0;  // assigned by the server
  int worker = 0;
  long long ordinal = 0;
  int policy_version = 0;
  TeamId learner_team = TeamId::kLeft;
  std::string opponent_id;
  Replay replay;

  int transitions() const;
  int outcome() const;  // sign of the learner team's goal difference
};
using EpisodePtr = std::shared_ptr<const Episode>;

struct BufferAudit {
  long long pushed = 0;
  long long uses = 0;           // episode hand-outs to the trainer
  long long evicted_stale = 0;  // dropped before reaching the reuse cap
  long long stale_uses = 0;     // hand-outs older than V versions; must be 0
  int max_reuse = 0;
  std::map<uint64_t, int> use_counts;
};

// Bounded multi-producer / multi-consumer FIFO. Push blocks while full.
class EpisodeServer {
 public:
  explicit EpisodeServer(BufferConfig config);

  // False once closed; the episode is dropped.
  bool Push(Episode episode);
  // Sync: waits for exactly `n` episodes of `version` and removes them,
  // ordered by (worker, ordinal). Async: waits for `n` episodes of any
  // version within the staleness bound, hands out the oldest first and
  // re-queues them until they reach the reuse cap. Throws StarvationError
  // after `timeout`, and returns an empty batch once closed.
  std::vector<EpisodePtr> Take(size_t n, int version, ExecutionMode mode,
                               std::chrono::milliseconds timeout);
  void Close();
  bool closed() const;
  size_t size() const;
  BufferAudit Audit() const;

 private:
  struct Slot {
    EpisodePtr episode;
    int uses = 0;
  };
  void EvictStaleLocked(int version);

  BufferConfig config_;
  mutable std::mutex mu_;
  std::condition_variable not_full_;
  std::condition_variable not_empty_;
  std::deque<Slot> slots_;
  bool closed_ = false;
  uint64_t next_id_ = 0;
  BufferAudit audit_;
};

// --- Policy server -----------------------------------------------------------

struct PublishedPolicy {
  std::shared_ptr<const Policy> policy;
  int version = -1;  // server version, starts at 0
  double epsilon = 0.0;
};

class PolicyServer {
 public:
  int Publish(Policy policy, double epsilon);
  PublishedPolicy Latest() const;
  // Blocks until a version newer than `seen` exists; nullopt when closed or
  // stopped.
  std::optional<PublishedPolicy> WaitNewer(int seen, std::stop_token stop);
  void Close();

 private:
  mutable std::mutex mu_;
  std::condition_variable_any cv_;
  PublishedPolicy latest_;
  bool closed_ = false;
};

// --- Rollouts ----------------------------------------------------------------

struct OpponentMix {
  std::vector<std::shared_ptr<const Policy>> policies;
  std::vector<double> probabilities;

  static OpponentMix PointMass(std::shared_ptr<const Policy> policy);
  void Validate() const;
  const Policy& Sample(std::mt19937_64& rng) const;
};

struct RolloutTask {
  MiniPitchConfig env;
  OpponentMix opponents;
  long long episode_quota = 0;  // 0: until the buffer closes
  uint64_t seed = 0;
  std::chrono::microseconds step_latency{0};
};

// One episode; a pure function of (task seed, worker, ordinal, policy).
Episode PlayRolloutEpisode(const RolloutTask& task, int worker,
                           long long ordinal, const PublishedPolicy& learner,
                           std::stop_token stop = {});

// Plays episodes with the latest policy and pushes them. In sync mode the
// worker produces `per_version` episodes per published version and then
// waits for the next one. Returns the number of episodes pushed.
long long RunRolloutWorker(const RolloutTask& task, int worker,
                           PolicyServer& policies, EpisodeServer& episodes,
                           ExecutionMode mode, int per_version,
                           std::stop_token stop);

// --- Training loop -----------------------------------------------------------

struct StopCriterion {
  long long max_steps = 200000;  // learner samples, reuse included
  double target_win_rate = 0.95;
  int window = 100;              // trailing rollout episodes
  void Validate() const;
};

struct MetricRow {
  long long step = 0;
  double win_rate = 0.0;
  double wall_clock = 0.0;  // seconds since the loop started
};

struct TrainTask {
  MiniPitchConfig env;
  OpponentMix opponents;
  LearnerConfig learner;  // its step budget is replaced by stop.max_steps
  RewardConfig rewards = RewardConfig::Dense();
  StopCriterion stop;
  ExecutionMode mode = ExecutionMode::kSync;
  int workers = 1;
  int batch_episodes = 8;
  BufferConfig buffer;
  std::chrono::microseconds step_latency{0};
  std::chrono::milliseconds starvation_timeout{60000};
  uint64_t seed = 0;
  std::string policy_id = "br";
  std::shared_ptr<const Policy> prior;  // warm start
  void Validate() const;
};

struct TrainResult {
  Policy policy;
  long long samples = 0;
  long long updates = 0;
  long long episodes_produced = 0;
  long long episodes_trained = 0;  // distinct episodes
  bool reached_target = false;
  double wall_seconds = 0.0;  // until the stop criterion fired
  BufferAudit audit;
  std::vector<MetricRow> metrics;
  std::vector<std::string> opponent_log;  // one id per trained episode
};

TrainResult RunTrainingLoop(const TrainTask& task);

// --- Evaluation --------------------------------------------------------------

struct EvalResult {
  int episodes = 0;
  double win_rate = 0.0;
  double draw_rate = 0.0;
  double loss_rate = 0.0;
  double mean_goal_difference = 0.0;
  std::vector<double> goal_differences;  // from A's side
  std::vector<Replay> replays;           // MiniPitch, when requested
};

// `k` episodes, A on the left (row) for even episodes and on the right for
// odd ones; each pair shares its seed. Tabular policies act greedily.
EvalResult Evaluate(const EnvSpec& env, const Policy& a, const Policy& b,
                    int k, uint64_t seed, bool keep_replays = false);

struct CrossPlay {
  Matrix win;   // win[i][j]: i beats j
  Matrix draw;  // symmetric
};
CrossPlay CrossPlayMatrix(const EnvSpec& env,
                          const std::vector<const Policy*>& policies, int k,
                          uint64_t seed);
std::string CrossPlayCsv(const std::vector<std::string>& ids,
                         const CrossPlay& cp);

// Normalised style metrics of each policy from k MiniPitch episodes against
// every other policy (self-play for a single policy).
std::vector<StyleMetrics> StyleRadar(const MiniPitchConfig& env,
                                     const std::vector<const Policy*>& policies,
                                     int k, uint64_t seed);

// --- Populations and pipelines -----------------------------------------------

enum class MemberRole { kBuiltIn, kBestResponse, kMainAgent, kExploiter };
std::string_view RoleName(MemberRole role);
MemberRole ParseRole(const std::string& s);

struct PolicyHandle {
  std::string id;
  MemberRole role = MemberRole::kBuiltIn;
  int generation = 0;
  std::shared_ptr<const Policy> policy;
  std::vector<std::string> opponent_log;
};

// Ids unique; generations per role are 0, 1, 2, ... in insertion order.
class Population {
 public:
  Population();
  int Add(PolicyHandle handle);
  int size() const { return static_cast<int>(members_.size()); }
  const PolicyHandle& member(int i) const { return members_.at(i); }
  const std::vector<PolicyHandle>& members() const { return members_; }
  int IndexOf(const std::string& id) const;
  int NextGeneration(MemberRole role) const;
  PayoffTable& payoff() { return *payoff_; }
  const PayoffTable& payoff() const { return *payoff_; }

 private:
  std::vector<PolicyHandle> members_;
  std::shared_ptr<PayoffTable> payoff_;
};

struct PipelineConfig {
  int generations = 3;
  uint64_t seed = 0;
  ExecutionMode mode = ExecutionMode::kSync;
  int workers = 1;
  int batch_episodes = 8;
  BufferConfig buffer;
  StopCriterion stop;
  LearnerConfig learner;
  RewardConfig rewards = RewardConfig::Dense();
  int payoff_episodes = 50;  // k per new pair
  PayoffMetric metric = PayoffMetric::kWinRate;
  double nash_tol = 1e-3;
  long long nash_max_iterations = 1000000;
  std::chrono::microseconds step_latency{0};
  // MiniPitch: scripted policies seeding the population.
  std::vector<std::string> initial_scripts = {"builtin:0"};
  // Matrix games: pure row strategies seeding the population.
  std::vector<int> initial_actions = {0};
  int keep_replays = 1;  // replays kept per evaluated pair

  void Validate() const;
  // Keys: generations seed mode workers batch_episodes buffer.capacity
  // buffer.reuse buffer.staleness stop.max_steps stop.target_win_rate
  // stop.window payoff_episodes metric nash.tol nash.max_iterations
  // step_latency_ms initial initial_actions keep_replays, plus learner.* and
  // reward.* sections.
  static PipelineConfig FromKeyValues(const KeyValues& kv);
};

struct GenerationRecord {
  int generation = 0;
  std::vector<std::string> added;
  std::vector<std::string> support_ids;  // population used for the meta-solve
  std::vector<double> meta_strategy;
  double exploitability = 0.0;  // matrix games only, NaN otherwise
};

struct PipelineResult {
  Population population;
  std::vector<GenerationRecord> history;
  std::vector<MatchResult> match_log;
  std::vector<std::pair<std::string, MetricRow>> metrics;  // per trainee
  std::map<std::string, Replay> replays;                   // by match id
  NashResult final_nash;
  double final_exploitability = 0.0;  // matrix games only
  EloTable Elo() const;
};

// Starting population for an environment.
Population InitialPopulation(const EnvSpec& env, const PipelineConfig& config);

PipelineResult RunPsro(const EnvSpec& env, Population population,
                       const PipelineConfig& config);
// `main` warm-starts the first main agent; it is not added to the population.
PipelineResult RunLeague(const EnvSpec& env, Population population,
                         std::shared_ptr<const Policy> main,
                         const PipelineConfig& config);
// A single best response against the initial population's uniform mixture.
PipelineResult RunBestResponse(const EnvSpec& env, Population population,
                               const PipelineConfig& config);

// Exploitability of the population mixture in a matrix game.
double PopulationExploitability(const EnvSpec& env, const Population& pop,
                                const std::vector<double>& weights);

// --- Run directory -----------------------------------------------------------

// population.json, policies/, payoff.csv, elo.csv, nash.csv, metrics.csv,
// generations.csv and replays/.
void WriteRunDirectory(const std::string& dir, const EnvSpec& env,
                       const PipelineResult& result, PayoffMetric metric);
// Members and policies from population.json; the payoff table is not
// restored.
Population LoadPopulation(const std::string& dir);

}  // namespace pitchlab

#endif  // PITCHLAB_ORCHESTRATOR_H_
