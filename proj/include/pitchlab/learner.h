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

// Policies and best-response oracles: exact best responses for matrix games,
// scripted MiniPitch teams, and tabular Q-learning over a discretised state.

#ifndef PITCHLAB_LEARNER_H_
#define PITCHLAB_LEARNER_H_

#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "pitchlab/features.h"
#include "pitchlab/game.h"
#include "pitchlab/match_analysis.h"
#include "pitchlab/rewards.h"

namespace pitchlab {

using ActionValues = std::array<double, kActionCount>;
using QTable = std::unordered_map<uint64_t, ActionValues>;

enum class PolicyKind { kScripted, kTabular, kMatrixMixed };
std::string_view PolicyKindName(PolicyKind kind);

// Immutable once published; tables are shared between snapshots.
struct Policy {
  std::string id;
  PolicyKind kind = PolicyKind::kScripted;
  int version = 0;
  std::string env_fingerprint;
  // Scripted: idle | random | shooter | builtin:<reaction delay 0..2>.
  std::string script = "idle";
  std::vector<double> mix;  // MatrixMixed: distribution over row actions
  bool parameter_sharing = true;
  // One table when sharing, else one per agent.
  std::vector<std::shared_ptr<const QTable>> tables;

  void Validate() const;
  std::string Serialize() const;
  static Policy Deserialize(std::string_view text);
};

Policy ScriptedPolicy(const std::string& id, const std::string& script,
                      const std::string& env_fingerprint);
Policy MixedPolicy(const std::string& id, std::vector<double> mix,
                   const std::string& env_fingerprint);

// Pure best response to a column mixture, lowest row index on ties.
int BestResponseRow(const MatrixGame& game, const std::vector<double>& col_mix);
Policy BestResponseExact(const MatrixGame& game,
                         const std::vector<double>& col_mix,
                         const std::string& id = "br");
// Expected row payoff of `row_mix` against `col_mix`.
double MixedValue(const MatrixGame& game, const std::vector<double>& row_mix,
                  const std::vector<double>& col_mix);

// Coarse state key: own cell, ball holder category, clamped ball and nearest
// opponent offsets, game mode, keeper alignment, and the agent id when
// parameters are shared.
uint64_t StateKey(const RawObservation& obs, TeamId team, int agent,
                  bool with_identity);

// Epsilon-greedy over masked-in actions. Ties go to the lowest index; with
// probability epsilon the action is uniform over the masked-in set.
int Act(const ActionValues& values, const ActionMask& mask, double epsilon,
        std::mt19937_64& rng);
int Act(const Policy& policy, const RawObservation& obs, TeamId team,
        int agent, double epsilon, std::mt19937_64& rng);

// One-step Q-learning backup; `next_mask` restricts the max.
void QUpdate(QTable& table, uint64_t key, int action, double reward,
             uint64_t next_key, const ActionMask& next_mask, bool terminal,
             double learning_rate, double gamma);

struct LearnerConfig {
  double learning_rate = 0.1;
  double epsilon_start = 0.2;
  double epsilon_end = 0.02;
  double gamma = 0.99;
  bool parameter_sharing = true;
  long long step_budget = 200000;

  void Validate() const;
  // Linear decay over the budget.
  double EpsilonAt(long long steps_done) const;
  static LearnerConfig FromKeyValues(const KeyValues& kv);
};

// Drives one team of MiniPitch agents from its own observation stream.
class TeamController {
 public:
  virtual ~TeamController() = default;
  virtual std::vector<int> Act(const RawObservation& world, TeamId team) = 0;
};

// `epsilon` only affects tabular policies.
std::unique_ptr<TeamController> MakeController(const Policy& policy,
                                               int n_per_team, uint64_t seed,
                                               double epsilon = 0.0);

// Plays one episode to the end; the last record holds the terminal state.
// Per-record rewards are the SCORING stream.
Replay PlayEpisode(const MiniPitchConfig& config, uint64_t seed,
                   TeamController& left, TeamController& right,
                   const std::string& left_id, const std::string& right_id,
                   const std::function<void()>& on_step = nullptr);

// Mutable tabular learner; Snapshot() publishes an immutable Policy.
class TabularLearner {
 public:
  TabularLearner(LearnerConfig config, int n_per_team,
                 const Policy* prior = nullptr);

  // Q updates for every agent of `team` over one finished episode, in
  // reverse time order. Returns the number of transitions consumed.
  int TrainOnEpisode(const Replay& replay, TeamId team,
                     const RewardConfig& rewards);
  Policy Snapshot(const std::string& id, const std::string& env_fingerprint);
  // Acts from the live tables; must not outlive the learner or run
  // concurrently with training.
  std::unique_ptr<TeamController> Controller(uint64_t seed,
                                             double epsilon) const;

  long long steps() const { return steps_; }
  int version() const { return version_; }
  double epsilon() const { return config_.EpsilonAt(steps_); }
  const LearnerConfig& config() const { return config_; }

 private:
  QTable& table(int agent) { return tables_[config_.parameter_sharing ? 0 : agent]; }

  LearnerConfig config_;
  int n_;
  int version_ = 0;
  long long steps_ = 0;
  std::vector<QTable> tables_;
};

// Samples a fresh opponent per episode.
using OpponentSampler = std::function<const Policy&(std::mt19937_64&)>;

struct BestResponseResult {
  Policy policy;
  long long steps = 0;
  int episodes = 0;
  std::vector<double> episode_outcomes;  // +1 win, 0 draw, -1 loss
};

// Single-threaded oracle. The learner side alternates per episode. With a
// zero budget the prior is returned unchanged.
BestResponseResult TrainBestResponse(const MiniPitchConfig& env,
                                     const OpponentSampler& opponents,
                                     const LearnerConfig& config,
                                     const RewardConfig& rewards,
                                     const Policy* prior, const std::string& id,
                                     uint64_t seed);

}  // namespace pitchlab

#endif  // PITCHLAB_LEARNER_H_
