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

// Reward schemes as stream transforms over a finished episode. Streams are
// indexed by transition: entry t rewards the step from record t to t + 1.

#ifndef PITCHLAB_REWARDS_H_
#define PITCHLAB_REWARDS_H_

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "pitchlab/game.h"
#include "pitchlab/match_analysis.h"

namespace pitchlab {

enum class RewardScheme { kSparse, kDense, kComposite };

// Component names accepted in a composite scheme.
inline constexpr std::array<std::string_view, 8> kRewardComponents = {
    "scoring",  "checkpoint", "ball_player_distance", "goal_difference",
    "possession", "role_scoring", "passing",            "assist"};

struct RoleWeights {
  double scored = 1.0;
  double conceded = 1.0;
};

struct RewardConfig {
  RewardScheme scheme = RewardScheme::kSparse;
  std::vector<std::pair<std::string, double>> components;  // composite only
  std::array<RoleWeights, kRoleCount> role_weights = DefaultRoleWeights();
  int checkpoint_count = 10;
  double checkpoint_value = 0.1;

  static std::array<RoleWeights, kRoleCount> DefaultRoleWeights();
  static RewardConfig Sparse();
  static RewardConfig Dense();
  // SCORING + 0.1 * ball-player distance + terminal goal difference.
  static RewardConfig PressureComposite();
  // Role-based SCORING + 0.3 * assist.
  static RewardConfig RoleAssistComposite();

  void Validate() const;
  // Keys: scheme (sparse|dense|composite|pressure|role_assist),
  // components ("name:coef,name:coef"), checkpoint_count, checkpoint_value,
  // role.<gk|def|mid|fwd>.<scored|conceded>.
  static RewardConfig FromKeyValues(const KeyValues& kv);
  // The (name, coefficient) list the scheme expands to.
  std::vector<std::pair<std::string, double>> Expanded() const;
};

// Per-step SCORING from one step's events: +1 own goal, -1 conceded.
double ScoringReward(const std::vector<Event>& events, TeamId team);

// Team-level streams.
std::vector<double> ScoringStream(const Replay& replay, TeamId team);
std::vector<double> CheckpointStream(const Replay& replay, TeamId team,
                                     const RewardConfig& config);

// Per-agent streams of one component: [agent][transition].
using AgentStreams = std::vector<std::vector<double>>;

struct RewardBreakdown {
  std::vector<std::string> names;
  std::vector<AgentStreams> components;  // unweighted, same order as names
  std::vector<double> coefficients;
  AgentStreams total;
};

// `events` may carry a precomputed detection for the replay.
RewardBreakdown ComputeRewards(const Replay& replay, TeamId team,
                               const RewardConfig& config,
                               const MatchEvents* events = nullptr);

int TransitionCount(const Replay& replay);

}  // namespace pitchlab

#endif  // PITCHLAB_REWARDS_H_
