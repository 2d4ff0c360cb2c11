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

// Replays and the match decomposition tree.
//
// A match splits into subgames at every score change; a subgame splits into
// chains whenever the ball moves to the other team; a chain is a sequence of
// nodes, one per uninterrupted possession by a single player. While a pass
// travels the passer keeps the ball, so passes show up as node transitions
// and interceptions as chain transitions.

#ifndef PITCHLAB_MATCH_ANALYSIS_H_
#define PITCHLAB_MATCH_ANALYSIS_H_

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "pitchlab/game.h"

namespace pitchlab {

inline constexpr int kReplayFormatVersion = 1;

struct ReplayHeader {
  int version = kReplayFormatVersion;
  std::string env_fingerprint;
  std::array<std::string, 2> policy_ids;  // left team, right team
  uint64_t seed = 0;
  std::string config_hash;
  int width = 12;
  int height = 8;
  int n_per_team = 1;
  bool keepers = true;
  friend bool operator==(const ReplayHeader&, const ReplayHeader&) = default;
};

// Record t holds the state before step t, the joint action taken from it,
// the per-team reward of that transition and the events it produced. The
// final record of a finished episode holds the terminal state with no
// actions.
struct StepRecord {
  RawObservation state;
  JointAction actions;
  std::array<double, 2> reward{0.0, 0.0};
  std::vector<Event> events;
  friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

struct Replay {
  ReplayHeader header;
  std::vector<StepRecord> steps;
  friend bool operator==(const Replay&, const Replay&) = default;
};

std::string ConfigHash(const MiniPitchConfig& config);
ReplayHeader MakeReplayHeader(const MiniPitchConfig& config, uint64_t seed,
                              const std::string& left_policy,
                              const std::string& right_policy);

// Line-delimited JSON: one header line, then one line per record with a
// fixed field order.
std::string WriteReplay(const Replay& replay);
// Throws ParseError (with the 1-based line number) on malformed input. When
// `expected` is given, a header whose config hash differs is refused.
Replay ReadReplay(std::string_view text,
                  const MiniPitchConfig* expected = nullptr);
void WriteReplayFile(const Replay& replay, const std::string& path);
Replay ReadReplayFile(const std::string& path,
                      const MiniPitchConfig* expected = nullptr);

struct Node {
  TeamId team = TeamId::kNone;
  int player = -1;
  int start = 0;  // first record index, inclusive
  int end = 0;    // last record index, inclusive
  friend bool operator==(const Node&, const Node&) = default;
};

struct Chain {
  TeamId team = TeamId::kNone;
  std::vector<Node> nodes;
};

struct Subgame {
  int start = 0;
  int end = 0;
  TeamId scoring_team = TeamId::kNone;  // None if no goal ends the subgame
  std::vector<Chain> chains;
};

struct MatchDecomposition {
  std::vector<Subgame> subgames;
};

// Effective ball holder of a record: the owner, or the passer while a pass
// is unresolved. Returns {kNone, -1} for a loose ball.
std::pair<TeamId, int> EffectiveOwner(const RawObservation& state);

MatchDecomposition Decompose(const Replay& replay);

enum class MatchEventKind { kPass, kPassFailed, kIntercept, kAssist, kGoal, kShot };

struct MatchEvent {
  MatchEventKind kind;
  int step;  // record index at which the event is credited
  TeamId team;
  int player;
  int other_player = -1;
};

struct EventCounts {
  std::array<int, 2> passes{};
  std::array<int, 2> intercepts{};
  std::array<int, 2> assists{};
  std::array<int, 2> shots{};
  std::array<int, 2> goals{};
  std::array<int, 2> possession_steps{};
  friend bool operator==(const EventCounts&, const EventCounts&) = default;
};

struct MatchEvents {
  EventCounts counts;
  std::vector<MatchEvent> events;
};

MatchEvents DetectEvents(const Replay& replay,
                         const MatchDecomposition& decomposition);

// Human-readable tree dump, one line per subgame/chain/node.
std::string DumpDecomposition(const MatchDecomposition& decomposition);
std::string EventCountsCsv(const EventCounts& counts);

// Raw per-policy style metrics, in this order.
inline constexpr std::array<std::string_view, 7> kStyleMetricNames = {
    "win_rate",         "goals_per_match",      "passes_per_match",
    "assists_per_match", "intercepts_per_match", "possession_fraction",
    "mean_chain_length"};
using StyleMetrics = std::array<double, kStyleMetricNames.size()>;

// Accumulates one team's view of many replays into style metrics.
class StyleAccumulator {
 public:
  void Add(const Replay& replay, TeamId team);
  StyleMetrics Metrics() const;
  int matches() const { return matches_; }

 private:
  int matches_ = 0;
  double wins_ = 0;
  double goals_ = 0, passes_ = 0, assists_ = 0, intercepts_ = 0;
  double own_possession_ = 0, all_possession_ = 0;
  double chain_nodes_ = 0, chains_ = 0;
};

// Min-max normalisation per metric across the population; a metric that is
// constant across the population maps to 0.5 for everyone.
std::vector<StyleMetrics> NormalizeStyles(const std::vector<StyleMetrics>& raw);
std::string StyleRadarCsv(const std::vector<std::string>& ids,
                          const std::vector<StyleMetrics>& normalized);

}  // namespace pitchlab

#endif  // PITCHLAB_MATCH_ANALYSIS_H_
