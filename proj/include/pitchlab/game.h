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

// Markov-game abstraction and the two built-in environments: zero-sum matrix
// games and MiniPitch, a deterministic gridworld football game that emits
// football-style raw observations.

#ifndef PITCHLAB_GAME_H_
#define PITCHLAB_GAME_H_

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pitchlab/common.h"

namespace pitchlab {

// The default 19-action football set, in its canonical order.
enum class Action : int {
  kIdle = 0,
  kLeft,
  kTopLeft,
  kTop,
  kTopRight,
  kRight,
  kBottomRight,
  kBottom,
  kBottomLeft,
  kLongPass,
  kHighPass,
  kShortPass,
  kShot,
  kSprint,
  kReleaseDirection,
  kReleaseSprint,
  kSliding,
  kDribble,
  kReleaseDribble,
};
inline constexpr int kActionCount = 19;

std::string_view ActionName(int action);
bool IsMoveAction(int action);
bool IsPassAction(int action);

enum class GameMode : int { kNormal = 0, kKickOff, kFreeKick, kCorner, kPenalty };
inline constexpr int kGameModeCount = 5;
std::string_view GameModeName(GameMode mode);
GameMode GameModeFromName(std::string_view name);

enum class TeamId : int { kNone = -1, kLeft = 0, kRight = 1 };
inline TeamId Opponent(TeamId t) {
  return t == TeamId::kLeft    ? TeamId::kRight
         : t == TeamId::kRight ? TeamId::kLeft
                               : TeamId::kNone;
}
inline int Index(TeamId t) { return static_cast<int>(t); }

enum class Role : int { kGoalkeeper = 0, kDefender, kMidfielder, kForward };
inline constexpr int kRoleCount = 4;
std::string_view RoleName(Role role);
Role RoleFromName(std::string_view name);

struct GridVec {
  int x = 0;
  int y = 0;
  friend bool operator==(const GridVec&, const GridVec&) = default;
};

struct PlayerState {
  GridVec position;
  GridVec direction;
  Role role = Role::kMidfielder;
  bool tired = false;
  int speed = 0;  // cells moved during the last step
  bool dribbling = false;
  friend bool operator==(const PlayerState&, const PlayerState&) = default;
};

struct BallState {
  GridVec position;
  GridVec direction;
  bool high = false;
  int speed = 0;
  TeamId owned_team = TeamId::kNone;
  int owned_player = -1;
  // Last passer while the ball travels after a pass and nobody has gained
  // it yet. Analytics attribute these steps to the passer.
  TeamId pass_team = TeamId::kNone;
  int pass_player = -1;
  friend bool operator==(const BallState&, const BallState&) = default;
};

// Raw game state. Team identities are stable for the whole episode: `left`
// is the team that started on the left side. Positions are world
// coordinates; after a halftime swap `sides_swapped` is set and the left
// team attacks towards x = 0.
struct RawObservation {
  int width = 0;
  int height = 0;
  int step_index = 0;
  int steps_left = 0;
  std::array<int, 2> score{0, 0};
  GameMode game_mode = GameMode::kNormal;
  bool sides_swapped = false;
  BallState ball;
  std::vector<PlayerState> left;
  std::vector<PlayerState> right;
  // Environment-controlled goalkeepers, one per team (empty if disabled).
  std::vector<PlayerState> keepers;

  const std::vector<PlayerState>& team(TeamId t) const {
    return t == TeamId::kLeft ? left : right;
  }
  std::vector<PlayerState>& team(TeamId t) {
    return t == TeamId::kLeft ? left : right;
  }
  friend bool operator==(const RawObservation&, const RawObservation&) =
      default;
};

// True if `team` attacks towards x = width in the observation's frame.
inline bool AttacksRight(const RawObservation& obs, TeamId team) {
  return (team == TeamId::kLeft) != obs.sides_swapped;
}

// Reflects positions and directions across the vertical centre line
// (x -> width - 1 - x, dx -> -dx). Team labels are untouched.
RawObservation Reflect(const RawObservation& obs);
// Exchanges the two teams' labels (lists, score, ball ownership).
RawObservation SwapTeams(const RawObservation& obs);
// Full left/right mirror: the right team's view as if it were the left team.
RawObservation Mirror(const RawObservation& obs);
// The observation as presented to `team`: that team is `left` and attacks
// towards x = width.
RawObservation TeamView(const RawObservation& world, TeamId team);

struct MarkovGameSpec {
  int n_agents_per_team = 1;
  int action_count_per_agent = kActionCount;
  double gamma = 0.99;
  int horizon = 400;
  static constexpr int kTeamCount = 2;

  void Validate() const;
};

struct MiniPitchConfig {
  int width = 12;
  int height = 8;
  int n_per_team = 3;
  int max_steps = 400;
  bool academy_mode = false;
  bool halftime_swap = false;
  bool keepers = true;
  uint64_t seed = 0;

  void Validate() const;
  // Stable identifier of the game rules; seeds are excluded.
  std::string Fingerprint() const;
  std::string ToKeyValues() const;
  static MiniPitchConfig FromKeyValues(const KeyValues& kv);
  MarkovGameSpec Spec(double gamma = 0.99) const;
};

// Geometry shared by the environment, the feature encoders and the masks.
// All helpers take team-frame coordinates (attacking towards x = width).
struct PitchGeometry {
  int width;
  int height;
  static constexpr int kPenaltyDepth = 2;

  int goal_row_low() const { return height / 2 - 1; }
  int goal_row_high() const { return height / 2; }
  bool InBounds(GridVec p) const {
    return p.x >= 0 && p.x < width && p.y >= 0 && p.y < height;
  }
  // Chebyshev distance to the nearest cell of the goal at x = width.
  int ShotDistance(GridVec p) const;
  bool InOpponentPenaltyArea(GridVec p) const;
  bool InOwnPenaltyArea(GridVec p) const;
  // Columns between the ball and the opponent goal line.
  int DistanceToGoalLine(GridVec p) const { return width - p.x; }
  GridVec PenaltySpot() const { return {width - 3, height / 2}; }
  // Qualitative thresholds of the masking rules, pinned here.
  double FarBallThreshold() const { return width / 3.0; }
  int ShotRangeColumns() const { return kPenaltyDepth + 2; }
};

enum class EventKind : int {
  kMove = 0,
  kPassAttempt,
  kPassComplete,
  kOwnershipChange,
  kShot,
  kGoal,
  kOutOfPlay,
};
std::string_view EventKindName(EventKind kind);
EventKind EventKindFromName(std::string_view name);

struct Event {
  EventKind kind;
  TeamId team = TeamId::kNone;  // acting / scoring / gaining team
  int player = -1;
  TeamId other_team = TeamId::kNone;  // e.g. previous owner on a change
  int other_player = -1;
  friend bool operator==(const Event&, const Event&) = default;
};

// One action index per controlled agent of each team, in that team's own
// frame (direction actions are interpreted as if attacking towards
// x = width).
using JointAction = std::array<std::vector<int>, 2>;

struct StepResult {
  RawObservation observation;  // world frame
  std::vector<Event> events;
  bool terminal = false;
};

// Shot success probability at Chebyshev distance d from the goal.
double ShotSuccessProbability(int distance);
inline constexpr double kSlideSuccess = 0.5;
inline constexpr double kSlideSuccessVsDribble = 0.25;
inline constexpr double kSlideFoul = 0.5;
inline constexpr double kInterceptPerOpponent = 0.3;
inline constexpr double kKeeperSave = 0.5;

// Single-threaded state machine. Instances may move between threads but are
// never shared.
class MiniPitch {
 public:
  explicit MiniPitch(MiniPitchConfig config);

  const MiniPitchConfig& config() const { return config_; }
  PitchGeometry geometry() const { return {config_.width, config_.height}; }

  RawObservation Reset(uint64_t seed);
  StepResult Step(const JointAction& actions);

  // Restores a world state, e.g. a replay record. A ball attributed to a
  // passer resumes as a resting loose ball; fatigue restarts from the tired
  // flags.
  void LoadState(const RawObservation& world);

  const RawObservation& observation() const { return obs_; }
  RawObservation View(TeamId team) const { return TeamView(obs_, team); }
  bool terminal() const { return terminal_; }

 private:
  struct Flight {
    std::vector<GridVec> path;  // cells after the kick-off cell, in order
    size_t next = 0;
    int speed = 2;
    bool lofted = false;
    TeamId team = TeamId::kNone;
    int player = -1;
    int target_player = -1;
  };

  void PlaceKickOff(TeamId kicking);
  void ApplyHalftimeSwap();
  GridVec ToWorld(TeamId team, GridVec frame_dir) const;
  double Roll(uint64_t kind, uint64_t index) const;
  void GiveBall(TeamId team, int player, std::vector<Event>* events);
  void ResolveShot(TeamId team, int player, std::vector<Event>* events);
  void StartPass(TeamId team, int player, int action,
                 std::vector<Event>* events);
  void AdvanceFlight(std::vector<Event>* events);
  void PickUpLooseBall(std::vector<Event>* events);
  void MoveKeepers();
  PlayerState& player(TeamId team, int index) {
    return obs_.team(team)[index];
  }

  MiniPitchConfig config_;
  uint64_t seed_ = 0;
  RawObservation obs_;
  std::array<std::vector<int>, 2> fatigue_;
  std::optional<Flight> flight_;
  bool terminal_ = true;
  bool swapped_once_ = false;
};

// Zero-sum matrix game; entries are the row player's payoff.
class MatrixGame {
 public:
  MatrixGame() = default;
  explicit MatrixGame(std::vector<std::vector<double>> payoff);

  static MatrixGame RockPaperScissors();
  static MatrixGame MatchingPennies();
  // Whitespace-separated rows, one row per line.
  static MatrixGame FromText(std::string_view text);
  static MatrixGame FromFile(const std::string& path);

  int rows() const { return static_cast<int>(payoff_.size()); }
  int cols() const { return payoff_.empty() ? 0 : payoff_[0].size(); }
  double at(int r, int c) const { return payoff_[r][c]; }
  const std::vector<std::vector<double>>& payoff() const { return payoff_; }
  std::string Fingerprint() const;

  // Returns (row payoff, column payoff).
  std::pair<double, double> Step(int row_action, int col_action) const;

 private:
  std::vector<std::vector<double>> payoff_;
};

}  // namespace pitchlab

#endif  // PITCHLAB_GAME_H_
