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

#include "pitchlab/game.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace pitchlab {
namespace {

constexpr std::array<std::string_view, kActionCount> kActionNames = {
    "idle",          "left",          "top_left",         "top",
    "top_right",     "right",         "bottom_right",     "bottom",
    "bottom_left",   "long_pass",     "high_pass",        "short_pass",
    "shot",          "sprint",        "release_direction",
    "release_sprint", "sliding",      "dribble",          "release_dribble"};

constexpr std::array<GridVec, 9> kMoveDirections = {{
    {0, 0}, {-1, 0}, {-1, -1}, {0, -1}, {1, -1},
    {1, 0}, {1, 1},  {0, 1},   {-1, 1},
}};

// Roll kinds for the counter-based generator.
enum RollKind : uint64_t {
  kRollShot = 1,
  kRollSave,
  kRollSlide,
  kRollFoul,
  kRollIntercept,
  kRollPickUp,
};

int Sign(int v) { return (v > 0) - (v < 0); }

int Chebyshev(GridVec a, GridVec b) {
  return std::max(std::abs(a.x - b.x), std::abs(a.y - b.y));
}

int SquaredDistance(GridVec a, GridVec b) {
  return (a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y);
}

// Cells visited walking from `from` to `to`, excluding `from`.
std::vector<GridVec> LinePath(GridVec from, GridVec to) {
  std::vector<GridVec> path;
  int dx = std::abs(to.x - from.x), sx = Sign(to.x - from.x);
  int dy = -std::abs(to.y - from.y), sy = Sign(to.y - from.y);
  int err = dx + dy;
  GridVec p = from;
  while (!(p == to)) {
    int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      p.x += sx;
    }
    if (e2 <= dx) {
      err += dx;
      p.y += sy;
    }
    path.push_back(p);
  }
  return path;
}

Role RoleForIndex(int index, int n) {
  if (index == n - 1) return Role::kForward;
  return index < n / 2 ? Role::kDefender : Role::kMidfielder;
}

void ReflectPlayer(PlayerState& p, int width) {
  p.position.x = width - 1 - p.position.x;
  p.direction.x = -p.direction.x;
}

}  // namespace

std::string_view ActionName(int action) {
  if (action < 0 || action >= kActionCount) return "invalid";
  return kActionNames[action];
}

bool IsMoveAction(int action) {
  return action >= static_cast<int>(Action::kLeft) &&
         action <= static_cast<int>(Action::kBottomLeft);
}

bool IsPassAction(int action) {
  return action == static_cast<int>(Action::kLongPass) ||
         action == static_cast<int>(Action::kHighPass) ||
         action == static_cast<int>(Action::kShortPass);
}

std::string_view GameModeName(GameMode mode) {
  switch (mode) {
    case GameMode::kNormal: return "Normal";
    case GameMode::kKickOff: return "KickOff";
    case GameMode::kFreeKick: return "FreeKick";
    case GameMode::kCorner: return "Corner";
    case GameMode::kPenalty: return "Penalty";
  }
  return "Normal";
}

GameMode GameModeFromName(std::string_view name) {
  for (int m = 0; m < kGameModeCount; ++m) {
    if (GameModeName(static_cast<GameMode>(m)) == name) {
      return static_cast<GameMode>(m);
    }
  }
  throw ParseError("unknown game mode '" + std::string(name) + "'", 0);
}

std::string_view RoleName(Role role) {
  switch (role) {
    case Role::kGoalkeeper: return "GK";
    case Role::kDefender: return "DEF";
    case Role::kMidfielder: return "MID";
    case Role::kForward: return "FWD";
  }
  return "MID";
}

Role RoleFromName(std::string_view name) {
  for (int r = 0; r < kRoleCount; ++r) {
    if (RoleName(static_cast<Role>(r)) == name) return static_cast<Role>(r);
  }
  throw ParseError("unknown role '" + std::string(name) + "'", 0);
}

std::string_view EventKindName(EventKind kind) {
  switch (kind) {
    case EventKind::kMove: return "Move";
    case EventKind::kPassAttempt: return "PassAttempt";
    case EventKind::kPassComplete: return "PassComplete";
    case EventKind::kOwnershipChange: return "OwnershipChange";
    case EventKind::kShot: return "Shot";
    case EventKind::kGoal: return "Goal";
    case EventKind::kOutOfPlay: return "OutOfPlay";
  }
  return "Move";
}

EventKind EventKindFromName(std::string_view name) {
  for (int k = 0; k <= static_cast<int>(EventKind::kOutOfPlay); ++k) {
    if (EventKindName(static_cast<EventKind>(k)) == name) {
      return static_cast<EventKind>(k);
    }
  }
  throw ParseError("unknown event kind '" + std::string(name) + "'", 0);
}

RawObservation Reflect(const RawObservation& obs) {
  RawObservation out = obs;
  for (auto& p : out.left) ReflectPlayer(p, obs.width);
  for (auto& p : out.right) ReflectPlayer(p, obs.width);
  for (auto& p : out.keepers) ReflectPlayer(p, obs.width);
  out.ball.position.x = obs.width - 1 - obs.ball.position.x;
  out.ball.direction.x = -obs.ball.direction.x;
  return out;
}

RawObservation SwapTeams(const RawObservation& obs) {
  RawObservation out = obs;
  std::swap(out.left, out.right);
  std::swap(out.score[0], out.score[1]);
  if (out.keepers.size() == 2) std::swap(out.keepers[0], out.keepers[1]);
  out.ball.owned_team = Opponent(obs.ball.owned_team);
  out.ball.pass_team = Opponent(obs.ball.pass_team);
  return out;
}

RawObservation Mirror(const RawObservation& obs) {
  return Reflect(SwapTeams(obs));
}

RawObservation TeamView(const RawObservation& world, TeamId team) {
  bool attacks_right = AttacksRight(world, team);
  RawObservation view = team == TeamId::kRight ? SwapTeams(world) : world;
  if (!attacks_right) view = Reflect(view);
  view.sides_swapped = false;
  return view;
}

void MarkovGameSpec::Validate() const {
  if (n_agents_per_team < 1) throw ConfigError("n_agents_per_team must be >= 1");
  if (action_count_per_agent < 1) throw ConfigError("action count must be >= 1");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0,1]");
  if (horizon < 1) throw ConfigError("horizon must be >= 1");
}

void MiniPitchConfig::Validate() const {
  if (width < 6 || height < 4) {
    throw ConfigError("pitch must be at least 6x4, got " +
                      std::to_string(width) + "x" + std::to_string(height));
  }
  if (n_per_team < 1 || n_per_team > 11) {
    throw ConfigError("n_per_team must lie in [1,11]");
  }
  if (max_steps < 1) throw ConfigError("max_steps must be >= 1");
  if (halftime_swap && max_steps % 2 != 0) {
    throw ConfigError("max_steps must be even when halftime_swap is set");
  }
}

std::string MiniPitchConfig::Fingerprint() const {
  std::ostringstream os;
  os << "minipitch/w" << width << "h" << height << "n" << n_per_team << "T"
     << max_steps << "a" << academy_mode << "s" << halftime_swap << "k"
     << keepers;
  return os.str();
}

std::string MiniPitchConfig::ToKeyValues() const {
  std::ostringstream os;
  os << "width=" << width << "\nheight=" << height
     << "\nn_per_team=" << n_per_team << "\nmax_steps=" << max_steps
     << "\nacademy_mode=" << (academy_mode ? "true" : "false")
     << "\nhalftime_swap=" << (halftime_swap ? "true" : "false")
     << "\nkeepers=" << (keepers ? "true" : "false") << "\nseed=" << seed
     << "\n";
  return os.str();
}

MiniPitchConfig MiniPitchConfig::FromKeyValues(const KeyValues& kv) {
  MiniPitchConfig c;
  for (const auto& [key, value] : kv) {
    try {
      if (key == "width") c.width = std::stoi(value);
      else if (key == "height") c.height = std::stoi(value);
      else if (key == "n_per_team") c.n_per_team = std::stoi(value);
      else if (key == "max_steps") c.max_steps = std::stoi(value);
      else if (key == "academy_mode") c.academy_mode = ParseBool(value);
      else if (key == "halftime_swap") c.halftime_swap = ParseBool(value);
      else if (key == "keepers") c.keepers = ParseBool(value);
      else if (key == "seed") c.seed = std::stoull(value);
      else throw ConfigError("unknown MiniPitch key '" + key + "'");
    } catch (const std::logic_error& e) {
      if (dynamic_cast<const ConfigError*>(&e)) throw;
      throw ConfigError("bad value for '" + key + "': " + value);
    }
  }
  c.Validate();
  return c;
}

MarkovGameSpec MiniPitchConfig::Spec(double gamma) const {
  MarkovGameSpec spec;
  spec.n_agents_per_team = n_per_team;
  spec.gamma = gamma;
  spec.horizon = max_steps;
  return spec;
}

int PitchGeometry::ShotDistance(GridVec p) const {
  int dy = 0;
  if (p.y < goal_row_low()) dy = goal_row_low() - p.y;
  if (p.y > goal_row_high()) dy = p.y - goal_row_high();
  return std::max(width - p.x, dy);
}

bool PitchGeometry::InOpponentPenaltyArea(GridVec p) const {
  return p.x >= width - kPenaltyDepth && p.y >= height / 2 - 2 &&
         p.y <= height / 2 + 1;
}

bool PitchGeometry::InOwnPenaltyArea(GridVec p) const {
  return p.x < kPenaltyDepth && p.y >= height / 2 - 2 && p.y <= height / 2 + 1;
}

double ShotSuccessProbability(int distance) {
  return std::clamp(1.0 - 0.2 * (distance - 1), 0.0, 1.0);
}

MiniPitch::MiniPitch(MiniPitchConfig config) : config_(config) {
  config_.Validate();
}

GridVec MiniPitch::ToWorld(TeamId team, GridVec frame) const {
  return AttacksRight(obs_, team) ? frame : GridVec{-frame.x, frame.y};
}

double MiniPitch::Roll(uint64_t kind, uint64_t index) const {
  return CounterUniform(seed_, static_cast<uint64_t>(obs_.step_index), kind,
                        index);
}

void MiniPitch::PlaceKickOff(TeamId kicking) {
  const int n = config_.n_per_team;
  const int w = config_.width, h = config_.height;
  for (TeamId team : {TeamId::kLeft, TeamId::kRight}) {
    auto& players = obs_.team(team);
    for (int i = 0; i < n; ++i) {
      GridVec frame;
      if (team == kicking && i == n - 1) {
        frame = {w / 2, h / 2};
      } else if (team == kicking) {
        frame = {w / 2 - 2 - (i % 2), ((i + 1) * h) / n};
      } else {
        frame = {w / 2 - 2 - (i % 2), ((i + 1) * h) / (n + 1)};
      }
      frame.y = std::clamp(frame.y, 0, h - 1);
      PlayerState& p = players[i];
      p.position = AttacksRight(obs_, team)
                       ? frame
                       : GridVec{w - 1 - frame.x, frame.y};
      p.direction = {0, 0};
      p.speed = 0;
      p.dribbling = false;
    }
  }
  if (config_.keepers) {
    for (TeamId team : {TeamId::kLeft, TeamId::kRight}) {
      PlayerState& k = obs_.keepers[Index(team)];
      k.position = {AttacksRight(obs_, team) ? 0 : w - 1, h / 2 - 1};
      k.direction = {0, 0};
      k.speed = 0;
    }
  }
  flight_.reset();
  const PlayerState& kicker = obs_.team(kicking)[n - 1];
  obs_.ball = BallState{};
  obs_.ball.position = kicker.position;
  obs_.ball.owned_team = kicking;
  obs_.ball.owned_player = n - 1;
  obs_.game_mode = GameMode::kKickOff;
}

RawObservation MiniPitch::Reset(uint64_t seed) {
  seed_ = seed;
  const int n = config_.n_per_team;
  obs_ = RawObservation{};
  obs_.width = config_.width;
  obs_.height = config_.height;
  obs_.steps_left = config_.max_steps;
  obs_.left.resize(n);
  obs_.right.resize(n);
  for (int i = 0; i < n; ++i) {
    obs_.left[i].role = obs_.right[i].role = RoleForIndex(i, n);
  }
  if (config_.keepers) {
    obs_.keepers.resize(2);
    for (auto& k : obs_.keepers) k.role = Role::kGoalkeeper;
  }
  for (auto& f : fatigue_) f.assign(n, 0);
  PlaceKickOff(TeamId::kLeft);
  terminal_ = false;
  swapped_once_ = false;
  return obs_;
}

void MiniPitch::LoadState(const RawObservation& world) {
  const int n = config_.n_per_team;
  if (world.width != config_.width || world.height != config_.height ||
      static_cast<int>(world.left.size()) != n ||
      static_cast<int>(world.right.size()) != n ||
      world.keepers.size() != (config_.keepers ? 2u : 0u)) {
    throw ConfigError("state does not match the MiniPitch configuration");
  }
  obs_ = world;
  for (int t = 0; t < 2; ++t) {
    fatigue_[t].assign(n, 0);
    for (int i = 0; i < n; ++i) {
      if (obs_.team(static_cast<TeamId>(t))[i].tired) fatigue_[t][i] = 4;
    }
  }
  flight_.reset();
  swapped_once_ = obs_.sides_swapped;
  terminal_ = obs_.steps_left <= 0;
}

void MiniPitch::ApplyHalftimeSwap() {
  obs_ = Reflect(obs_);
  obs_.sides_swapped = !obs_.sides_swapped;
  if (flight_) {
    for (auto& c : flight_->path) c.x = config_.width - 1 - c.x;
  }
  swapped_once_ = true;
}

void MiniPitch::GiveBall(TeamId team, int index, std::vector<Event>* events) {
  BallState& ball = obs_.ball;
  TeamId prev_team = ball.owned_team != TeamId::kNone ? ball.owned_team
                                                      : ball.pass_team;
  int prev_player =
      ball.owned_team != TeamId::kNone ? ball.owned_player : ball.pass_player;
  bool from_pass = ball.owned_team == TeamId::kNone &&
                   ball.pass_team != TeamId::kNone;
  if (ball.owned_team != TeamId::kNone) {
    player(ball.owned_team, ball.owned_player).dribbling = false;
  }
  ball.owned_team = team;
  ball.owned_player = index;
  ball.pass_team = TeamId::kNone;
  ball.pass_player = -1;
  ball.high = false;
  ball.position = player(team, index).position;
  flight_.reset();
  if (prev_team != TeamId::kNone && prev_team != team) {
    events->push_back({EventKind::kOwnershipChange, team, index, prev_team,
                       prev_player});
  } else if (from_pass && prev_team == team && prev_player != index) {
    events->push_back(
        {EventKind::kPassComplete, team, prev_player, team, index});
  }
}

void MiniPitch::ResolveShot(TeamId team, int index,
                            std::vector<Event>* events) {
  const PitchGeometry geo = geometry();
  RawObservation view = TeamView(obs_, team);
  GridVec pos = view.left[index].position;
  int distance = geo.ShotDistance(pos);
  events->push_back({EventKind::kShot, team, index});
  bool on_target = Roll(kRollShot, 0) < ShotSuccessProbability(distance);
  bool saved = false;
  if (on_target && config_.keepers && distance > 1) {
    int target_row = std::clamp(pos.y, geo.goal_row_low(), geo.goal_row_high());
    const PlayerState& keeper = view.keepers[1];
    if (keeper.position.y == target_row && Roll(kRollSave, 0) < kKeeperSave) {
      saved = true;
    }
  }
  if (on_target && !saved) {
    events->push_back({EventKind::kGoal, team, index});
    ++obs_.score[Index(team)];
    PlaceKickOff(Opponent(team));
    return;
  }
  events->push_back({EventKind::kOutOfPlay, team, index});
  if (saved) {
    // Corner for the attacking team, taken by the shooter.
    GridVec frame{config_.width - 1, pos.y < config_.height / 2
                                         ? 0
                                         : config_.height - 1};
    PlayerState& shooter = player(team, index);
    shooter.position = AttacksRight(obs_, team)
                           ? frame
                           : GridVec{config_.width - 1 - frame.x, frame.y};
    obs_.ball.position = shooter.position;
    obs_.game_mode = GameMode::kCorner;
    return;
  }
  // Goal kick: the defender nearest to its own goal line restarts.
  TeamId defending = Opponent(team);
  RawObservation def_view = TeamView(obs_, defending);
  int best = 0;
  for (int i = 1; i < config_.n_per_team; ++i) {
    if (def_view.left[i].position.x < def_view.left[best].position.x) best = i;
  }
  GiveBall(defending, best, events);
  obs_.game_mode = GameMode::kFreeKick;
}

void MiniPitch::StartPass(TeamId team, int index, int action,
                          std::vector<Event>* events) {
  const int w = config_.width, h = config_.height;
  RawObservation view = TeamView(obs_, team);
  const PlayerState& passer = view.left[index];
  bool is_short = action == static_cast<int>(Action::kShortPass);
  bool lofted = action == static_cast<int>(Action::kHighPass);
  int target = -1;
  for (int i = 0; i < config_.n_per_team; ++i) {
    if (i == index) continue;
    if (target < 0) {
      target = i;
      continue;
    }
    const GridVec cand = view.left[i].position, cur = view.left[target].position;
    if (is_short) {
      if (SquaredDistance(cand, passer.position) <
          SquaredDistance(cur, passer.position)) {
        target = i;
      }
    } else if (cand.x > cur.x) {
      target = i;
    }
  }
  GridVec frame_target;
  if (target >= 0) {
    frame_target = view.left[target].position;
  } else {
    GridVec dir = passer.direction == GridVec{0, 0} ? GridVec{1, 0}
                                                    : passer.direction;
    int reach = is_short ? 3 : 6;
    frame_target = {std::clamp(passer.position.x + dir.x * reach, 0, w - 1),
                    std::clamp(passer.position.y + dir.y * reach, 0, h - 1)};
  }
  auto to_world = [&](GridVec p) {
    return AttacksRight(obs_, team) ? p : GridVec{w - 1 - p.x, p.y};
  };
  Flight f;
  f.path = LinePath(to_world(passer.position), to_world(frame_target));
  f.speed = is_short ? 2 : 3;
  f.lofted = lofted;
  f.team = team;
  f.player = index;
  f.target_player = target;
  events->push_back({EventKind::kPassAttempt, team, index, team, target});
  player(team, index).dribbling = false;
  BallState& ball = obs_.ball;
  ball.owned_team = TeamId::kNone;
  ball.owned_player = -1;
  ball.pass_team = team;
  ball.pass_player = index;
  ball.high = lofted;
  if (f.path.empty()) {
    if (target >= 0) GiveBall(team, target, events);
    return;
  }
  flight_ = std::move(f);
}

void MiniPitch::AdvanceFlight(std::vector<Event>* events) {
  Flight& f = *flight_;
  TeamId opp = Opponent(f.team);
  GridVec start = obs_.ball.position;
  for (int s = 0; s < f.speed && f.next < f.path.size(); ++s) {
    GridVec cell = f.path[f.next++];
    obs_.ball.position = cell;
    bool last = f.next == f.path.size();
    if (!f.lofted || last) {
      const auto& opponents = obs_.team(opp);
      for (int i = 0; i < static_cast<int>(opponents.size()); ++i) {
        if (!(opponents[i].position == cell)) continue;
        if (Roll(kRollIntercept, f.next * 64 + i) < kInterceptPerOpponent) {
          GiveBall(opp, i, events);
          obs_.ball.speed = s + 1;
          return;
        }
      }
    }
    if (last) {
      const auto& mates = obs_.team(f.team);
      int receiver = -1;
      if (f.target_player >= 0 && mates[f.target_player].position == cell) {
        receiver = f.target_player;
      } else {
        for (int i = 0; i < static_cast<int>(mates.size()); ++i) {
          if (i != f.player && mates[i].position == cell) {
            receiver = i;
            break;
          }
        }
      }
      obs_.ball.direction = {Sign(cell.x - start.x), Sign(cell.y - start.y)};
      obs_.ball.speed = s + 1;
      if (receiver >= 0) {
        GiveBall(f.team, receiver, events);
      } else {
        obs_.ball.high = false;
        flight_.reset();  // ball comes to rest, still attributed to passer
      }
      return;
    }
  }
  obs_.ball.direction = {Sign(obs_.ball.position.x - start.x),
                         Sign(obs_.ball.position.y - start.y)};
  obs_.ball.speed = f.speed;
}

void MiniPitch::PickUpLooseBall(std::vector<Event>* events) {
  std::vector<std::pair<TeamId, int>> candidates;
  for (TeamId team : {TeamId::kLeft, TeamId::kRight}) {
    const auto& players = obs_.team(team);
    for (int i = 0; i < static_cast<int>(players.size()); ++i) {
      if (players[i].position == obs_.ball.position) {
        candidates.emplace_back(team, i);
      }
    }
  }
  if (candidates.empty()) return;
  size_t pick = static_cast<size_t>(Roll(kRollPickUp, 0) * candidates.size());
  pick = std::min(pick, candidates.size() - 1);
  GiveBall(candidates[pick].first, candidates[pick].second, events);
}

void MiniPitch::MoveKeepers() {
  if (!config_.keepers) return;
  const PitchGeometry geo = geometry();
  for (auto& k : obs_.keepers) {
    int target = std::clamp(obs_.ball.position.y, geo.goal_row_low(),
                            geo.goal_row_high());
    int dy = Sign(target - k.position.y);
    k.position.y += dy;
    k.direction = {0, dy};
    k.speed = std::abs(dy);
  }
}

StepResult MiniPitch::Step(const JointAction& actions) {
  if (terminal_) throw std::logic_error("step called on a terminal MiniPitch");
  const int n = config_.n_per_team;
  for (int t = 0; t < 2; ++t) {
    if (static_cast<int>(actions[t].size()) != n) {
      throw std::out_of_range("expected " + std::to_string(n) +
                              " actions per team, got " +
                              std::to_string(actions[t].size()));
    }
    for (int a : actions[t]) {
      if (a < 0 || a >= kActionCount) {
        throw std::out_of_range("action index " + std::to_string(a) +
                                " out of range");
      }
    }
  }
  if (config_.halftime_swap && !swapped_once_ &&
      obs_.step_index == config_.max_steps / 2) {
    ApplyHalftimeSwap();
  }

  StepResult result;
  std::vector<Event>& events = result.events;
  const GameMode mode_at_start = obs_.game_mode;
  const int goals_before = obs_.score[0] + obs_.score[1];
  bool set_piece_awarded = false;
  for (auto* team : {&obs_.left, &obs_.right}) {
    for (auto& p : *team) p.speed = 0;
  }
  obs_.ball.speed = 0;
  std::array<std::vector<bool>, 2> frozen{std::vector<bool>(n, false),
                                          std::vector<bool>(n, false)};

  // 1. The ball carrier's shot or pass.
  bool shot_taken = false;
  if (obs_.ball.owned_team != TeamId::kNone) {
    TeamId team = obs_.ball.owned_team;
    int carrier = obs_.ball.owned_player;
    int a = actions[Index(team)][carrier];
    if (a == static_cast<int>(Action::kShot)) {
      // Every shot ends in a restart: kick-off, corner or goal kick.
      ResolveShot(team, carrier, &events);
      shot_taken = true;
      set_piece_awarded = true;
    } else if (IsPassAction(a)) {
      StartPass(team, carrier, a, &events);
      frozen[Index(team)][carrier] = true;
    }
  }

  if (!shot_taken) {
    // 2. Slide tackles on the carrier.
    bool resolved = false;
    for (TeamId team : {TeamId::kLeft, TeamId::kRight}) {
      for (int i = 0; i < n && !resolved; ++i) {
        if (actions[Index(team)][i] != static_cast<int>(Action::kSliding)) {
          continue;
        }
        frozen[Index(team)][i] = true;
        if (obs_.ball.owned_team != Opponent(team)) continue;
        int carrier = obs_.ball.owned_player;
        PlayerState& c = player(Opponent(team), carrier);
        if (Chebyshev(player(team, i).position, c.position) > 1) continue;
        double p = c.dribbling ? kSlideSuccessVsDribble : kSlideSuccess;
        uint64_t roll_index = Index(team) * 64 + i;
        if (Roll(kRollSlide, roll_index) < p) {
          player(team, i).position = c.position;
          GiveBall(team, i, &events);
          frozen[Index(Opponent(team))][carrier] = true;
          resolved = true;
        } else if (Roll(kRollFoul, roll_index) < kSlideFoul) {
          TeamId fouled = Opponent(team);
          RawObservation slider_view = TeamView(obs_, team);
          if (geometry().InOwnPenaltyArea(slider_view.left[i].position)) {
            GridVec spot = geometry().PenaltySpot();
            c.position = AttacksRight(obs_, fouled)
                             ? spot
                             : GridVec{config_.width - 1 - spot.x, spot.y};
            obs_.game_mode = GameMode::kPenalty;
          } else {
            obs_.game_mode = GameMode::kFreeKick;
          }
          obs_.ball.position = c.position;
          frozen[Index(fouled)][carrier] = true;
          set_piece_awarded = true;
          resolved = true;
        }
      }
    }

    // 3. Movement, sprint and toggles.
    for (TeamId team : {TeamId::kLeft, TeamId::kRight}) {
      for (int i = 0; i < n; ++i) {
        PlayerState& p = player(team, i);
        int a = actions[Index(team)][i];
        int& fatigue = fatigue_[Index(team)][i];
        bool sprinting = a == static_cast<int>(Action::kSprint);
        if (!frozen[Index(team)][i]) {
          GridVec step{0, 0};
          int cells = 0;
          if (IsMoveAction(a)) {
            step = ToWorld(team, kMoveDirections[a]);
            p.direction = step;
            cells = 1;
          } else if (sprinting && !(p.direction == GridVec{0, 0})) {
            step = p.direction;
            cells = p.tired ? 1 : 2;
          }
          GridVec before = p.position;
          for (int c = 0; c < cells; ++c) {
            GridVec next{p.position.x + step.x, p.position.y + step.y};
            if (!geometry().InBounds(next)) break;
            p.position = next;
          }
          p.speed = Chebyshev(before, p.position);
          if (p.speed > 0) events.push_back({EventKind::kMove, team, i});
        }
        if (a == static_cast<int>(Action::kReleaseDirection)) {
          p.direction = {0, 0};
        } else if (a == static_cast<int>(Action::kDribble)) {
          p.dribbling = obs_.ball.owned_team == team &&
                        obs_.ball.owned_player == i;
        } else if (a == static_cast<int>(Action::kReleaseDribble)) {
          p.dribbling = false;
        }
        fatigue = sprinting ? fatigue + 2 : std::max(0, fatigue - 1);
        if (a == static_cast<int>(Action::kReleaseSprint)) {
          fatigue = std::max(0, fatigue - 2);
        }
        p.tired = fatigue >= 4;
      }
    }
    if (obs_.ball.owned_team != TeamId::kNone) {
      const PlayerState& c = player(obs_.ball.owned_team, obs_.ball.owned_player);
      obs_.ball.position = c.position;
      obs_.ball.direction = c.speed > 0 ? c.direction : GridVec{0, 0};
      obs_.ball.speed = c.speed;
    }

    // 4. Passes in flight, then loose balls.
    if (flight_) {
      AdvanceFlight(&events);
    } else if (obs_.ball.owned_team == TeamId::kNone) {
      obs_.ball.direction = {0, 0};
    }
    if (!flight_ && obs_.ball.owned_team == TeamId::kNone) {
      PickUpLooseBall(&events);
    }
  }

  MoveKeepers();
  if (mode_at_start != GameMode::kNormal && !set_piece_awarded) {
    obs_.game_mode = GameMode::kNormal;
  }
  ++obs_.step_index;
  --obs_.steps_left;

  bool goal = obs_.score[0] + obs_.score[1] != goals_before;
  bool exchange = std::any_of(events.begin(), events.end(), [](const Event& e) {
    return e.kind == EventKind::kOwnershipChange;
  });
  terminal_ = obs_.steps_left <= 0 ||
              (config_.academy_mode && (goal || exchange));
  result.observation = obs_;
  result.terminal = terminal_;
  return result;
}

MatrixGame::MatrixGame(std::vector<std::vector<double>> payoff)
    : payoff_(std::move(payoff)) {
  if (payoff_.empty() || payoff_[0].empty()) {
    throw ConfigError("matrix game needs at least one row and column");
  }
  for (const auto& row : payoff_) {
    if (row.size() != payoff_[0].size()) {
      throw ConfigError("matrix game rows differ in length");
    }
    for (double v : row) {
      if (!std::isfinite(v)) throw ConfigError("matrix game entry not finite");
    }
  }
}

MatrixGame MatrixGame::RockPaperScissors() {
  return MatrixGame({{0, -1, 1}, {1, 0, -1}, {-1, 1, 0}});
}

MatrixGame MatrixGame::MatchingPennies() {
  return MatrixGame({{1, -1}, {-1, 1}});
}

MatrixGame MatrixGame::FromText(std::string_view text) {
  std::vector<std::vector<double>> rows;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) {
      line.resize(hash);
    }
    std::istringstream ls(line);
    std::vector<double> row;
    std::string tok;
    while (ls >> tok) {
      try {
        size_t used = 0;
        row.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::logic_error&) {
        throw ParseError("bad matrix entry '" + tok + "'", line_no);
      }
    }
    if (!row.empty()) rows.push_back(std::move(row));
  }
  return MatrixGame(std::move(rows));
}

MatrixGame MatrixGame::FromFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open matrix file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return FromText(ss.str());
}

std::string MatrixGame::Fingerprint() const {
  std::ostringstream os;
  os.precision(17);
  for (const auto& row : payoff_) {
    for (double v : row) os << v << ' ';
    os << ';';
  }
  std::ostringstream fp;
  fp << "matrix/" << rows() << "x" << cols() << "/" << std::hex
     << Fnv1a(os.str());
  return fp.str();
}

std::pair<double, double> MatrixGame::Step(int row_action,
                                           int col_action) const {
  if (row_action < 0 || row_action >= rows() || col_action < 0 ||
      col_action >= cols()) {
    throw std::out_of_range("matrix game action out of range");
  }
  double v = payoff_[row_action][col_action];
  return {v, -v};
}

}  // namespace pitchlab
