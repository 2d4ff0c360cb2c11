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

#include "pitchlab/features.h"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace pitchlab {
namespace {

constexpr int kPlayerFields = 7;

const std::vector<std::string>& PlayerStateFields() {
  static const std::vector<std::string> fields = {
      "x",         "y",        "dir_x",      "dir_y",     "speed",
      "role_gk",   "role_def", "role_mid",   "role_fwd",  "tired",
      "dribbling", "has_ball", "goal_dist",  "in_opp_pa", "in_own_pa",
      "zone_def",  "zone_mid", "zone_att",   "sprinted"};
  return fields;
}

const std::vector<std::string>& BallStateFields() {
  static const std::vector<std::string> fields = {
      "x",          "y",          "zone_def_top", "zone_def_bottom",
      "zone_mid_top", "zone_mid_bottom", "zone_att_top", "zone_att_bottom",
      "rel_x",      "rel_y",      "dir_x",        "dir_y",
      "speed",      "high",       "owner_none",   "owner_team",
      "owner_opp",  "owned_by_me"};
  return fields;
}

std::vector<std::string> OtherPlayerFields(const std::string& prefix) {
  std::vector<std::string> f;
  for (const char* name :
       {"rel_x", "rel_y", "dir_x", "dir_y", "speed", "distance", "tired"}) {
    f.push_back(prefix + name);
  }
  return f;
}

std::vector<std::string> IndexedFields(const std::string& prefix, int n) {
  std::vector<std::string> f;
  for (int i = 0; i < n; ++i) f.push_back(prefix + std::to_string(i));
  return f;
}

class LayoutBuilder {
 public:
  void Add(std::string name, std::vector<std::string> fields) {
    int len = static_cast<int>(fields.size());
    layout_.blocks.push_back({std::move(name), offset_, len, std::move(fields)});
    offset_ += len;
  }
  FeatureLayout Build() { return std::move(layout_); }

 private:
  FeatureLayout layout_;
  int offset_ = 0;
};

FeatureLayout BuildSimpleLayout(int n) {
  LayoutBuilder b;
  std::vector<std::string> players;
  for (const char* side : {"team", "opp"}) {
    for (int i = 0; i < n; ++i) {
      std::string p = std::string(side) + std::to_string(i) + "_";
      for (const char* f : {"x", "y", "dir_x", "dir_y"}) players.push_back(p + f);
    }
  }
  b.Add("players", std::move(players));
  b.Add("ball", {"x", "y", "high", "dir_x", "dir_y", "speed"});
  b.Add("ownership", {"none", "team", "opp"});
  std::vector<std::string> modes;
  for (int m = 0; m < kGameModeCount; ++m) {
    modes.emplace_back(GameModeName(static_cast<GameMode>(m)));
  }
  b.Add("game_mode", std::move(modes));
  b.Add("active", IndexedFields("agent", n));
  return b.Build();
}

FeatureLayout BuildComplexLayout(int n) {
  LayoutBuilder b;
  b.Add("player", PlayerStateFields());
  b.Add("ball", BallStateFields());
  std::vector<std::string> actions;
  for (int a = 0; a < kActionCount; ++a) actions.emplace_back(ActionName(a));
  b.Add("available_actions", std::move(actions));
  b.Add("closest_teammate", OtherPlayerFields(""));
  b.Add("closest_opponent", OtherPlayerFields(""));
  std::vector<std::string> mates, opps;
  for (int i = 0; i < n - 1; ++i) {
    for (auto& f : OtherPlayerFields("mate" + std::to_string(i) + "_")) {
      mates.push_back(std::move(f));
    }
  }
  for (int i = 0; i < n; ++i) {
    for (auto& f : OtherPlayerFields("opp" + std::to_string(i) + "_")) {
      opps.push_back(std::move(f));
    }
  }
  b.Add("teammates", std::move(mates));
  b.Add("opponents", std::move(opps));
  b.Add("identity", IndexedFields("agent", n));
  return b.Build();
}

void CheckAgent(const RawObservation& obs, TeamId team, int agent) {
  if (team == TeamId::kNone) throw std::out_of_range("team must be Left or Right");
  int n = static_cast<int>(obs.team(team).size());
  if (agent < 0 || agent >= n) {
    throw std::out_of_range("agent index " + std::to_string(agent) +
                            " invalid for team of " + std::to_string(n));
  }
}

double Euclid(GridVec a, GridVec b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

int Third(int x, int width) { return std::min(2, (3 * x) / width); }

void PushOther(std::vector<double>& v, const PlayerState& me,
               const PlayerState& other, const RawObservation& view) {
  double w1 = view.width - 1, h1 = view.height - 1;
  v.push_back((other.position.x - me.position.x) / w1);
  v.push_back((other.position.y - me.position.y) / h1);
  v.push_back(other.direction.x);
  v.push_back(other.direction.y);
  v.push_back(other.speed / 2.0);
  v.push_back(Euclid(me.position, other.position) /
              DistanceScale(view.width, view.height));
  v.push_back(other.tired ? 1.0 : 0.0);
}

// Index of the nearest player in `players` other than `skip`; ties go to the
// lowest index.
int Closest(const std::vector<PlayerState>& players, GridVec from, int skip) {
  int best = -1;
  double best_d = 0;
  for (int i = 0; i < static_cast<int>(players.size()); ++i) {
    if (i == skip) continue;
    double d = Euclid(players[i].position, from);
    if (best < 0 || d < best_d) {
      best = i;
      best_d = d;
    }
  }
  return best;
}

}  // namespace

int FeatureLayout::size() const {
  int total = 0;
  for (const auto& b : blocks) total += b.length;
  return total;
}

const FeatureBlock& FeatureLayout::block(std::string_view name) const {
  for (const auto& b : blocks) {
    if (b.name == name) return b;
  }
  throw std::out_of_range("no feature block named '" + std::string(name) + "'");
}

std::string FeatureLayout::ToSchemaText() const {
  std::ostringstream os;
  for (const auto& b : blocks) {
    os << b.name << ' ' << b.offset << ' ' << b.length << ' ';
    for (size_t i = 0; i < b.fields.size(); ++i) {
      os << (i ? "," : "") << b.fields[i];
    }
    os << '\n';
  }
  return os.str();
}

FeatureLayout FeatureLayout::FromSchemaText(std::string_view text) {
  FeatureLayout layout;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    FeatureBlock b;
    std::string fields;
    if (!(ls >> b.name >> b.offset >> b.length)) {
      throw ParseError("malformed layout line", line_no);
    }
    ls >> fields;
    std::istringstream fs(fields);
    std::string f;
    while (std::getline(fs, f, ',')) b.fields.push_back(f);
    if (static_cast<int>(b.fields.size()) != b.length) {
      throw ParseError("field count does not match block length", line_no);
    }
    layout.blocks.push_back(std::move(b));
  }
  return layout;
}

int ActionMask::count() const {
  int c = 0;
  for (bool b : allowed) c += b;
  return c;
}

uint32_t ActionMask::bits() const {
  uint32_t bits = 0;
  for (int a = 0; a < kActionCount; ++a) {
    if (allowed[a]) bits |= 1u << a;
  }
  return bits;
}

ActionMask ActionMask::FromBits(uint32_t bits) {
  ActionMask m;
  for (int a = 0; a < kActionCount; ++a) m.allowed[a] = (bits >> a) & 1u;
  return m;
}

ActionMask ActionMask::All() {
  ActionMask m;
  m.allowed.fill(true);
  return m;
}

double NormalizeX(int x, int width) { return 2.0 * x / (width - 1) - 1.0; }
double NormalizeY(int y, int height) { return 2.0 * y / (height - 1) - 1.0; }
double DistanceScale(int width, int height) {
  return std::hypot(width - 1, height - 1);
}

const FeatureLayout& SimpleLayout(int n) {
  static const auto layouts = [] {
    std::array<FeatureLayout, kMaxPlayersPerTeam + 1> all;
    for (int i = 1; i <= kMaxPlayersPerTeam; ++i) all[i] = BuildSimpleLayout(i);
    return all;
  }();
  if (n < 1 || n > kMaxPlayersPerTeam) throw std::out_of_range("team size");
  return layouts[n];
}

const FeatureLayout& ComplexLayout(int n) {
  static const auto layouts = [] {
    std::array<FeatureLayout, kMaxPlayersPerTeam + 1> all;
    for (int i = 1; i <= kMaxPlayersPerTeam; ++i) {
      all[i] = BuildComplexLayout(i);
    }
    return all;
  }();
  if (n < 1 || n > kMaxPlayersPerTeam) throw std::out_of_range("team size");
  return layouts[n];
}

FeatureVector EncodeSimple(const RawObservation& obs, TeamId team, int agent) {
  CheckAgent(obs, team, agent);
  const RawObservation view = TeamView(obs, team);
  const int n = static_cast<int>(view.left.size());
  FeatureVector fv;
  fv.layout = &SimpleLayout(n);
  auto& v = fv.values;
  v.reserve(fv.layout->size());
  for (const auto* side : {&view.left, &view.right}) {
    for (const auto& p : *side) {
      v.push_back(NormalizeX(p.position.x, view.width));
      v.push_back(NormalizeY(p.position.y, view.height));
      v.push_back(p.direction.x);
      v.push_back(p.direction.y);
    }
  }
  const BallState& ball = view.ball;
  v.push_back(NormalizeX(ball.position.x, view.width));
  v.push_back(NormalizeY(ball.position.y, view.height));
  v.push_back(ball.high ? 1.0 : 0.0);
  v.push_back(ball.direction.x);
  v.push_back(ball.direction.y);
  v.push_back(ball.speed / 3.0);
  v.push_back(ball.owned_team == TeamId::kNone ? 1.0 : 0.0);
  v.push_back(ball.owned_team == TeamId::kLeft ? 1.0 : 0.0);
  v.push_back(ball.owned_team == TeamId::kRight ? 1.0 : 0.0);
  for (int m = 0; m < kGameModeCount; ++m) {
    v.push_back(static_cast<int>(view.game_mode) == m ? 1.0 : 0.0);
  }
  for (int i = 0; i < n; ++i) v.push_back(i == agent ? 1.0 : 0.0);
  return fv;
}

FeatureVector EncodeComplex(const RawObservation& obs, TeamId team,
                            int agent) {
  CheckAgent(obs, team, agent);
  const RawObservation view = TeamView(obs, team);
  const PitchGeometry geo{view.width, view.height};
  const int n = static_cast<int>(view.left.size());
  const PlayerState& me = view.left[agent];
  const BallState& ball = view.ball;
  FeatureVector fv;
  fv.layout = &ComplexLayout(n);
  auto& v = fv.values;
  v.reserve(fv.layout->size());

  // player
  v.push_back(NormalizeX(me.position.x, view.width));
  v.push_back(NormalizeY(me.position.y, view.height));
  v.push_back(me.direction.x);
  v.push_back(me.direction.y);
  v.push_back(me.speed / 2.0);
  for (int r = 0; r < kRoleCount; ++r) {
    v.push_back(static_cast<int>(me.role) == r ? 1.0 : 0.0);
  }
  v.push_back(me.tired ? 1.0 : 0.0);
  v.push_back(me.dribbling ? 1.0 : 0.0);
  bool has_ball = ball.owned_team == TeamId::kLeft && ball.owned_player == agent;
  v.push_back(has_ball ? 1.0 : 0.0);
  v.push_back(std::min(1.0, static_cast<double>(geo.ShotDistance(me.position)) /
                                view.width));
  v.push_back(geo.InOpponentPenaltyArea(me.position) ? 1.0 : 0.0);
  v.push_back(geo.InOwnPenaltyArea(me.position) ? 1.0 : 0.0);
  int third = Third(me.position.x, view.width);
  for (int z = 0; z < 3; ++z) v.push_back(third == z ? 1.0 : 0.0);
  v.push_back(me.speed > 1 ? 1.0 : 0.0);

  // ball
  v.push_back(NormalizeX(ball.position.x, view.width));
  v.push_back(NormalizeY(ball.position.y, view.height));
  int zone = 2 * Third(ball.position.x, view.width) +
             (ball.position.y >= view.height / 2 ? 1 : 0);
  for (int z = 0; z < 6; ++z) v.push_back(zone == z ? 1.0 : 0.0);
  v.push_back((ball.position.x - me.position.x) / double(view.width - 1));
  v.push_back((ball.position.y - me.position.y) / double(view.height - 1));
  v.push_back(ball.direction.x);
  v.push_back(ball.direction.y);
  v.push_back(ball.speed / 3.0);
  v.push_back(ball.high ? 1.0 : 0.0);
  v.push_back(ball.owned_team == TeamId::kNone ? 1.0 : 0.0);
  v.push_back(ball.owned_team == TeamId::kLeft ? 1.0 : 0.0);
  v.push_back(ball.owned_team == TeamId::kRight ? 1.0 : 0.0);
  v.push_back(has_ball ? 1.0 : 0.0);

  ActionMask mask = ComputeActionMask(view, TeamId::kLeft, agent);
  for (int a = 0; a < kActionCount; ++a) v.push_back(mask[a] ? 1.0 : 0.0);

  int mate = Closest(view.left, me.position, agent);
  if (mate >= 0) {
    PushOther(v, me, view.left[mate], view);
  } else {
    v.insert(v.end(), kPlayerFields, 0.0);
  }
  PushOther(v, me, view.right[Closest(view.right, me.position, -1)], view);
  for (int i = 0; i < n; ++i) {
    if (i != agent) PushOther(v, me, view.left[i], view);
  }
  for (int i = 0; i < n; ++i) PushOther(v, me, view.right[i], view);
  for (int i = 0; i < n; ++i) v.push_back(i == agent ? 1.0 : 0.0);
  return fv;
}

ActionMask ComputeActionMask(const RawObservation& obs, TeamId team,
                             int agent) {
  CheckAgent(obs, team, agent);
  const RawObservation view = TeamView(obs, team);
  const PitchGeometry geo{view.width, view.height};
  const PlayerState& me = view.left[agent];
  const BallState& ball = view.ball;
  const double far = geo.FarBallThreshold();
  ActionMask mask = ActionMask::All();
  auto disable = [&mask](std::initializer_list<Action> actions) {
    for (Action a : actions) mask.allowed[static_cast<int>(a)] = false;
  };
  auto disable_ball_play = [&] {
    disable({Action::kLongPass, Action::kHighPass, Action::kShortPass,
             Action::kShot, Action::kDribble});
  };

  const bool mine = ball.owned_team == TeamId::kLeft;
  const bool theirs = ball.owned_team == TeamId::kRight;
  if (theirs) disable_ball_play();
  if (ball.owned_team == TeamId::kNone) {
    double nearest = 1e9;
    for (const auto& p : view.left) {
      nearest = std::min(nearest, Euclid(p.position, ball.position));
    }
    if (nearest > far) disable_ball_play();
  }
  if (mine) disable({Action::kSliding});
  if (geo.DistanceToGoalLine(ball.position) > geo.ShotRangeColumns()) {
    disable({Action::kShot});
  }
  if (geo.InOpponentPenaltyArea(me.position)) {
    disable({Action::kHighPass, Action::kLongPass});
  }
  if (mine && ball.owned_player != agent &&
      Euclid(me.position, ball.position) > far) {
    disable_ball_play();
  }
  const GameMode mode = view.game_mode;
  const bool set_piece = mode == GameMode::kFreeKick ||
                         mode == GameMode::kCorner ||
                         mode == GameMode::kPenalty;
  if (set_piece && mine && ball.owned_player == agent) {
    for (int a = static_cast<int>(Action::kLeft);
         a <= static_cast<int>(Action::kBottomLeft); ++a) {
      mask.allowed[a] = false;
    }
    disable({Action::kSprint, Action::kDribble, Action::kSliding});
    if (mode == GameMode::kPenalty) {
      disable({Action::kLongPass, Action::kHighPass, Action::kShortPass});
    }
    if (mode == GameMode::kCorner) disable({Action::kShot});
  }
  if (set_piece && theirs) disable({Action::kSliding});
  mask.allowed[static_cast<int>(Action::kIdle)] = true;
  return mask;
}

}  // namespace pitchlab
