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

#include "pitchlab/rewards.h"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

#include "pitchlab/features.h"

namespace pitchlab {
namespace {

bool KnownComponent(std::string_view name) {
  return std::find(kRewardComponents.begin(), kRewardComponents.end(), name) !=
         kRewardComponents.end();
}

// Distance of the ball to the attacked goal in half-pitch units, measured in
// the team frame from the goal line at x = width.
double GoalDistance(const RawObservation& view) {
  double dx = view.width - view.ball.position.x;
  double dy = view.ball.position.y - (view.height - 1) / 2.0;
  return std::hypot(dx, dy) / (view.width / 2.0);
}

int ScoringSign(const std::vector<Event>& events, TeamId team, int* sign) {
  int goals = 0;
  *sign = 0;
  for (const Event& e : events) {
    if (e.kind != EventKind::kGoal) continue;
    ++goals;
    *sign += e.team == team ? 1 : -1;
  }
  return goals;
}

}  // namespace

std::array<RoleWeights, kRoleCount> RewardConfig::DefaultRoleWeights() {
  std::array<RoleWeights, kRoleCount> w;
  w[static_cast<int>(Role::kGoalkeeper)] = {0.5, 1.5};
  w[static_cast<int>(Role::kDefender)] = {0.5, 1.5};
  w[static_cast<int>(Role::kMidfielder)] = {1.0, 1.0};
  w[static_cast<int>(Role::kForward)] = {1.5, 0.5};
  return w;
}

RewardConfig RewardConfig::Sparse() { return RewardConfig{}; }

RewardConfig RewardConfig::Dense() {
  RewardConfig c;
  c.scheme = RewardScheme::kDense;
  return c;
}

RewardConfig RewardConfig::PressureComposite() {
  RewardConfig c;
  c.scheme = RewardScheme::kComposite;
  c.components = {{"scoring", 1.0},
                  {"ball_player_distance", 0.1},
                  {"goal_difference", 1.0}};
  return c;
}

RewardConfig RewardConfig::RoleAssistComposite() {
  RewardConfig c;
  c.scheme = RewardScheme::kComposite;
  c.components = {{"role_scoring", 1.0}, {"assist", 0.3}};
  return c;
}

void RewardConfig::Validate() const {
  if (checkpoint_count < 1) throw ConfigError("checkpoint_count must be >= 1");
  if (!std::isfinite(checkpoint_value)) {
    throw ConfigError("checkpoint_value must be finite");
  }
  if (scheme == RewardScheme::kComposite && components.empty()) {
    throw ConfigError("composite reward needs at least one component");
  }
  for (const auto& [name, coef] : components) {
    if (!KnownComponent(name)) {
      throw ConfigError("unknown reward component '" + name + "'");
    }
    if (!std::isfinite(coef)) {
      throw ConfigError("coefficient of '" + name + "' is not finite");
    }
  }
  for (const auto& w : role_weights) {
    if (!std::isfinite(w.scored) || !std::isfinite(w.conceded)) {
      throw ConfigError("role weights must be finite");
    }
  }
}

RewardConfig RewardConfig::FromKeyValues(const KeyValues& kv) {
  RewardConfig c;
  if (auto it = kv.find("scheme"); it != kv.end()) {
    const std::string& s = it->second;
    if (s == "sparse") c = Sparse();
    else if (s == "dense") c = Dense();
    else if (s == "pressure") c = PressureComposite();
    else if (s == "role_assist") c = RoleAssistComposite();
    else if (s == "composite") c.scheme = RewardScheme::kComposite;
    else throw ConfigError("unknown reward scheme '" + s + "'");
  }
  static const std::array<std::string, kRoleCount> kRoleKeys = {"gk", "def",
                                                                "mid", "fwd"};
  for (const auto& [key, value] : kv) {
    if (key == "scheme") continue;
    if (key == "components") {
      c.components.clear();
      std::stringstream ss(value);
      std::string item;
      while (std::getline(ss, item, ',')) {
        size_t colon = item.find(':');
        std::string name = item.substr(0, colon);
        double coef = colon == std::string::npos
                          ? 1.0
                          : ParseDouble(key, item.substr(colon + 1));
        c.components.emplace_back(name, coef);
      }
    } else if (key == "checkpoint_count") {
      c.checkpoint_count = static_cast<int>(ParseInt(key, value));
    } else if (key == "checkpoint_value") {
      c.checkpoint_value = ParseDouble(key, value);
    } else if (key.rfind("role.", 0) == 0) {
      bool matched = false;
      for (int r = 0; r < kRoleCount; ++r) {
        if (key == "role." + kRoleKeys[r] + ".scored") {
          c.role_weights[r].scored = ParseDouble(key, value);
          matched = true;
        } else if (key == "role." + kRoleKeys[r] + ".conceded") {
          c.role_weights[r].conceded = ParseDouble(key, value);
          matched = true;
        }
      }
      if (!matched) throw ConfigError("unknown reward key '" + key + "'");
    } else {
      throw ConfigError("unknown reward key '" + key + "'");
    }
  }
  c.Validate();
  return c;
}

std::vector<std::pair<std::string, double>> RewardConfig::Expanded() const {
  switch (scheme) {
    case RewardScheme::kSparse:
      return {{"scoring", 1.0}};
    case RewardScheme::kDense:
      return {{"scoring", 1.0}, {"checkpoint", 1.0}};
    case RewardScheme::kComposite:
      return components;
  }
  return {};
}

int TransitionCount(const Replay& replay) {
  return std::max(0, static_cast<int>(replay.steps.size()) - 1);
}

double ScoringReward(const std::vector<Event>& events, TeamId team) {
  int sign = 0;
  ScoringSign(events, team, &sign);
  return sign;
}

std::vector<double> ScoringStream(const Replay& replay, TeamId team) {
  const int n = TransitionCount(replay);
  std::vector<double> out(n, 0.0);
  for (int t = 0; t < n; ++t) out[t] = ScoringReward(replay.steps[t].events, team);
  return out;
}

std::vector<double> CheckpointStream(const Replay& replay, TeamId team,
                                     const RewardConfig& config) {
  const int n = TransitionCount(replay);
  const int k = config.checkpoint_count;
  std::vector<double> out(n, 0.0);
  int collected = 0;
  for (int t = 0; t < n; ++t) {
    int sign = 0;
    if (ScoringSign(replay.steps[t].events, team, &sign) > 0 && sign > 0) {
      out[t] = (k - collected) * config.checkpoint_value;
      collected = k;
      continue;
    }
    const RawObservation& next = replay.steps[t + 1].state;
    if (next.ball.owned_team != team) continue;
    double d = GoalDistance(TeamView(next, team));
    int reached = collected;
    while (reached < k) {
      double threshold =
          k == 1 ? 0.99 : 0.99 - 0.8 * reached / static_cast<double>(k - 1);
      if (d > threshold) break;
      ++reached;
    }
    out[t] = (reached - collected) * config.checkpoint_value;
    collected = reached;
  }
  return out;
}

RewardBreakdown ComputeRewards(const Replay& replay, TeamId team,
                               const RewardConfig& config,
                               const MatchEvents* events) {
  const int n = TransitionCount(replay);
  const int agents = replay.header.n_per_team;
  RewardBreakdown out;
  out.total.assign(agents, std::vector<double>(n, 0.0));
  std::optional<MatchEvents> detected;
  auto match_events = [&]() -> const MatchEvents& {
    if (events) return *events;
    if (!detected) detected = DetectEvents(replay, Decompose(replay));
    return *detected;
  };
  auto team_wide = [&](const std::vector<double>& s) {
    return AgentStreams(agents, s);
  };
  // Match events are credited at a record index; the reward goes to the
  // transition leading into it (or out of it, for goals).
  auto credit = [&](AgentStreams& s, int transition, int player, double v) {
    if (transition >= 0 && transition < n && player >= 0 && player < agents) {
      s[player][transition] += v;
    }
  };

  for (const auto& [name, coef] : config.Expanded()) {
    AgentStreams s(agents, std::vector<double>(n, 0.0));
    if (name == "scoring") {
      s = team_wide(ScoringStream(replay, team));
    } else if (name == "checkpoint") {
      s = team_wide(CheckpointStream(replay, team, config));
    } else if (name == "ball_player_distance") {
      for (int t = 0; t < n; ++t) {
        const RawObservation& next = replay.steps[t + 1].state;
        const auto& players = next.team(team);
        double bx = NormalizeX(next.ball.position.x, next.width);
        double by = NormalizeY(next.ball.position.y, next.height);
        for (int i = 0; i < agents; ++i) {
          double px = NormalizeX(players[i].position.x, next.width);
          double py = NormalizeY(players[i].position.y, next.height);
          s[i][t] = -std::hypot(px - bx, py - by);
        }
      }
    } else if (name == "goal_difference") {
      if (n > 0) {
        const auto& score = replay.steps[n].state.score;
        double gd = score[Index(team)] - score[Index(Opponent(team))];
        for (int i = 0; i < agents; ++i) s[i][n - 1] = gd;
      }
    } else if (name == "possession") {
      for (int t = 0; t < n; ++t) {
        auto [before_team, before_player] =
            EffectiveOwner(replay.steps[t].state);
        auto [after_team, after_player] =
            EffectiveOwner(replay.steps[t + 1].state);
        if (before_team == team && after_team == Opponent(team)) {
          credit(s, t, before_player, -1.0);
        } else if (before_team == Opponent(team) && after_team == team) {
          credit(s, t, after_player, 1.0);
        }
      }
    } else if (name == "role_scoring") {
      for (int t = 0; t < n; ++t) {
        const auto& roles = replay.steps[t].state.team(team);
        for (const Event& e : replay.steps[t].events) {
          if (e.kind != EventKind::kGoal) continue;
          for (int i = 0; i < agents; ++i) {
            const RoleWeights& w = config.role_weights[static_cast<int>(roles[i].role)];
            s[i][t] += e.team == team ? w.scored : -w.conceded;
          }
        }
      }
    } else if (name == "passing") {
      for (const MatchEvent& e : match_events().events) {
        if (e.team != team) continue;
        if (e.kind == MatchEventKind::kPass) credit(s, e.step - 1, e.player, 1.0);
        if (e.kind == MatchEventKind::kPassFailed) {
          credit(s, e.step - 1, e.player, -1.0);
        }
      }
    } else if (name == "assist") {
      for (const MatchEvent& e : match_events().events) {
        if (e.team == team && e.kind == MatchEventKind::kAssist) {
          credit(s, e.step, e.player, 1.0);
        }
      }
    } else {
      throw ConfigError("unknown reward component '" + name + "'");
    }
    for (int i = 0; i < agents; ++i) {
      for (int t = 0; t < n; ++t) out.total[i][t] += coef * s[i][t];
    }
    out.names.push_back(name);
    out.coefficients.push_back(coef);
    out.components.push_back(std::move(s));
  }
  return out;
}

}  // namespace pitchlab
