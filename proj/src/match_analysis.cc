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

#include "pitchlab/match_analysis.h"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"

namespace pitchlab {
namespace {

using OJson = nlohmann::ordered_json;
using Json = nlohmann::json;

constexpr std::string_view kFormatName = "pitchlab-replay";

std::string TeamCode(TeamId t) {
  return t == TeamId::kLeft ? "L" : t == TeamId::kRight ? "R" : "-";
}

TeamId TeamFromCode(const std::string& s) {
  if (s == "L") return TeamId::kLeft;
  if (s == "R") return TeamId::kRight;
  if (s == "-") return TeamId::kNone;
  throw std::invalid_argument("bad team code '" + s + "'");
}

OJson PlayerToJson(const PlayerState& p) {
  return OJson::array({p.position.x, p.position.y, p.direction.x,
                       p.direction.y, std::string(RoleName(p.role)), p.tired,
                       p.speed, p.dribbling});
}

PlayerState PlayerFromJson(const Json& j) {
  if (!j.is_array() || j.size() != 8) {
    throw std::invalid_argument("player entry must have 8 fields");
  }
  PlayerState p;
  p.position = {j[0].get<int>(), j[1].get<int>()};
  p.direction = {j[2].get<int>(), j[3].get<int>()};
  p.role = RoleFromName(j[4].get<std::string>());
  p.tired = j[5].get<bool>();
  p.speed = j[6].get<int>();
  p.dribbling = j[7].get<bool>();
  return p;
}

OJson PlayersToJson(const std::vector<PlayerState>& ps) {
  OJson a = OJson::array();
  for (const auto& p : ps) a.push_back(PlayerToJson(p));
  return a;
}

std::vector<PlayerState> PlayersFromJson(const Json& j) {
  std::vector<PlayerState> out;
  for (const auto& e : j) out.push_back(PlayerFromJson(e));
  return out;
}

OJson RecordToJson(int index, const StepRecord& r) {
  const RawObservation& s = r.state;
  OJson j;
  j["t"] = index;
  j["steps_left"] = s.steps_left;
  j["score"] = {s.score[0], s.score[1]};
  j["mode"] = std::string(GameModeName(s.game_mode));
  j["swapped"] = s.sides_swapped;
  OJson ball;
  ball["pos"] = {s.ball.position.x, s.ball.position.y};
  ball["dir"] = {s.ball.direction.x, s.ball.direction.y};
  ball["speed"] = s.ball.speed;
  ball["high"] = s.ball.high;
  ball["owner"] = s.ball.owned_team == TeamId::kNone
                      ? OJson(nullptr)
                      : OJson::array({TeamCode(s.ball.owned_team),
                                      s.ball.owned_player});
  ball["pass_from"] = s.ball.pass_team == TeamId::kNone
                          ? OJson(nullptr)
                          : OJson::array({TeamCode(s.ball.pass_team),
                                          s.ball.pass_player});
  j["ball"] = std::move(ball);
  j["left"] = PlayersToJson(s.left);
  j["right"] = PlayersToJson(s.right);
  j["keepers"] = PlayersToJson(s.keepers);
  j["actions"] = {r.actions[0], r.actions[1]};
  j["reward"] = {r.reward[0], r.reward[1]};
  OJson events = OJson::array();
  for (const Event& e : r.events) {
    events.push_back({std::string(EventKindName(e.kind)), TeamCode(e.team),
                      e.player, TeamCode(e.other_team), e.other_player});
  }
  j["events"] = std::move(events);
  return j;
}

StepRecord RecordFromJson(const Json& j, const ReplayHeader& h) {
  StepRecord r;
  RawObservation& s = r.state;
  s.width = h.width;
  s.height = h.height;
  s.step_index = j.at("t").get<int>();
  s.steps_left = j.at("steps_left").get<int>();
  s.score = {j.at("score").at(0).get<int>(), j.at("score").at(1).get<int>()};
  s.game_mode = GameModeFromName(j.at("mode").get<std::string>());
  s.sides_swapped = j.at("swapped").get<bool>();
  const Json& ball = j.at("ball");
  s.ball.position = {ball.at("pos").at(0).get<int>(),
                     ball.at("pos").at(1).get<int>()};
  s.ball.direction = {ball.at("dir").at(0).get<int>(),
                      ball.at("dir").at(1).get<int>()};
  s.ball.speed = ball.at("speed").get<int>();
  s.ball.high = ball.at("high").get<bool>();
  if (!ball.at("owner").is_null()) {
    s.ball.owned_team = TeamFromCode(ball["owner"].at(0).get<std::string>());
    s.ball.owned_player = ball["owner"].at(1).get<int>();
  }
  if (!ball.at("pass_from").is_null()) {
    s.ball.pass_team = TeamFromCode(ball["pass_from"].at(0).get<std::string>());
    s.ball.pass_player = ball["pass_from"].at(1).get<int>();
  }
  s.left = PlayersFromJson(j.at("left"));
  s.right = PlayersFromJson(j.at("right"));
  s.keepers = PlayersFromJson(j.at("keepers"));
  r.actions[0] = j.at("actions").at(0).get<std::vector<int>>();
  r.actions[1] = j.at("actions").at(1).get<std::vector<int>>();
  r.reward = {j.at("reward").at(0).get<double>(),
              j.at("reward").at(1).get<double>()};
  for (const auto& e : j.at("events")) {
    r.events.push_back({EventKindFromName(e.at(0).get<std::string>()),
                        TeamFromCode(e.at(1).get<std::string>()),
                        e.at(2).get<int>(),
                        TeamFromCode(e.at(3).get<std::string>()),
                        e.at(4).get<int>()});
  }
  return r;
}

std::string HexString(uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

}  // namespace

std::string ConfigHash(const MiniPitchConfig& config) {
  return HexString(Fnv1a(config.Fingerprint()));
}

ReplayHeader MakeReplayHeader(const MiniPitchConfig& config, uint64_t seed,
                              const std::string& left_policy,
                              const std::string& right_policy) {
  ReplayHeader h;
  h.env_fingerprint = config.Fingerprint();
  h.policy_ids = {left_policy, right_policy};
  h.seed = seed;
  h.config_hash = ConfigHash(config);
  h.width = config.width;
  h.height = config.height;
  h.n_per_team = config.n_per_team;
  h.keepers = config.keepers;
  return h;
}

std::string WriteReplay(const Replay& replay) {
  const ReplayHeader& h = replay.header;
  OJson header;
  header["format"] = std::string(kFormatName);
  header["version"] = h.version;
  header["env"] = h.env_fingerprint;
  header["policies"] = {h.policy_ids[0], h.policy_ids[1]};
  header["seed"] = h.seed;
  header["config_hash"] = h.config_hash;
  header["width"] = h.width;
  header["height"] = h.height;
  header["n_per_team"] = h.n_per_team;
  header["keepers"] = h.keepers;
  std::string out = header.dump();
  out += '\n';
  for (size_t i = 0; i < replay.steps.size(); ++i) {
    out += RecordToJson(static_cast<int>(i), replay.steps[i]).dump();
    out += '\n';
  }
  return out;
}

Replay ReadReplay(std::string_view text, const MiniPitchConfig* expected) {
  Replay replay;
  size_t pos = 0;
  int line_no = 0;
  bool have_header = false;
  while (pos < text.size()) {
    size_t nl = text.find('\n', pos);
    std::string_view line =
        text.substr(pos, nl == std::string_view::npos ? text.size() - pos
                                                      : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::exception& e) {
      throw ParseError(std::string("malformed record: ") + e.what(), line_no);
    }
    try {
      if (!have_header) {
        if (j.value("format", "") != kFormatName) {
          throw ParseError("not a pitchlab replay", line_no);
        }
        ReplayHeader& h = replay.header;
        h.version = j.at("version").get<int>();
        if (h.version != kReplayFormatVersion) {
          throw ParseError("unsupported replay version " +
                               std::to_string(h.version),
                           line_no);
        }
        h.env_fingerprint = j.at("env").get<std::string>();
        h.policy_ids = {j.at("policies").at(0).get<std::string>(),
                        j.at("policies").at(1).get<std::string>()};
        h.seed = j.at("seed").get<uint64_t>();
        h.config_hash = j.at("config_hash").get<std::string>();
        h.width = j.at("width").get<int>();
        h.height = j.at("height").get<int>();
        h.n_per_team = j.at("n_per_team").get<int>();
        h.keepers = j.at("keepers").get<bool>();
        if (expected && h.config_hash != ConfigHash(*expected)) {
          throw ConfigError("replay header config hash " + h.config_hash +
                            " does not match environment " +
                            ConfigHash(*expected));
        }
        have_header = true;
        continue;
      }
      StepRecord r = RecordFromJson(j, replay.header);
      if (r.state.step_index != static_cast<int>(replay.steps.size())) {
        throw ParseError("step index " + std::to_string(r.state.step_index) +
                             " breaks contiguity",
                         line_no);
      }
      replay.steps.push_back(std::move(r));
    } catch (const ParseError&) {
      throw;
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(std::string("invalid record: ") + e.what(), line_no);
    }
  }
  if (!have_header) throw ParseError("missing replay header", 1);
  return replay;
}

void WriteReplayFile(const Replay& replay, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write replay '" + path + "'");
  out << WriteReplay(replay);
}

Replay ReadReplayFile(const std::string& path, const MiniPitchConfig* expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read replay '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ReadReplay(ss.str(), expected);
}

std::pair<TeamId, int> EffectiveOwner(const RawObservation& s) {
  const BallState& b = s.ball;
  auto valid = [&](TeamId t, int p) {
    return p >= 0 && p < static_cast<int>(s.team(t).size());
  };
  if (b.owned_team != TeamId::kNone) {
    if (b.pass_team != TeamId::kNone || !valid(b.owned_team, b.owned_player)) {
      throw std::runtime_error("inconsistent ownership at step " +
                               std::to_string(s.step_index));
    }
    return {b.owned_team, b.owned_player};
  }
  if (b.owned_player != -1) {
    throw std::runtime_error("owner player without owner team at step " +
                             std::to_string(s.step_index));
  }
  if (b.pass_team != TeamId::kNone) {
    if (!valid(b.pass_team, b.pass_player)) {
      throw std::runtime_error("invalid passer at step " +
                               std::to_string(s.step_index));
    }
    return {b.pass_team, b.pass_player};
  }
  return {TeamId::kNone, -1};
}

MatchDecomposition Decompose(const Replay& replay) {
  MatchDecomposition out;
  const auto& steps = replay.steps;
  if (steps.empty()) return out;
  Subgame sub;
  sub.start = 0;
  Chain* chain = nullptr;
  bool node_open = false;
  for (int t = 0; t < static_cast<int>(steps.size()); ++t) {
    auto [team, player] = EffectiveOwner(steps[t].state);
    if (team == TeamId::kNone) {
      node_open = false;
    } else {
      if (chain == nullptr || chain->team != team) {
        sub.chains.push_back(Chain{team, {}});
        chain = &sub.chains.back();
        node_open = false;
      }
      if (node_open && chain->nodes.back().player == player) {
        chain->nodes.back().end = t;
      } else {
        chain->nodes.push_back(Node{team, player, t, t});
        node_open = true;
      }
    }
    bool last = t + 1 == static_cast<int>(steps.size());
    const auto& score = steps[t].state.score;
    if (!last && steps[t + 1].state.score != score) {
      const auto& next = steps[t + 1].state.score;
      int dl = next[0] - score[0], dr = next[1] - score[1];
      if (dl < 0 || dr < 0 || dl + dr != 1) {
        throw std::runtime_error("score stream is not monotone at step " +
                                 std::to_string(t));
      }
      sub.end = t;
      sub.scoring_team = dl == 1 ? TeamId::kLeft : TeamId::kRight;
      out.subgames.push_back(std::move(sub));
      sub = Subgame{};
      sub.start = t + 1;
      chain = nullptr;
      node_open = false;
    } else if (last) {
      sub.end = t;
      out.subgames.push_back(std::move(sub));
    }
  }
  return out;
}

MatchEvents DetectEvents(const Replay& replay,
                         const MatchDecomposition& decomposition) {
  MatchEvents out;
  EventCounts& c = out.counts;
  for (const Subgame& sub : decomposition.subgames) {
    for (size_t k = 0; k < sub.chains.size(); ++k) {
      const Chain& chain = sub.chains[k];
      const int team = Index(chain.team);
      for (size_t i = 0; i < chain.nodes.size(); ++i) {
        const Node& node = chain.nodes[i];
        c.possession_steps[team] += node.end - node.start + 1;
        if (i > 0) {
          ++c.passes[team];
          out.events.push_back({MatchEventKind::kPass, node.start, chain.team,
                                chain.nodes[i - 1].player, node.player});
        }
      }
      if (k > 0) {
        ++c.intercepts[team];
        const Node& gained = chain.nodes.front();
        out.events.push_back({MatchEventKind::kIntercept, gained.start,
                              chain.team, gained.player});
        const Chain& lost = sub.chains[k - 1];
        const Node& last = lost.nodes.back();
        const BallState& b = replay.steps[last.end].state.ball;
        if (b.owned_team == TeamId::kNone && b.pass_team == lost.team) {
          out.events.push_back({MatchEventKind::kPassFailed, gained.start,
                                lost.team, last.player});
        }
      }
    }
    if (sub.scoring_team != TeamId::kNone) {
      const int team = Index(sub.scoring_team);
      ++c.goals[team];
      int scorer = -1;
      for (const Event& e : replay.steps[sub.end].events) {
        if (e.kind == EventKind::kGoal) scorer = e.player;
      }
      out.events.push_back(
          {MatchEventKind::kGoal, sub.end, sub.scoring_team, scorer});
      if (!sub.chains.empty()) {
        const Chain& final_chain = sub.chains.back();
        if (final_chain.team == sub.scoring_team &&
            final_chain.nodes.size() >= 2) {
          const Node& assister = final_chain.nodes[final_chain.nodes.size() - 2];
          ++c.assists[team];
          out.events.push_back({MatchEventKind::kAssist, sub.end,
                                sub.scoring_team, assister.player,
                                final_chain.nodes.back().player});
        }
      }
    }
  }
  for (int t = 0; t < static_cast<int>(replay.steps.size()); ++t) {
    for (const Event& e : replay.steps[t].events) {
      if (e.kind == EventKind::kShot && e.team != TeamId::kNone) {
        ++c.shots[Index(e.team)];
        out.events.push_back({MatchEventKind::kShot, t, e.team, e.player});
      }
    }
  }
  std::stable_sort(out.events.begin(), out.events.end(),
                   [](const MatchEvent& a, const MatchEvent& b) {
                     return a.step < b.step;
                   });
  return out;
}

std::string DumpDecomposition(const MatchDecomposition& d) {
  std::ostringstream os;
  for (size_t s = 0; s < d.subgames.size(); ++s) {
    const Subgame& sub = d.subgames[s];
    os << "subgame " << s << " [" << sub.start << "," << sub.end
       << "] goal=" << TeamCode(sub.scoring_team) << "\n";
    for (size_t k = 0; k < sub.chains.size(); ++k) {
      const Chain& chain = sub.chains[k];
      os << "  chain " << k << " team=" << TeamCode(chain.team) << "\n";
      for (const Node& n : chain.nodes) {
        os << "    node player=" << n.player << " [" << n.start << ","
           << n.end << "]\n";
      }
    }
  }
  return os.str();
}

std::string EventCountsCsv(const EventCounts& c) {
  std::ostringstream os;
  os << "team,passes,intercepts,assists,shots,goals,possession_steps\n";
  for (int t = 0; t < 2; ++t) {
    os << (t == 0 ? "L" : "R") << ',' << c.passes[t] << ',' << c.intercepts[t]
       << ',' << c.assists[t] << ',' << c.shots[t] << ',' << c.goals[t] << ','
       << c.possession_steps[t] << '\n';
  }
  return os.str();
}

void StyleAccumulator::Add(const Replay& replay, TeamId team) {
  if (replay.steps.empty()) return;
  MatchDecomposition d = Decompose(replay);
  MatchEvents ev = DetectEvents(replay, d);
  const int me = Index(team), opp = 1 - me;
  const auto& final_score = replay.steps.back().state.score;
  ++matches_;
  if (final_score[me] > final_score[opp]) wins_ += 1.0;
  goals_ += ev.counts.goals[me];
  passes_ += ev.counts.passes[me];
  assists_ += ev.counts.assists[me];
  intercepts_ += ev.counts.intercepts[me];
  own_possession_ += ev.counts.possession_steps[me];
  all_possession_ += ev.counts.possession_steps[0] + ev.counts.possession_steps[1];
  for (const Subgame& sub : d.subgames) {
    for (const Chain& chain : sub.chains) {
      if (chain.team != team) continue;
      chain_nodes_ += chain.nodes.size();
      chains_ += 1;
    }
  }
}

StyleMetrics StyleAccumulator::Metrics() const {
  StyleMetrics m{};
  if (matches_ == 0) return m;
  double n = matches_;
  m[0] = wins_ / n;
  m[1] = goals_ / n;
  m[2] = passes_ / n;
  m[3] = assists_ / n;
  m[4] = intercepts_ / n;
  m[5] = all_possession_ > 0 ? own_possession_ / all_possession_ : 0.0;
  m[6] = chains_ > 0 ? chain_nodes_ / chains_ : 0.0;
  return m;
}

std::vector<StyleMetrics> NormalizeStyles(const std::vector<StyleMetrics>& raw) {
  std::vector<StyleMetrics> out(raw.size());
  for (size_t k = 0; k < kStyleMetricNames.size(); ++k) {
    double lo = 0, hi = 0;
    for (size_t i = 0; i < raw.size(); ++i) {
      if (i == 0 || raw[i][k] < lo) lo = raw[i][k];
      if (i == 0 || raw[i][k] > hi) hi = raw[i][k];
    }
    for (size_t i = 0; i < raw.size(); ++i) {
      out[i][k] = hi > lo ? (raw[i][k] - lo) / (hi - lo) : 0.5;
    }
  }
  return out;
}

std::string StyleRadarCsv(const std::vector<std::string>& ids,
                          const std::vector<StyleMetrics>& normalized) {
  std::ostringstream os;
  os << "policy";
  for (auto name : kStyleMetricNames) os << ',' << name;
  os << '\n';
  os << std::setprecision(6);
  for (size_t i = 0; i < ids.size(); ++i) {
    os << ids[i];
    for (double v : normalized[i]) os << ',' << v;
    os << '\n';
  }
  return os.str();
}

}  // namespace pitchlab
