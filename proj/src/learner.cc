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

#include "pitchlab/learner.h"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

namespace pitchlab {
namespace {

constexpr const char* kPolicyMagic = "pitchlab-policy";
constexpr int kPolicyFormatVersion = 1;

int Sign(int v) { return (v > 0) - (v < 0); }

int Chebyshev(GridVec a, GridVec b) {
  return std::max(std::abs(a.x - b.x), std::abs(a.y - b.y));
}

// Move action heading from `from` towards `to` in the team frame.
int MoveTowards(GridVec from, GridVec to) {
  int dx = Sign(to.x - from.x), dy = Sign(to.y - from.y);
  static constexpr int kByDir[3][3] = {
      // dy = -1, 0, +1 for dx = -1
      {static_cast<int>(Action::kTopLeft), static_cast<int>(Action::kLeft),
       static_cast<int>(Action::kBottomLeft)},
      {static_cast<int>(Action::kTop), static_cast<int>(Action::kIdle),
       static_cast<int>(Action::kBottom)},
      {static_cast<int>(Action::kTopRight), static_cast<int>(Action::kRight),
       static_cast<int>(Action::kBottomRight)},
  };
  return kByDir[dx + 1][dy + 1];
}

int FirstAllowed(std::initializer_list<int> prefs, const ActionMask& mask) {
  for (int a : prefs) {
    if (mask[a]) return a;
  }
  return static_cast<int>(Action::kIdle);
}

constexpr int A(Action a) { return static_cast<int>(a); }

std::string HexDouble(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

double ParseHexDouble(const std::string& s, int line) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') {
    throw ParseError("bad number '" + s + "'", line);
  }
  return v;
}

class IdleController : public TeamController {
 public:
  explicit IdleController(int n) : n_(n) {}
  std::vector<int> Act(const RawObservation&, TeamId) override {
    return std::vector<int>(n_, 0);
  }

 private:
  int n_;
};

class RandomController : public TeamController {
 public:
  RandomController(int n, uint64_t seed) : n_(n), rng_(seed) {}
  std::vector<int> Act(const RawObservation& world, TeamId team) override {
    std::vector<int> out(n_);
    ActionValues zeros{};
    for (int i = 0; i < n_; ++i) {
      out[i] = pitchlab::Act(zeros, ComputeActionMask(world, team, i), 1.0, rng_);
    }
    return out;
  }

 private:
  int n_;
  std::mt19937_64 rng_;
};

// Heuristic team. `delay` is the reaction time: decisions are made on the
// observation from `delay` steps ago and then filtered by the current mask.
class ScriptedController : public TeamController {
 public:
  ScriptedController(int n, int delay, bool shooter)
      : n_(n), delay_(delay), shooter_(shooter) {}

  std::vector<int> Act(const RawObservation& world, TeamId team) override {
    history_.push_back(TeamView(world, team));
    while (static_cast<int>(history_.size()) > delay_ + 1) history_.pop_front();
    const RawObservation& seen = history_.front();
    std::vector<int> out(n_);
    for (int i = 0; i < n_; ++i) {
      ActionMask now = ComputeActionMask(world, team, i);
      int a = shooter_ ? Shooter(seen, i, now) : Builtin(seen, i, now);
      out[i] = now[a] ? a : A(Action::kIdle);
    }
    return out;
  }

 private:
  static GridVec GoalTarget(const PitchGeometry& geo, GridVec me) {
    return {geo.width - 1, std::clamp(me.y, geo.goal_row_low(), geo.goal_row_high())};
  }

  static int Chaser(const RawObservation& v) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(v.left.size()); ++i) {
      if (Chebyshev(v.left[i].position, v.ball.position) <
          Chebyshev(v.left[best].position, v.ball.position)) {
        best = i;
      }
    }
    return best;
  }

  int Shooter(const RawObservation& v, int i, const ActionMask& mask) const {
    const PitchGeometry geo{v.width, v.height};
    const PlayerState& me = v.left[i];
    const BallState& b = v.ball;
    if (b.owned_team == TeamId::kLeft && b.owned_player == i) {
      if (geo.ShotDistance(me.position) <= 1) return FirstAllowed({A(Action::kShot)}, mask);
      return FirstAllowed({MoveTowards(me.position, GoalTarget(geo, me.position)),
                           A(Action::kShortPass), A(Action::kShot)},
                          mask);
    }
    if (b.owned_team == TeamId::kLeft) return A(Action::kIdle);
    if (i != Chaser(v)) return A(Action::kIdle);
    if (b.owned_team == TeamId::kRight && Chebyshev(me.position, b.position) <= 1) {
      return FirstAllowed({A(Action::kSliding), MoveTowards(me.position, b.position)}, mask);
    }
    return MoveTowards(me.position, b.position);
  }

  int Builtin(const RawObservation& v, int i, const ActionMask& mask) const {
    const PitchGeometry geo{v.width, v.height};
    const PlayerState& me = v.left[i];
    const BallState& b = v.ball;
    const int lane = ((i + 1) * v.height) / (n_ + 1);
    if (b.owned_team == TeamId::kLeft && b.owned_player == i) {
      int d = geo.ShotDistance(me.position);
      if (d <= 2) return FirstAllowed({A(Action::kShot), A(Action::kShortPass)}, mask);
      bool pressed = false;
      for (const auto& o : v.right) {
        if (o.position.x >= me.position.x && Chebyshev(o.position, me.position) <= 1) {
          pressed = true;
        }
      }
      bool mate_ahead = false;
      for (int j = 0; j < n_; ++j) {
        if (j != i && v.left[j].position.x > me.position.x) mate_ahead = true;
      }
      if (pressed && mate_ahead) {
        return FirstAllowed({A(Action::kShortPass), A(Action::kDribble)}, mask);
      }
      return FirstAllowed({MoveTowards(me.position, GoalTarget(geo, me.position)),
                           d <= 4 ? A(Action::kShot) : A(Action::kShortPass),
                           A(Action::kLongPass)},
                          mask);
    }
    if (b.owned_team == TeamId::kLeft) {
      GridVec spot{std::min(b.position.x + 2, v.width - 2), lane};
      return MoveTowards(me.position, spot);
    }
    if (i == Chaser(v)) {
      if (b.owned_team == TeamId::kRight && Chebyshev(me.position, b.position) <= 1) {
        return FirstAllowed({A(Action::kSliding), MoveTowards(me.position, b.position)}, mask);
      }
      return MoveTowards(me.position, b.position);
    }
    GridVec spot{std::max(b.position.x - 2, 1), lane};
    return MoveTowards(me.position, spot);
  }

  int n_;
  int delay_;
  bool shooter_;
  std::deque<RawObservation> history_;
};

class TabularController : public TeamController {
 public:
  TabularController(const std::vector<const QTable*>& tables, bool sharing,
                    int n, uint64_t seed, double epsilon)
      : tables_(tables), sharing_(sharing), n_(n), rng_(seed), epsilon_(epsilon) {}

  std::vector<int> Act(const RawObservation& world, TeamId team) override {
    std::vector<int> out(n_);
    static const ActionValues kZeros{};
    for (int i = 0; i < n_; ++i) {
      const QTable& t = *tables_[sharing_ ? 0 : i];
      auto it = t.find(StateKey(world, team, i, sharing_));
      out[i] = pitchlab::Act(it == t.end() ? kZeros : it->second,
                             ComputeActionMask(world, team, i), epsilon_, rng_);
    }
    return out;
  }

 private:
  std::vector<const QTable*> tables_;
  bool sharing_;
  int n_;
  std::mt19937_64 rng_;
  double epsilon_;
};

}  // namespace

std::string_view PolicyKindName(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kScripted: return "scripted";
    case PolicyKind::kTabular: return "tabular";
    case PolicyKind::kMatrixMixed: return "matrix_mixed";
  }
  return "?";
}

void Policy::Validate() const {
  if (id.empty() || id.find_first_of(" \t\n") != std::string::npos) {
    throw ConfigError("policy id must be a non-empty token");
  }
  if (kind == PolicyKind::kMatrixMixed) {
    double sum = 0;
    for (double p : mix) {
      if (!(p >= 0.0) || !std::isfinite(p)) {
        throw ConfigError("mixed strategy entries must be finite and nonnegative");
      }
      sum += p;
    }
    if (mix.empty() || std::abs(sum - 1.0) > 1e-9) {
      throw ConfigError("mixed strategy must sum to 1");
    }
  }
  if (kind == PolicyKind::kTabular) {
    if (tables.empty()) throw ConfigError("tabular policy without tables");
    for (const auto& t : tables) {
      if (!t) throw ConfigError("tabular policy with a missing table");
      for (const auto& [key, values] : *t) {
        for (double v : values) {
          if (!std::isfinite(v)) throw ConfigError("non-finite action value");
        }
      }
    }
  }
  if (kind == PolicyKind::kScripted) {
    if (script != "idle" && script != "random" && script != "shooter" &&
        script != "builtin:0" && script != "builtin:1" && script != "builtin:2") {
      throw ConfigError("unknown scripted policy '" + script + "'");
    }
  }
}

std::string Policy::Serialize() const {
  std::ostringstream os;
  os << kPolicyMagic << ' ' << kPolicyFormatVersion << '\n';
  os << "id " << id << '\n';
  os << "kind " << PolicyKindName(kind) << '\n';
  os << "version " << version << '\n';
  os << "env " << env_fingerprint << '\n';
  switch (kind) {
    case PolicyKind::kScripted:
      os << "script " << script << '\n';
      break;
    case PolicyKind::kMatrixMixed:
      os << "mix";
      for (double p : mix) os << ' ' << HexDouble(p);
      os << '\n';
      break;
    case PolicyKind::kTabular: {
      os << "sharing " << (parameter_sharing ? 1 : 0) << '\n';
      os << "tables " << tables.size() << '\n';
      for (const auto& t : tables) {
        std::vector<uint64_t> keys;
        keys.reserve(t->size());
        for (const auto& kv : *t) keys.push_back(kv.first);
        std::sort(keys.begin(), keys.end());
        os << "table " << keys.size() << '\n';
        for (uint64_t k : keys) {
          char buf[32];
          std::snprintf(buf, sizeof(buf), "%016" PRIx64, k);
          os << buf;
          for (double v : t->at(k)) os << ' ' << HexDouble(v);
          os << '\n';
        }
      }
      break;
    }
  }
  os << "end\n";
  return os.str();
}

Policy Policy::Deserialize(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  auto next = [&](const std::string& expect) {
    if (!std::getline(in, line)) {
      throw ParseError("unexpected end of policy, wanted '" + expect + "'", line_no + 1);
    }
    ++line_no;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key != expect) {
      throw ParseError("expected '" + expect + "', got '" + key + "'", line_no);
    }
    std::string rest;
    std::getline(ls, rest);
    if (!rest.empty() && rest[0] == ' ') rest.erase(0, 1);
    return rest;
  };
  std::string magic = next(kPolicyMagic);
  if (magic != std::to_string(kPolicyFormatVersion)) {
    throw ParseError("unsupported policy format version " + magic, line_no);
  }
  Policy p;
  p.id = next("id");
  std::string kind = next("kind");
  try {
    p.version = std::stoi(next("version"));
  } catch (const std::logic_error&) {
    throw ParseError("bad version", line_no);
  }
  p.env_fingerprint = next("env");
  if (kind == "scripted") {
    p.kind = PolicyKind::kScripted;
    p.script = next("script");
  } else if (kind == "matrix_mixed") {
    p.kind = PolicyKind::kMatrixMixed;
    std::istringstream ls(next("mix"));
    std::string tok;
    while (ls >> tok) p.mix.push_back(ParseHexDouble(tok, line_no));
  } else if (kind == "tabular") {
    p.kind = PolicyKind::kTabular;
    p.parameter_sharing = next("sharing") == "1";
    int count = 0;
    try {
      count = std::stoi(next("tables"));
    } catch (const std::logic_error&) {
      throw ParseError("bad table count", line_no);
    }
    for (int t = 0; t < count; ++t) {
      long long rows = 0;
      try {
        rows = std::stoll(next("table"));
      } catch (const std::logic_error&) {
        throw ParseError("bad row count", line_no);
      }
      auto table = std::make_shared<QTable>();
      table->reserve(rows);
      for (long long r = 0; r < rows; ++r) {
        if (!std::getline(in, line)) throw ParseError("truncated table", line_no + 1);
        ++line_no;
        std::istringstream ls(line);
        std::string key_text, tok;
        ls >> key_text;
        char* end = nullptr;
        uint64_t key = std::strtoull(key_text.c_str(), &end, 16);
        if (key_text.empty() || *end != '\0') throw ParseError("bad state key", line_no);
        ActionValues values{};
        for (int a = 0; a < kActionCount; ++a) {
          if (!(ls >> tok)) throw ParseError("short action-value row", line_no);
          values[a] = ParseHexDouble(tok, line_no);
        }
        (*table)[key] = values;
      }
      p.tables.push_back(std::move(table));
    }
  } else {
    throw ParseError("unknown policy kind '" + kind + "'", line_no);
  }
  next("end");
  try {
    p.Validate();
  } catch (const ConfigError& e) {
    throw ParseError(e.what(), line_no);
  }
  return p;
}

Policy ScriptedPolicy(const std::string& id, const std::string& script,
                      const std::string& env_fingerprint) {
  Policy p;
  p.id = id;
  p.kind = PolicyKind::kScripted;
  p.script = script;
  p.env_fingerprint = env_fingerprint;
  p.Validate();
  return p;
}

Policy MixedPolicy(const std::string& id, std::vector<double> mix,
                   const std::string& env_fingerprint) {
  Policy p;
  p.id = id;
  p.kind = PolicyKind::kMatrixMixed;
  p.mix = std::move(mix);
  p.env_fingerprint = env_fingerprint;
  p.Validate();
  return p;
}

int BestResponseRow(const MatrixGame& game, const std::vector<double>& col_mix) {
  if (static_cast<int>(col_mix.size()) != game.cols()) {
    throw std::invalid_argument("opponent mixture has " +
                                std::to_string(col_mix.size()) + " entries, game has " +
                                std::to_string(game.cols()) + " columns");
  }
  int best = 0;
  double best_v = 0;
  for (int r = 0; r < game.rows(); ++r) {
    double v = 0;
    for (int c = 0; c < game.cols(); ++c) v += game.at(r, c) * col_mix[c];
    if (r == 0 || v > best_v) {
      best = r;
      best_v = v;
    }
  }
  return best;
}

Policy BestResponseExact(const MatrixGame& game,
                         const std::vector<double>& col_mix,
                         const std::string& id) {
  std::vector<double> pure(game.rows(), 0.0);
  pure[BestResponseRow(game, col_mix)] = 1.0;
  return MixedPolicy(id, std::move(pure), game.Fingerprint());
}

double MixedValue(const MatrixGame& game, const std::vector<double>& row_mix,
                  const std::vector<double>& col_mix) {
  if (static_cast<int>(row_mix.size()) != game.rows() ||
      static_cast<int>(col_mix.size()) != game.cols()) {
    throw std::invalid_argument("mixture size does not match the game");
  }
  double v = 0;
  for (int r = 0; r < game.rows(); ++r) {
    for (int c = 0; c < game.cols(); ++c) v += row_mix[r] * game.at(r, c) * col_mix[c];
  }
  return v;
}

uint64_t StateKey(const RawObservation& obs, TeamId team, int agent,
                  bool with_identity) {
  const RawObservation v = TeamView(obs, team);
  const PlayerState& me = v.left[agent];
  const BallState& b = v.ball;
  int holder = 3;
  if (b.owned_team == TeamId::kLeft) holder = b.owned_player == agent ? 0 : 1;
  if (b.owned_team == TeamId::kRight) holder = 2;
  int bdx = std::clamp(b.position.x - me.position.x, -3, 3) + 3;
  int bdy = std::clamp(b.position.y - me.position.y, -3, 3) + 3;
  int nearest = 0;
  double best = 1e18;
  for (int i = 0; i < static_cast<int>(v.right.size()); ++i) {
    double d = std::hypot(v.right[i].position.x - me.position.x,
                          v.right[i].position.y - me.position.y);
    if (d < best) {
      best = d;
      nearest = i;
    }
  }
  int odx = std::clamp(v.right[nearest].position.x - me.position.x, -2, 2) + 2;
  int ody = std::clamp(v.right[nearest].position.y - me.position.y, -2, 2) + 2;
  int keeper = 0;
  if (v.keepers.size() == 2) {
    const PitchGeometry geo{v.width, v.height};
    keeper = v.keepers[1].position.y ==
             std::clamp(me.position.y, geo.goal_row_low(), geo.goal_row_high());
  }
  uint64_t k = static_cast<uint64_t>(me.position.x & 0xff);
  k = (k << 8) | static_cast<uint64_t>(me.position.y & 0xff);
  k = (k << 2) | static_cast<uint64_t>(holder);
  k = (k << 3) | static_cast<uint64_t>(bdx);
  k = (k << 3) | static_cast<uint64_t>(bdy);
  k = (k << 3) | static_cast<uint64_t>(odx);
  k = (k << 3) | static_cast<uint64_t>(ody);
  k = (k << 3) | static_cast<uint64_t>(v.game_mode);
  k = (k << 1) | static_cast<uint64_t>(keeper);
  k = (k << 5) | static_cast<uint64_t>(with_identity ? agent + 1 : 0);
  return k;
}

int Act(const ActionValues& values, const ActionMask& mask, double epsilon,
        std::mt19937_64& rng) {
  if (mask.count() == 0) throw std::logic_error("action mask allows nothing");
  if (epsilon > 0.0 &&
      std::uniform_real_distribution<double>(0.0, 1.0)(rng) < epsilon) {
    int pick = static_cast<int>(
        std::uniform_int_distribution<int>(0, mask.count() - 1)(rng));
    for (int a = 0; a < kActionCount; ++a) {
      if (mask[a] && pick-- == 0) return a;
    }
  }
  int best = -1;
  for (int a = 0; a < kActionCount; ++a) {
    if (mask[a] && (best < 0 || values[a] > values[best])) best = a;
  }
  return best;
}

int Act(const Policy& policy, const RawObservation& obs, TeamId team, int agent,
        double epsilon, std::mt19937_64& rng) {
  if (policy.kind != PolicyKind::kTabular) {
    throw std::invalid_argument("Act needs a tabular policy");
  }
  const QTable& t = *policy.tables[policy.parameter_sharing ? 0 : agent];
  auto it = t.find(StateKey(obs, team, agent, policy.parameter_sharing));
  static const ActionValues kZeros{};
  return Act(it == t.end() ? kZeros : it->second,
             ComputeActionMask(obs, team, agent), epsilon, rng);
}

void QUpdate(QTable& table, uint64_t key, int action, double reward,
             uint64_t next_key, const ActionMask& next_mask, bool terminal,
             double learning_rate, double gamma) {
  double target = reward;
  if (!terminal) {
    auto it = table.find(next_key);
    double best = 0.0;
    if (it != table.end()) {
      bool first = true;
      for (int a = 0; a < kActionCount; ++a) {
        if (!next_mask[a]) continue;
        if (first || it->second[a] > best) best = it->second[a];
        first = false;
      }
    }
    target += gamma * best;
  }
  double& q = table[key][action];
  q += learning_rate * (target - q);
}

void LearnerConfig::Validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning rate must be > 0");
  }
  for (double e : {epsilon_start, epsilon_end}) {
    if (!(e >= 0.0 && e <= 1.0)) throw ConfigError("epsilon must lie in [0,1]");
  }
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0,1]");
  if (step_budget < 0) throw ConfigError("step budget must be >= 0");
}

double LearnerConfig::EpsilonAt(long long steps_done) const {
  if (step_budget <= 0) return epsilon_end;
  double f = std::min(1.0, static_cast<double>(steps_done) / step_budget);
  return epsilon_start + (epsilon_end - epsilon_start) * f;
}

LearnerConfig LearnerConfig::FromKeyValues(const KeyValues& kv) {
  LearnerConfig c;
  for (const auto& [key, value] : kv) {
    if (key == "learning_rate") c.learning_rate = ParseDouble(key, value);
    else if (key == "epsilon_start") c.epsilon_start = ParseDouble(key, value);
    else if (key == "epsilon_end") c.epsilon_end = ParseDouble(key, value);
    else if (key == "gamma") c.gamma = ParseDouble(key, value);
    else if (key == "parameter_sharing") c.parameter_sharing = ParseBool(value);
    else if (key == "step_budget") c.step_budget = ParseInt(key, value);
    else throw ConfigError("unknown learner key '" + key + "'");
  }
  c.Validate();
  return c;
}

std::unique_ptr<TeamController> MakeController(const Policy& policy,
                                               int n_per_team, uint64_t seed,
                                               double epsilon) {
  switch (policy.kind) {
    case PolicyKind::kScripted:
      if (policy.script == "idle") return std::make_unique<IdleController>(n_per_team);
      if (policy.script == "random") {
        return std::make_unique<RandomController>(n_per_team, seed);
      }
      if (policy.script == "shooter") {
        return std::make_unique<ScriptedController>(n_per_team, 0, true);
      }
      if (policy.script.rfind("builtin:", 0) == 0) {
        int delay = policy.script.back() - '0';
        return std::make_unique<ScriptedController>(n_per_team, delay, false);
      }
      throw ConfigError("unknown scripted policy '" + policy.script + "'");
    case PolicyKind::kTabular: {
      std::vector<const QTable*> tables;
      for (const auto& t : policy.tables) tables.push_back(t.get());
      if (!policy.parameter_sharing &&
          static_cast<int>(tables.size()) != n_per_team) {
        throw ConfigError("policy has " + std::to_string(tables.size()) +
                          " tables for " + std::to_string(n_per_team) + " agents");
      }
      // The controller borrows the tables; keep the policy alive meanwhile.
      return std::make_unique<TabularController>(tables, policy.parameter_sharing,
                                                 n_per_team, seed, epsilon);
    }
    case PolicyKind::kMatrixMixed:
      break;
  }
  throw ConfigError("matrix-game policy cannot play MiniPitch");
}

Replay PlayEpisode(const MiniPitchConfig& config, uint64_t seed,
                   TeamController& left, TeamController& right,
                   const std::string& left_id, const std::string& right_id,
                   const std::function<void()>& on_step) {
  MiniPitch env(config);
  Replay replay;
  replay.header = MakeReplayHeader(config, seed, left_id, right_id);
  RawObservation obs = env.Reset(seed);
  replay.steps.reserve(config.max_steps + 1);
  while (true) {
    StepRecord rec;
    rec.state = obs;
    if (env.terminal()) {
      replay.steps.push_back(std::move(rec));
      break;
    }
    rec.actions[0] = left.Act(obs, TeamId::kLeft);
    rec.actions[1] = right.Act(obs, TeamId::kRight);
    if (on_step) on_step();
    StepResult r = env.Step(rec.actions);
    rec.events = std::move(r.events);
    rec.reward[0] = ScoringReward(rec.events, TeamId::kLeft);
    rec.reward[1] = -rec.reward[0];
    replay.steps.push_back(std::move(rec));
    obs = std::move(r.observation);
  }
  return replay;
}

TabularLearner::TabularLearner(LearnerConfig config, int n_per_team,
                               const Policy* prior)
    : config_(config), n_(n_per_team) {
  config_.Validate();
  tables_.resize(config_.parameter_sharing ? 1 : n_per_team);
  if (prior && prior->kind == PolicyKind::kTabular) {
    if (prior->parameter_sharing != config_.parameter_sharing ||
        prior->tables.size() != tables_.size()) {
      throw ConfigError("prior policy layout does not match the learner");
    }
    for (size_t i = 0; i < tables_.size(); ++i) tables_[i] = *prior->tables[i];
    version_ = prior->version;
  } else if (prior) {
    version_ = prior->version;
  }
}

int TabularLearner::TrainOnEpisode(const Replay& replay, TeamId team,
                                   const RewardConfig& rewards) {
  const int n = TransitionCount(replay);
  if (n == 0) return 0;
  RewardBreakdown r = ComputeRewards(replay, team, rewards);
  const bool share = config_.parameter_sharing;
  for (int i = 0; i < n_; ++i) {
    QTable& q = table(i);
    uint64_t next_key = StateKey(replay.steps[n].state, team, i, share);
    ActionMask next_mask = ComputeActionMask(replay.steps[n].state, team, i);
    for (int t = n - 1; t >= 0; --t) {
      const RawObservation& s = replay.steps[t].state;
      uint64_t key = StateKey(s, team, i, share);
      int action = replay.steps[t].actions[Index(team)][i];
      QUpdate(q, key, action, r.total[i][t], next_key, next_mask, t == n - 1,
              config_.learning_rate, config_.gamma);
      next_key = key;
      next_mask = ComputeActionMask(s, team, i);
    }
  }
  steps_ += n;
  return n;
}

std::unique_ptr<TeamController> TabularLearner::Controller(
    uint64_t seed, double epsilon) const {
  std::vector<const QTable*> tables;
  for (const auto& t : tables_) tables.push_back(&t);
  return std::make_unique<TabularController>(tables, config_.parameter_sharing,
                                             n_, seed, epsilon);
}

Policy TabularLearner::Snapshot(const std::string& id,
                                const std::string& env_fingerprint) {
  Policy p;
  p.id = id;
  p.kind = PolicyKind::kTabular;
  p.version = ++version_;
  p.env_fingerprint = env_fingerprint;
  p.parameter_sharing = config_.parameter_sharing;
  for (const auto& t : tables_) p.tables.push_back(std::make_shared<const QTable>(t));
  return p;
}

BestResponseResult TrainBestResponse(const MiniPitchConfig& env,
                                     const OpponentSampler& opponents,
                                     const LearnerConfig& config,
                                     const RewardConfig& rewards,
                                     const Policy* prior, const std::string& id,
                                     uint64_t seed) {
  config.Validate();
  rewards.Validate();
  BestResponseResult out;
  if (config.step_budget == 0) {
    if (!prior) throw ConfigError("zero step budget needs a prior policy");
    out.policy = *prior;
    return out;
  }
  TabularLearner learner(config, env.n_per_team, prior);
  std::mt19937_64 rng(DeriveSeed(seed, 0x6272));
  const std::string fp = env.Fingerprint();
  for (int ep = 0; learner.steps() < config.step_budget; ++ep) {
    const Policy& opp = opponents(rng);
    TeamId side = ep % 2 == 0 ? TeamId::kLeft : TeamId::kRight;
    uint64_t ep_seed = DeriveSeed(seed, 1, ep);
    auto me = learner.Controller(DeriveSeed(ep_seed, 2), learner.epsilon());
    auto them = MakeController(opp, env.n_per_team, DeriveSeed(ep_seed, 3));
    Replay r = side == TeamId::kLeft
                   ? PlayEpisode(env, ep_seed, *me, *them, id, opp.id)
                   : PlayEpisode(env, ep_seed, *them, *me, opp.id, id);
    learner.TrainOnEpisode(r, side, rewards);
    const auto& score = r.steps.back().state.score;
    int gd = score[Index(side)] - score[Index(Opponent(side))];
    out.episode_outcomes.push_back(Sign(gd));
    ++out.episodes;
  }
  out.steps = learner.steps();
  out.policy = learner.Snapshot(id, fp);
  out.policy.version = (prior ? prior->version : 0) + 1;
  return out;
}

}  // namespace pitchlab
