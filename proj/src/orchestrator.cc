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

#include "pitchlab/orchestrator.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace pitchlab {
namespace {

using Clock = std::chrono::steady_clock;
using nlohmann::json;

struct Cancelled {};

int Sign(double v) { return (v > 0) - (v < 0); }

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

// Portable uniform in [0, 1) from a 64-bit engine.
double Uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

int SampleIndex(const std::vector<double>& probs, double u) {
  double acc = 0.0;
  int last = -1;
  for (size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    last = static_cast<int>(i);
    acc += probs[i];
    if (u < acc) return last;
  }
  return last;  // rounding at the top end
}

std::string Fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string FileSafe(const std::string& id) {
  std::string out = id;
  for (char& c : out) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' &&
        c != '.') {
      c = '_';
    }
  }
  return out;
}

void WriteText(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

ExecutionMode ParseExecutionMode(const std::string& s) {
  if (s == "sync") return ExecutionMode::kSync;
  if (s == "async") return ExecutionMode::kAsync;
  throw ConfigError("mode must be sync or async, got '" + s + "'");
}

std::string_view ExecutionModeName(ExecutionMode mode) {
  return mode == ExecutionMode::kSync ? "sync" : "async";
}

// --- EnvSpec -------------------------------------------------------------------

EnvSpec EnvSpec::Matrix(MatrixGame game) {
  EnvSpec e;
  e.kind = Kind::kMatrix;
  e.matrix = std::move(game);
  return e;
}

EnvSpec EnvSpec::Pitch(MiniPitchConfig config) {
  config.Validate();
  EnvSpec e;
  e.kind = Kind::kMiniPitch;
  e.pitch = config;
  return e;
}

EnvSpec EnvSpec::Parse(const std::string& spec) {
  if (spec == "rps") return Matrix(MatrixGame::RockPaperScissors());
  if (spec.rfind("matrix:", 0) == 0) return Matrix(MatrixGame::FromFile(spec.substr(7)));
  if (spec == "minipitch") return Pitch(MiniPitchConfig{});
  if (spec.rfind("minipitch:", 0) == 0) {
    std::string rest = spec.substr(10);
    KeyValues kv;
    if (std::filesystem::exists(rest)) {
      kv = ReadKeyValueFile(rest);
    } else if (rest.find('=') != std::string::npos) {
      // Inline form: key=value,key=value.
      std::string text = rest;
      std::replace(text.begin(), text.end(), ',', '\n');
      kv = ParseKeyValues(text);
    } else {
      throw ConfigError("minipitch config file not found: " + rest);
    }
    return Pitch(MiniPitchConfig::FromKeyValues(kv));
  }
  throw ConfigError("unknown environment '" + spec +
                    "' (expected rps, matrix:FILE, minipitch or minipitch:CFG)");
}

bool EnvSpec::symmetric() const {
  if (kind != Kind::kMatrix || matrix.rows() != matrix.cols()) return false;
  for (int i = 0; i < matrix.rows(); ++i)
    for (int j = 0; j < matrix.cols(); ++j)
      if (matrix.at(i, j) != -matrix.at(j, i)) return false;
  return true;
}

int EnvSpec::strategy_size() const {
  if (kind != Kind::kMatrix) return 0;
  return symmetric() ? matrix.rows() : matrix.rows() + matrix.cols();
}

std::string EnvSpec::Fingerprint() const {
  return kind == Kind::kMatrix ? matrix.Fingerprint() : pitch.Fingerprint();
}

// --- Episode server ----------------------------------------------------------

void BufferConfig::Validate() const {
  if (capacity < 1) throw ConfigError("buffer capacity must be >= 1");
  if (reuse_cap < 1) throw ConfigError("buffer reuse cap must be >= 1");
  if (staleness < 0) throw ConfigError("buffer staleness bound must be >= 0");
}

int Episode::transitions() const { return TransitionCount(replay); }

int Episode::outcome() const {
  if (replay.steps.empty()) return 0;
  const auto& score = replay.steps.back().state.score;
  return Sign(score[Index(learner_team)] - score[Index(Opponent(learner_team))]);
}

EpisodeServer::EpisodeServer(BufferConfig config) : config_(config) {
  config_.Validate();
}

bool EpisodeServer::Push(Episode episode) {
  std::unique_lock lock(mu_);
  not_full_.wait(lock, [&] {
    return closed_ || static_cast<int>(slots_.size()) < config_.capacity;
  });
  if (closed_) return false;
  episode.id = next_id_++;
  slots_.push_back({std::make_shared<const Episode>(std::move(episode)), 0});
  ++audit_.pushed;
  not_empty_.notify_all();
  return true;
}

void EpisodeServer::EvictStaleLocked(int version) {
  const int oldest = version - config_.staleness;
  size_t before = slots_.size();
  std::erase_if(slots_, [&](const Slot& s) { return s.episode->policy_version < oldest; });
  audit_.evicted_stale += static_cast<long long>(before - slots_.size());
  if (before != slots_.size()) not_full_.notify_all();
}

std::vector<EpisodePtr> EpisodeServer::Take(size_t n, int version,
                                            ExecutionMode mode,
                                            std::chrono::milliseconds timeout) {
  if (n == 0) throw ConfigError("batch size must be >= 1");
  if (static_cast<int>(n) > config_.capacity) {
    throw ConfigError("batch size exceeds buffer capacity");
  }
  std::unique_lock lock(mu_);
  const auto deadline = Clock::now() + timeout;
  auto fresh = [&] {
    return static_cast<size_t>(std::count_if(slots_.begin(), slots_.end(), [&](const Slot& s) {
      return s.episode->policy_version == version;
    }));
  };
  std::vector<EpisodePtr> batch;
  auto record_use = [&](Slot& s) {
    ++s.uses;
    ++audit_.uses;
    int& c = audit_.use_counts[s.episode->id];
    ++c;
    audit_.max_reuse = std::max(audit_.max_reuse, c);
    if (s.episode->policy_version < version - config_.staleness) ++audit_.stale_uses;
    batch.push_back(s.episode);
  };
  if (mode == ExecutionMode::kSync) {
    // Anything older than the current version is stale by definition.
    const int keep_from = version;
    size_t before = slots_.size();
    std::erase_if(slots_, [&](const Slot& s) { return s.episode->policy_version < keep_from; });
    audit_.evicted_stale += static_cast<long long>(before - slots_.size());
    if (!not_empty_.wait_until(lock, deadline, [&] { return closed_ || fresh() >= n; })) {
      throw StarvationError("no complete batch within " +
                            std::to_string(timeout.count()) + " ms");
    }
    if (closed_ && fresh() < n) return {};
    std::vector<size_t> picked;
    for (size_t i = 0; i < slots_.size() && picked.size() < n; ++i)
      if (slots_[i].episode->policy_version == version) picked.push_back(i);
    for (size_t i : picked) record_use(slots_[i]);
    for (auto it = picked.rbegin(); it != picked.rend(); ++it)
      slots_.erase(slots_.begin() + static_cast<long>(*it));
    std::sort(batch.begin(), batch.end(), [](const EpisodePtr& a, const EpisodePtr& b) {
      return std::tie(a->worker, a->ordinal) < std::tie(b->worker, b->ordinal);
    });
  } else {
    EvictStaleLocked(version);
    if (!not_empty_.wait_until(lock, deadline, [&] {
          EvictStaleLocked(version);
          return closed_ || slots_.size() >= n;
        })) {
      throw StarvationError("no episodes within " + std::to_string(timeout.count()) + " ms");
    }
    if (closed_ && slots_.size() < n) return {};
    for (size_t i = 0; i < n; ++i) {
      Slot s = std::move(slots_.front());
      slots_.pop_front();
      record_use(s);
      if (s.uses < config_.reuse_cap) slots_.push_back(std::move(s));
    }
  }
  not_full_.notify_all();
  return batch;
}

void EpisodeServer::Close() {
  std::lock_guard lock(mu_);
  closed_ = true;
  not_full_.notify_all();
  not_empty_.notify_all();
}

bool EpisodeServer::closed() const {
  std::lock_guard lock(mu_);
  return closed_;
}

size_t EpisodeServer::size() const {
  std::lock_guard lock(mu_);
  return slots_.size();
}

BufferAudit EpisodeServer::Audit() const {
  std::lock_guard lock(mu_);
  return audit_;
}

// --- Policy server -------------------------------------------------------------

int PolicyServer::Publish(Policy policy, double epsilon) {
  std::lock_guard lock(mu_);
  latest_.policy = std::make_shared<const Policy>(std::move(policy));
  latest_.epsilon = epsilon;
  ++latest_.version;
  cv_.notify_all();
  return latest_.version;
}

PublishedPolicy PolicyServer::Latest() const {
  std::lock_guard lock(mu_);
  return latest_;
}

std::optional<PublishedPolicy> PolicyServer::WaitNewer(int seen, std::stop_token stop) {
  std::unique_lock lock(mu_);
  cv_.wait(lock, stop, [&] { return closed_ || latest_.version > seen; });
  if (closed_ || stop.stop_requested() || latest_.version <= seen) return std::nullopt;
  return latest_;
}

void PolicyServer::Close() {
  std::lock_guard lock(mu_);
  closed_ = true;
  cv_.notify_all();
}

// --- Rollouts --------------------------------------------------------------------

OpponentMix OpponentMix::PointMass(std::shared_ptr<const Policy> policy) {
  OpponentMix m;
  m.policies.push_back(std::move(policy));
  m.probabilities = {1.0};
  return m;
}

void OpponentMix::Validate() const {
  if (policies.empty() || policies.size() != probabilities.size()) {
    throw ConfigError("opponent mixture needs one probability per policy");
  }
  for (const auto& p : policies)
    if (!p) throw ConfigError("opponent mixture holds a null policy");
  ValidateMixedStrategy(probabilities, policies.size());
}

const Policy& OpponentMix::Sample(std::mt19937_64& rng) const {
  return *policies[SampleIndex(probabilities, Uniform01(rng))];
}

Episode PlayRolloutEpisode(const RolloutTask& task, int worker, long long ordinal,
                           const PublishedPolicy& learner, std::stop_token stop) {
  if (!learner.policy) throw ConfigError("no training policy published");
  const uint64_t ep_seed = DeriveSeed(task.seed, static_cast<uint64_t>(worker),
                                      static_cast<uint64_t>(ordinal));
  std::mt19937_64 rng(DeriveSeed(ep_seed, 1));
  const Policy& opp = task.opponents.Sample(rng);
  Episode ep;
  ep.worker = worker;
  ep.ordinal = ordinal;
  ep.policy_version = learner.version;
  ep.learner_team = (worker + ordinal) % 2 == 0 ? TeamId::kLeft : TeamId::kRight;
  ep.opponent_id = opp.id;
  const int n = task.env.n_per_team;
  auto me = MakeController(*learner.policy, n, DeriveSeed(ep_seed, 2), learner.epsilon);
  auto them = MakeController(opp, n, DeriveSeed(ep_seed, 3));
  auto on_step = [&] {
    if (stop.stop_requested()) throw Cancelled{};
    if (task.step_latency.count() > 0) std::this_thread::sleep_for(task.step_latency);
  };
  const std::string& me_id = learner.policy->id;
  ep.replay = ep.learner_team == TeamId::kLeft
                  ? PlayEpisode(task.env, ep_seed, *me, *them, me_id, opp.id, on_step)
                  : PlayEpisode(task.env, ep_seed, *them, *me, opp.id, me_id, on_step);
  return ep;
}

long long RunRolloutWorker(const RolloutTask& task, int worker, PolicyServer& policies,
                           EpisodeServer& episodes, ExecutionMode mode,
                           int per_version, std::stop_token stop) {
  long long ordinal = 0;
  auto quota_left = [&] { return task.episode_quota == 0 || ordinal < task.episode_quota; };
  auto play_and_push = [&](const PublishedPolicy& pub) {
    try {
      Episode ep = PlayRolloutEpisode(task, worker, ordinal, pub, stop);
      if (!episodes.Push(std::move(ep))) return false;
    } catch (const Cancelled&) {
      return false;
    }
    ++ordinal;
    return true;
  };
  if (mode == ExecutionMode::kAsync) {
    auto first = policies.WaitNewer(-1, stop);
    if (!first) return ordinal;
    while (!stop.stop_requested() && quota_left()) {
      if (!play_and_push(policies.Latest())) break;
    }
    return ordinal;
  }
  int seen = -1;
  while (!stop.stop_requested() && quota_left()) {
    auto pub = policies.WaitNewer(seen, stop);
    if (!pub) break;
    seen = pub->version;
    for (int i = 0; i < per_version && quota_left(); ++i) {
      if (!play_and_push(*pub)) return ordinal;
    }
  }
  return ordinal;
}

// --- Training loop ---------------------------------------------------------------

void StopCriterion::Validate() const {
  if (max_steps < 0) throw ConfigError("stop.max_steps must be >= 0");
  if (window < 1) throw ConfigError("stop.window must be >= 1");
  if (!(target_win_rate >= 0.0 && target_win_rate <= 1.0)) {
    throw ConfigError("stop.target_win_rate must be in [0, 1]");
  }
}

void TrainTask::Validate() const {
  env.Validate();
  opponents.Validate();
  rewards.Validate();
  stop.Validate();
  buffer.Validate();
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (batch_episodes < 1) throw ConfigError("batch_episodes must be >= 1");
  if (batch_episodes > buffer.capacity) {
    throw ConfigError("batch_episodes exceeds buffer capacity");
  }
  if (step_latency.count() < 0) throw ConfigError("step latency must be >= 0");
  if (starvation_timeout.count() <= 0) throw ConfigError("starvation timeout must be > 0");
}

TrainResult RunTrainingLoop(const TrainTask& task) {
  task.Validate();
  LearnerConfig lc = task.learner;
  lc.step_budget = std::max<long long>(1, task.stop.max_steps);
  lc.Validate();
  const std::string fp = task.env.Fingerprint();
  TrainResult out;
  TabularLearner learner(lc, task.env.n_per_team, task.prior.get());
  if (task.stop.max_steps == 0) {
    if (task.prior) {
      out.policy = *task.prior;
    } else {
      out.policy = learner.Snapshot(task.policy_id, fp);
      out.policy.version = 0;
    }
    return out;
  }

  EpisodeServer buffer(task.buffer);
  PolicyServer server;
  RolloutTask rollout{task.env, task.opponents, 0, task.seed, task.step_latency};
  int version = server.Publish(learner.Snapshot(task.policy_id, fp), learner.epsilon());

  std::atomic<long long> produced{0};
  std::vector<std::jthread> workers;
  for (int w = 0; w < task.workers; ++w) {
    int share = task.batch_episodes / task.workers + (w < task.batch_episodes % task.workers);
    workers.emplace_back([&, w, share](std::stop_token st) {
      produced += RunRolloutWorker(rollout, w, server, buffer, task.mode, share, st);
    });
  }
  auto shutdown = [&] {
    for (auto& t : workers) t.request_stop();
    buffer.Close();
    server.Close();
    workers.clear();  // joins
  };

  const auto start = Clock::now();
  std::deque<int> window;
  int window_wins = 0;
  std::set<uint64_t> trained;
  try {
    while (out.samples < task.stop.max_steps) {
      auto batch = buffer.Take(static_cast<size_t>(task.batch_episodes), version,
                               task.mode, task.starvation_timeout);
      if (batch.empty()) break;
      for (const auto& ep : batch) {
        if (trained.insert(ep->id).second) {
          out.opponent_log.push_back(ep->opponent_id);
          int win = ep->outcome() > 0;
          window.push_back(win);
          window_wins += win;
          if (static_cast<int>(window.size()) > task.stop.window) {
            window_wins -= window.front();
            window.pop_front();
          }
        }
        out.samples += learner.TrainOnEpisode(ep->replay, ep->learner_team, task.rewards);
      }
      ++out.updates;
      version = server.Publish(learner.Snapshot(task.policy_id, fp), learner.epsilon());
      double win_rate = window.empty() ? 0.0 : static_cast<double>(window_wins) / window.size();
      out.metrics.push_back({out.samples, win_rate, Seconds(start)});
      if (static_cast<int>(window.size()) >= task.stop.window &&
          win_rate >= task.stop.target_win_rate) {
        out.reached_target = true;
        break;
      }
    }
  } catch (...) {
    shutdown();
    throw;
  }
  out.wall_seconds = Seconds(start);
  shutdown();
  out.episodes_produced = produced.load();
  out.episodes_trained = static_cast<long long>(trained.size());
  out.audit = buffer.Audit();
  out.policy = learner.Snapshot(task.policy_id, fp);
  out.policy.version = (task.prior ? task.prior->version : 0) + 1;
  return out;
}

// --- Evaluation ------------------------------------------------------------------

namespace {

// Row and column halves of a matrix policy.
std::pair<std::vector<double>, std::vector<double>> MatrixRoles(const EnvSpec& env,
                                                                 const Policy& p) {
  if (p.kind != PolicyKind::kMatrixMixed) {
    throw ConfigError("policy '" + p.id + "' is not a matrix-game policy");
  }
  if (static_cast<int>(p.mix.size()) != env.strategy_size()) {
    throw ConfigError("policy '" + p.id + "' has " + std::to_string(p.mix.size()) +
                      " mixture entries, the game needs " +
                      std::to_string(env.strategy_size()));
  }
  if (env.symmetric()) return {p.mix, p.mix};
  const int m = env.matrix.rows();
  std::vector<double> row(p.mix.begin(), p.mix.begin() + m);
  std::vector<double> col(p.mix.begin() + m, p.mix.end());
  double rs = std::accumulate(row.begin(), row.end(), 0.0);
  double cs = std::accumulate(col.begin(), col.end(), 0.0);
  if (rs <= 0 || cs <= 0) throw ConfigError("policy '" + p.id + "' has an empty role");
  for (double& x : row) x /= rs;
  for (double& x : col) x /= cs;
  return {row, col};
}

// Stored pair policies keep each half summing to 1/2.
Policy PairPolicy(const std::string& id, const std::vector<double>& row,
                  const std::vector<double>& col, const std::string& fp) {
  std::vector<double> mix;
  for (double x : row) mix.push_back(0.5 * x);
  for (double x : col) mix.push_back(0.5 * x);
  return MixedPolicy(id, mix, fp);
}

// Exact payoff of `a` against `b`, symmetrised over roles when needed.
double ExactMatrixPayoff(const EnvSpec& env, const Policy& a, const Policy& b) {
  auto [ar, ac] = MatrixRoles(env, a);
  auto [br, bc] = MatrixRoles(env, b);
  if (env.symmetric()) return MixedValue(env.matrix, ar, br);
  return 0.5 * (MixedValue(env.matrix, ar, bc) - MixedValue(env.matrix, br, ac));
}

}  // namespace

EvalResult Evaluate(const EnvSpec& env, const Policy& a, const Policy& b, int k,
                    uint64_t seed, bool keep_replays) {
  if (k <= 0) throw ConfigError("evaluation needs k >= 1 episodes");
  EvalResult out;
  out.episodes = k;
  int wins = 0, draws = 0, losses = 0;
  for (int e = 0; e < k; ++e) {
    const bool a_first = e % 2 == 0;
    const uint64_t pair_seed = DeriveSeed(seed, static_cast<uint64_t>(e / 2));
    double gd = 0.0;
    if (env.kind == EnvSpec::Kind::kMatrix) {
      const Policy& row_p = a_first ? a : b;
      const Policy& col_p = a_first ? b : a;
      std::mt19937_64 rng(pair_seed);
      double u_row = Uniform01(rng), u_col = Uniform01(rng);
      int r = SampleIndex(MatrixRoles(env, row_p).first, u_row);
      int c = SampleIndex(MatrixRoles(env, col_p).second, u_col);
      double v = env.matrix.at(r, c);
      gd = a_first ? v : -v;
    } else {
      const int n = env.pitch.n_per_team;
      const Policy& left_p = a_first ? a : b;
      const Policy& right_p = a_first ? b : a;
      auto left = MakeController(left_p, n, DeriveSeed(pair_seed, 0));
      auto right = MakeController(right_p, n, DeriveSeed(pair_seed, 1));
      Replay r = PlayEpisode(env.pitch, pair_seed, *left, *right, left_p.id, right_p.id);
      const auto& score = r.steps.back().state.score;
      int diff = score[0] - score[1];
      gd = a_first ? diff : -diff;
      if (keep_replays) out.replays.push_back(std::move(r));
    }
    out.goal_differences.push_back(gd);
    wins += gd > 0;
    draws += gd == 0;
    losses += gd < 0;
  }
  out.win_rate = static_cast<double>(wins) / k;
  out.draw_rate = static_cast<double>(draws) / k;
  out.loss_rate = static_cast<double>(losses) / k;
  out.mean_goal_difference =
      std::accumulate(out.goal_differences.begin(), out.goal_differences.end(), 0.0) / k;
  return out;
}

CrossPlay CrossPlayMatrix(const EnvSpec& env, const std::vector<const Policy*>& policies,
                          int k, uint64_t seed) {
  const size_t n = policies.size();
  CrossPlay cp{Matrix(n, std::vector<double>(n, 0.0)), Matrix(n, std::vector<double>(n, 0.0))};
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i; j < n; ++j) {
      EvalResult r = Evaluate(env, *policies[i], *policies[j], k, DeriveSeed(seed, i, j));
      if (i == j) {
        // Self-play: the two seats are the same policy.
        cp.win[i][i] = 0.5 * (r.win_rate + r.loss_rate);
        cp.draw[i][i] = r.draw_rate;
      } else {
        cp.win[i][j] = r.win_rate;
        cp.win[j][i] = r.loss_rate;
        cp.draw[i][j] = cp.draw[j][i] = r.draw_rate;
      }
    }
  }
  return cp;
}

std::string CrossPlayCsv(const std::vector<std::string>& ids, const CrossPlay& cp) {
  std::ostringstream os;
  os << "matrix,policy";
  for (const auto& id : ids) os << ',' << id;
  os << '\n';
  for (const auto& [name, m] : {std::pair{"win", &cp.win}, std::pair{"draw", &cp.draw}}) {
    for (size_t i = 0; i < ids.size(); ++i) {
      os << name << ',' << ids[i];
      for (double v : (*m)[i]) os << ',' << Fmt(v);
      os << '\n';
    }
  }
  return os.str();
}

std::vector<StyleMetrics> StyleRadar(const MiniPitchConfig& env,
                                     const std::vector<const Policy*>& policies, int k,
                                     uint64_t seed) {
  if (policies.empty()) throw ConfigError("style radar needs at least one policy");
  EnvSpec spec = EnvSpec::Pitch(env);
  std::vector<StyleMetrics> raw;
  for (size_t i = 0; i < policies.size(); ++i) {
    StyleAccumulator acc;
    for (size_t j = 0; j < policies.size(); ++j) {
      if (j == i && policies.size() > 1) continue;
      EvalResult r = Evaluate(spec, *policies[i], *policies[j], k,
                              DeriveSeed(seed, std::min(i, j), std::max(i, j)), true);
      for (size_t e = 0; e < r.replays.size(); ++e)
        acc.Add(r.replays[e], e % 2 == 0 ? TeamId::kLeft : TeamId::kRight);
    }
    raw.push_back(acc.Metrics());
  }
  return NormalizeStyles(raw);
}

// --- Population ------------------------------------------------------------------

std::string_view RoleName(MemberRole role) {
  switch (role) {
    case MemberRole::kBuiltIn: return "builtin";
    case MemberRole::kBestResponse: return "best_response";
    case MemberRole::kMainAgent: return "main";
    case MemberRole::kExploiter: return "exploiter";
  }
  return "?";
}

MemberRole ParseRole(const std::string& s) {
  for (MemberRole r : {MemberRole::kBuiltIn, MemberRole::kBestResponse, MemberRole::kMainAgent, MemberRole::kExploiter})
    if (RoleName(r) == s) return r;
  throw ConfigError("unknown role '" + s + "'");
}

Population::Population() : payoff_(std::make_shared<PayoffTable>()) {}

int Population::NextGeneration(MemberRole role) const {
  return static_cast<int>(std::count_if(members_.begin(), members_.end(),
                                        [&](const PolicyHandle& h) { return h.role == role; }));
}

int Population::IndexOf(const std::string& id) const {
  for (size_t i = 0; i < members_.size(); ++i)
    if (members_[i].id == id) return static_cast<int>(i);
  return -1;
}

int Population::Add(PolicyHandle handle) {
  if (!handle.policy) throw ConfigError("population member '" + handle.id + "' has no policy");
  if (handle.id.empty()) throw ConfigError("population member needs an id");
  if (IndexOf(handle.id) >= 0) throw ConfigError("duplicate population id '" + handle.id + "'");
  if (handle.generation != NextGeneration(handle.role)) {
    throw ConfigError("generation " + std::to_string(handle.generation) + " for '" +
                      handle.id + "' is not the next " + std::string(RoleName(handle.role)) +
                      " generation");
  }
  int idx = payoff_->Add(handle.id);
  members_.push_back(std::move(handle));
  return idx;
}

// --- Pipeline config -------------------------------------------------------------

void PipelineConfig::Validate() const {
  if (generations < 0) throw ConfigError("generations must be >= 0");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (batch_episodes < 1) throw ConfigError("batch_episodes must be >= 1");
  if (payoff_episodes < 1) throw ConfigError("payoff_episodes must be >= 1");
  if (!(nash_tol >= 0)) throw ConfigError("nash.tol must be >= 0");
  if (nash_max_iterations < 1) throw ConfigError("nash.max_iterations must be >= 1");
  if (keep_replays < 0) throw ConfigError("keep_replays must be >= 0");
  if (step_latency.count() < 0) throw ConfigError("step_latency_ms must be >= 0");
  buffer.Validate();
  stop.Validate();
  learner.Validate();
  rewards.Validate();
  if (batch_episodes > buffer.capacity) {
    throw ConfigError("batch_episodes exceeds buffer capacity");
  }
}

PipelineConfig PipelineConfig::FromKeyValues(const KeyValues& kv) {
  static const std::set<std::string> kKnown = {
      "generations", "seed", "mode", "workers", "batch_episodes", "buffer.capacity",
      "buffer.reuse", "buffer.staleness", "stop.max_steps", "stop.target_win_rate",
      "stop.window", "payoff_episodes", "metric", "nash.tol", "nash.max_iterations",
      "step_latency_ms", "initial", "initial_actions", "keep_replays", "env", "pipeline"};
  for (const auto& [key, value] : kv) {
    if (kKnown.count(key) || key.rfind("learner.", 0) == 0 || key.rfind("reward.", 0) == 0 ||
        key.rfind("env.", 0) == 0) {
      continue;
    }
    throw ConfigError("unknown pipeline key '" + key + "'");
  }
  PipelineConfig c;
  auto get = [&](const char* key) -> const std::string* {
    auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  if (auto v = get("generations")) c.generations = static_cast<int>(ParseInt("generations", *v));
  if (auto v = get("seed")) c.seed = static_cast<uint64_t>(ParseInt("seed", *v));
  if (auto v = get("mode")) c.mode = ParseExecutionMode(*v);
  if (auto v = get("workers")) c.workers = static_cast<int>(ParseInt("workers", *v));
  if (auto v = get("batch_episodes")) {
    c.batch_episodes = static_cast<int>(ParseInt("batch_episodes", *v));
  }
  if (auto v = get("buffer.capacity")) {
    c.buffer.capacity = static_cast<int>(ParseInt("buffer.capacity", *v));
  }
  if (auto v = get("buffer.reuse")) c.buffer.reuse_cap = static_cast<int>(ParseInt("buffer.reuse", *v));
  if (auto v = get("buffer.staleness")) {
    c.buffer.staleness = static_cast<int>(ParseInt("buffer.staleness", *v));
  }
  if (auto v = get("stop.max_steps")) c.stop.max_steps = ParseInt("stop.max_steps", *v);
  if (auto v = get("stop.target_win_rate")) {
    c.stop.target_win_rate = ParseDouble("stop.target_win_rate", *v);
  }
  if (auto v = get("stop.window")) c.stop.window = static_cast<int>(ParseInt("stop.window", *v));
  if (auto v = get("payoff_episodes")) {
    c.payoff_episodes = static_cast<int>(ParseInt("payoff_episodes", *v));
  }
  if (auto v = get("metric")) {
    if (*v == "win_rate") {
      c.metric = PayoffMetric::kWinRate;
    } else if (*v == "goal_difference") {
      c.metric = PayoffMetric::kGoalDifference;
    } else {
      throw ConfigError("metric must be win_rate or goal_difference");
    }
  }
  if (auto v = get("nash.tol")) c.nash_tol = ParseDouble("nash.tol", *v);
  if (auto v = get("nash.max_iterations")) {
    c.nash_max_iterations = ParseInt("nash.max_iterations", *v);
  }
  if (auto v = get("step_latency_ms")) {
    c.step_latency = std::chrono::microseconds(
        static_cast<long long>(std::llround(1000.0 * ParseDouble("step_latency_ms", *v))));
  }
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) out.push_back(item);
    }
    return out;
  };
  if (auto v = get("initial")) c.initial_scripts = split(*v);
  if (auto v = get("initial_actions")) {
    c.initial_actions.clear();
    for (const auto& s : split(*v)) {
      c.initial_actions.push_back(static_cast<int>(ParseInt("initial_actions", s)));
    }
  }
  if (auto v = get("keep_replays")) c.keep_replays = static_cast<int>(ParseInt("keep_replays", *v));
  KeyValues lk = Section(kv, "learner.");
  if (!lk.empty()) c.learner = LearnerConfig::FromKeyValues(lk);
  KeyValues rk = Section(kv, "reward.");
  if (!rk.empty()) c.rewards = RewardConfig::FromKeyValues(rk);
  c.Validate();
  return c;
}

// --- Pipelines -------------------------------------------------------------------

EloTable PipelineResult::Elo() const { return EloFromLog(match_log); }

Population InitialPopulation(const EnvSpec& env, const PipelineConfig& config) {
  Population pop;
  const std::string fp = env.Fingerprint();
  if (env.kind == EnvSpec::Kind::kMiniPitch) {
    for (const auto& script : config.initial_scripts) {
      auto p = std::make_shared<Policy>(ScriptedPolicy(script, script, fp));
      pop.Add({script, MemberRole::kBuiltIn, pop.NextGeneration(MemberRole::kBuiltIn), p, {}});
    }
    return pop;
  }
  const int m = env.matrix.rows(), n = env.matrix.cols();
  for (int a : config.initial_actions) {
    if (a < 0 || a >= m) throw ConfigError("initial action " + std::to_string(a) + " out of range");
    std::string id = "pure_" + std::to_string(a);
    std::shared_ptr<Policy> p;
    if (env.symmetric()) {
      std::vector<double> mix(m, 0.0);
      mix[a] = 1.0;
      p = std::make_shared<Policy>(MixedPolicy(id, mix, fp));
    } else {
      std::vector<double> row(m, 0.0), col(n, 0.0);
      row[a] = 1.0;
      col[a % n] = 1.0;
      p = std::make_shared<Policy>(PairPolicy(id, row, col, fp));
    }
    pop.Add({id, MemberRole::kBuiltIn, pop.NextGeneration(MemberRole::kBuiltIn), p, {}});
  }
  return pop;
}

double PopulationExploitability(const EnvSpec& env, const Population& pop,
                                const std::vector<double>& weights) {
  if (env.kind != EnvSpec::Kind::kMatrix) {
    throw ConfigError("exploitability is only defined for matrix games");
  }
  if (static_cast<int>(weights.size()) != pop.size()) {
    throw ConfigError("one weight per population member is required");
  }
  std::vector<double> row(env.matrix.rows(), 0.0), col(env.matrix.cols(), 0.0);
  for (int i = 0; i < pop.size(); ++i) {
    auto [r, c] = MatrixRoles(env, *pop.member(i).policy);
    for (size_t x = 0; x < r.size(); ++x) row[x] += weights[i] * r[x];
    for (size_t x = 0; x < c.size(); ++x) col[x] += weights[i] * c[x];
  }
  Matrix a(env.matrix.rows(), std::vector<double>(env.matrix.cols()));
  for (int i = 0; i < env.matrix.rows(); ++i)
    for (int j = 0; j < env.matrix.cols(); ++j) a[i][j] = env.matrix.at(i, j);
  return Exploitability(a, row, col);
}

namespace {

class Pipeline {
 public:
  Pipeline(const EnvSpec& env, Population population, const PipelineConfig& config)
      : env_(env), config_(config) {
    config_.Validate();
    if (env_.kind == EnvSpec::Kind::kMiniPitch) env_.pitch.Validate();
    result_.population = std::move(population);
    if (result_.population.size() == 0) throw ConfigError("the initial population is empty");
    for (int i = 0; i < pop().size(); ++i)
      for (int j = 0; j < i; ++j)
        if (pop().payoff().entry(i, j).games == 0) Simulate(i, j, -1);
  }

  Population& pop() { return result_.population; }

  // Refresh the payoff table with the new member against everyone else.
  void AddAndSimulate(PolicyHandle handle, int generation) {
    int idx = pop().Add(std::move(handle));
    for (int j = 0; j < idx; ++j) Simulate(idx, j, generation);
  }

  std::vector<double> MetaSolve() {
    NashResult nash = SolveNash(pop().payoff().Payoffs(config_.metric), config_.nash_tol,
                                config_.nash_max_iterations);
    return nash.row;
  }

  OpponentMix Mixture(const std::vector<double>& weights) const {
    OpponentMix mix;
    for (int i = 0; i < result_.population.size(); ++i) {
      if (weights[i] <= 1e-12) continue;
      mix.policies.push_back(result_.population.member(i).policy);
      mix.probabilities.push_back(weights[i]);
    }
    double s = std::accumulate(mix.probabilities.begin(), mix.probabilities.end(), 0.0);
    for (double& p : mix.probabilities) p /= s;
    return mix;
  }

  // Best response of the learner to `opponents`. Matrix games use the exact
  // oracle; MiniPitch trains a tabular policy through the training loop.
  PolicyHandle BestResponse(const std::string& id, MemberRole role, const OpponentMix& opponents,
                            std::shared_ptr<const Policy> prior, uint64_t seed) {
    PolicyHandle h;
    h.id = id;
    h.role = role;
    h.generation = pop().NextGeneration(role);
    const std::string fp = env_.Fingerprint();
    if (env_.kind == EnvSpec::Kind::kMatrix) {
      const int m = env_.matrix.rows(), n = env_.matrix.cols();
      std::vector<double> row_agg(m, 0.0), col_agg(n, 0.0);
      for (size_t i = 0; i < opponents.policies.size(); ++i) {
        auto [r, c] = MatrixRoles(env_, *opponents.policies[i]);
        for (int x = 0; x < m; ++x) row_agg[x] += opponents.probabilities[i] * r[x];
        for (int x = 0; x < n; ++x) col_agg[x] += opponents.probabilities[i] * c[x];
        h.opponent_log.push_back(opponents.policies[i]->id);
      }
      int br_row = BestResponseRow(env_.matrix, col_agg);
      if (env_.symmetric()) {
        std::vector<double> mix(m, 0.0);
        mix[br_row] = 1.0;
        h.policy = std::make_shared<Policy>(MixedPolicy(id, mix, fp));
      } else {
        int br_col = 0;
        double best = 0.0;
        for (int c = 0; c < n; ++c) {
          double v = 0.0;
          for (int r = 0; r < m; ++r) v += row_agg[r] * env_.matrix.at(r, c);
          if (c == 0 || v < best) {
            best = v;
            br_col = c;
          }
        }
        std::vector<double> row(m, 0.0), col(n, 0.0);
        row[br_row] = 1.0;
        col[br_col] = 1.0;
        h.policy = std::make_shared<Policy>(PairPolicy(id, row, col, fp));
      }
      return h;
    }
    TrainTask task;
    task.env = env_.pitch;
    task.opponents = opponents;
    task.learner = config_.learner;
    task.rewards = config_.rewards;
    task.stop = config_.stop;
    task.mode = config_.mode;
    task.workers = config_.workers;
    task.batch_episodes = config_.batch_episodes;
    task.buffer = config_.buffer;
    task.step_latency = config_.step_latency;
    task.seed = seed;
    task.policy_id = id;
    task.prior = std::move(prior);
    TrainResult tr = RunTrainingLoop(task);
    tr.policy.id = id;
    h.policy = std::make_shared<Policy>(std::move(tr.policy));
    h.opponent_log = std::move(tr.opponent_log);
    for (const auto& row : tr.metrics) result_.metrics.emplace_back(id, row);
    return h;
  }

  void Record(int generation, std::vector<std::string> added, std::vector<std::string> support,
              std::vector<double> meta, double exploitability) {
    result_.history.push_back(
        {generation, std::move(added), std::move(support), std::move(meta), exploitability});
  }

  std::vector<std::string> Ids() const { return result_.population.payoff().ids(); }

  double Exploit(const std::vector<double>& weights) const {
    if (env_.kind != EnvSpec::Kind::kMatrix) return std::nan("");
    return PopulationExploitability(env_, result_.population, weights);
  }

  PipelineResult Finish() {
    NashResult nash = SolveNash(pop().payoff().Payoffs(config_.metric), config_.nash_tol,
                                config_.nash_max_iterations);
    result_.final_exploitability = Exploit(nash.row);
    result_.final_nash = std::move(nash);
    return std::move(result_);
  }

  std::shared_ptr<const Policy> Latest(MemberRole role) const {
    std::shared_ptr<const Policy> out;
    for (const auto& m : result_.population.members())
      if (m.role == role) out = m.policy;
    return out;
  }

  const PipelineConfig& config() const { return config_; }
  const EnvSpec& env() const { return env_; }

 private:
  void Simulate(int i, int j, int generation) {
    const PolicyHandle& a = pop().member(i);
    const PolicyHandle& b = pop().member(j);
    if (env_.kind == EnvSpec::Kind::kMatrix) {
      double v = ExactMatrixPayoff(env_, *a.policy, *b.policy);
      pop().payoff().SetExact(i, j, v);
      result_.match_log.push_back({clock_++, a.id, b.id, v > 0 ? 1.0 : (v < 0 ? 0.0 : 0.5)});
      return;
    }
    uint64_t seed = DeriveSeed(config_.seed, 0x5e11, HashCombine(Fnv1a(a.id), Fnv1a(b.id)));
    EvalResult r = Evaluate(env_, *a.policy, *b.policy, config_.payoff_episodes, seed,
                            config_.keep_replays > 0);
    for (size_t e = 0; e < r.goal_differences.size(); ++e) {
      double gd = r.goal_differences[e];
      pop().payoff().Record(i, j, gd);
      result_.match_log.push_back({clock_++, a.id, b.id, gd > 0 ? 1.0 : (gd < 0 ? 0.0 : 0.5)});
    }
    for (int e = 0; e < std::min<int>(config_.keep_replays, r.replays.size()); ++e) {
      std::string match_id = "g" + std::to_string(generation) + "_" + a.id + "_vs_" + b.id +
                             "_" + std::to_string(e);
      result_.replays.emplace(FileSafe(match_id), std::move(r.replays[e]));
    }
  }

  EnvSpec env_;
  PipelineConfig config_;
  PipelineResult result_;
  int64_t clock_ = 0;
};

}  // namespace

PipelineResult RunPsro(const EnvSpec& env, Population population, const PipelineConfig& config) {
  Pipeline p(env, std::move(population), config);
  for (int g = 0; g < config.generations; ++g) {
    std::vector<double> sigma = p.MetaSolve();
    std::vector<std::string> support = p.Ids();
    double exploit = p.Exploit(sigma);
    const std::string id = "br_" + std::to_string(p.pop().NextGeneration(MemberRole::kBestResponse));
    PolicyHandle h = p.BestResponse(id, MemberRole::kBestResponse, p.Mixture(sigma),
                                    p.Latest(MemberRole::kBestResponse),
                                    DeriveSeed(config.seed, 0x7073, static_cast<uint64_t>(g)));
    p.AddAndSimulate(std::move(h), g);
    p.Record(g, {id}, std::move(support), std::move(sigma), exploit);
  }
  return p.Finish();
}

PipelineResult RunLeague(const EnvSpec& env, Population population,
                         std::shared_ptr<const Policy> main, const PipelineConfig& config) {
  Pipeline p(env, std::move(population), config);
  std::shared_ptr<const Policy> main_prior = std::move(main);
  for (int g = 0; g < config.generations; ++g) {
    // PFSP over the current population from the previous main's results.
    const int size = p.pop().size();
    std::vector<double> win_rates(size, 0.5);
    int prev = -1;
    for (int i = 0; i < size; ++i)
      if (p.pop().member(i).policy == main_prior) prev = i;
    if (prev >= 0) {
      for (int i = 0; i < size; ++i) {
        PayoffEntry e = p.pop().payoff().entry(prev, i);
        if (i != prev && e.games > 0) win_rates[i] = static_cast<double>(e.wins) / e.games;
      }
    }
    std::vector<double> weights = PfspDistribution(win_rates, PfspWeighting::kHard);
    std::vector<std::string> support = p.Ids();
    double exploit = p.Exploit(weights);
    const int gen = p.pop().NextGeneration(MemberRole::kMainAgent);
    const std::string main_id = "main_" + std::to_string(gen);
    PolicyHandle mh = p.BestResponse(main_id, MemberRole::kMainAgent, p.Mixture(weights), main_prior,
                                     DeriveSeed(config.seed, 0x6d61, static_cast<uint64_t>(g)));
    std::shared_ptr<const Policy> frozen = mh.policy;
    p.AddAndSimulate(std::move(mh), g);
    const std::string exp_id = "exploiter_" + std::to_string(p.pop().NextGeneration(MemberRole::kExploiter));
    PolicyHandle eh = p.BestResponse(exp_id, MemberRole::kExploiter, OpponentMix::PointMass(frozen),
                                     nullptr, DeriveSeed(config.seed, 0x6578, static_cast<uint64_t>(g)));
    p.AddAndSimulate(std::move(eh), g);
    p.Record(g, {main_id, exp_id}, std::move(support), std::move(weights), exploit);
    main_prior = frozen;
  }
  return p.Finish();
}

PipelineResult RunBestResponse(const EnvSpec& env, Population population,
                               const PipelineConfig& config) {
  Pipeline p(env, std::move(population), config);
  std::vector<double> uniform(p.pop().size(), 1.0 / p.pop().size());
  std::vector<std::string> support = p.Ids();
  double exploit = p.Exploit(uniform);
  const std::string id = "br_" + std::to_string(p.pop().NextGeneration(MemberRole::kBestResponse));
  PolicyHandle h = p.BestResponse(id, MemberRole::kBestResponse, p.Mixture(uniform),
                                  p.Latest(MemberRole::kBestResponse), DeriveSeed(config.seed, 0x6272));
  p.AddAndSimulate(std::move(h), 0);
  p.Record(0, {id}, std::move(support), std::move(uniform), exploit);
  return p.Finish();
}

// --- Run directory ---------------------------------------------------------------

void WriteRunDirectory(const std::string& dir, const EnvSpec& env,
                       const PipelineResult& result, PayoffMetric metric) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  fs::create_directories(root / "policies");
  fs::create_directories(root / "replays");
  const Population& pop = result.population;

  json members = json::array();
  for (const auto& m : pop.members()) {
    std::string file = "policies/" + FileSafe(m.id) + ".policy";
    WriteText(root / file, m.policy->Serialize());
    std::map<std::string, int> counts;
    for (const auto& o : m.opponent_log) ++counts[o];
    members.push_back({{"id", m.id},
                       {"role", std::string(RoleName(m.role))},
                       {"generation", m.generation},
                       {"policy", file},
                       {"opponent_counts", counts}});
  }
  json manifest = {{"env_fingerprint", env.Fingerprint()}, {"members", members}};
  WriteText(root / "population.json", manifest.dump(2) + "\n");
  WriteText(root / "payoff.csv", pop.payoff().ToCsv(metric));
  WriteText(root / "elo.csv", EloCsv(result.Elo()));

  std::ostringstream nash;
  nash << "policy,probability\n";
  std::vector<std::string> ids = pop.payoff().ids();
  for (size_t i = 0; i < ids.size() && i < result.final_nash.row.size(); ++i)
    nash << ids[i] << ',' << Fmt(result.final_nash.row[i]) << '\n';
  WriteText(root / "nash.csv", nash.str());

  std::ostringstream gens;
  gens << "generation,added,exploitability,meta_strategy\n";
  for (const auto& h : result.history) {
    gens << h.generation << ',';
    for (size_t i = 0; i < h.added.size(); ++i) gens << (i ? ";" : "") << h.added[i];
    gens << ',' << (std::isnan(h.exploitability) ? std::string("") : Fmt(h.exploitability)) << ',';
    for (size_t i = 0; i < h.support_ids.size(); ++i)
      gens << (i ? ";" : "") << h.support_ids[i] << ':' << Fmt(h.meta_strategy[i]);
    gens << '\n';
  }
  WriteText(root / "generations.csv", gens.str());

  std::ostringstream metrics;
  metrics << "policy,step,win_rate,wall_clock\n";
  for (const auto& [id, row] : result.metrics)
    metrics << id << ',' << row.step << ',' << Fmt(row.win_rate) << ',' << Fmt(row.wall_clock)
            << '\n';
  WriteText(root / "metrics.csv", metrics.str());

  for (const auto& [match_id, replay] : result.replays)
    WriteReplayFile(replay, (root / "replays" / (match_id + ".replay")).string());
}

Population LoadPopulation(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  std::ifstream in(root / "population.json");
  if (!in) throw std::runtime_error("cannot read " + (root / "population.json").string());
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(std::string("population.json: ") + e.what(), 0);
  }
  Population pop;
  for (const auto& m : manifest.at("members")) {
    std::ifstream pf(root / m.at("policy").get<std::string>(), std::ios::binary);
    if (!pf) throw std::runtime_error("missing policy file for " + m.at("id").get<std::string>());
    std::stringstream ss;
    ss << pf.rdbuf();
    PolicyHandle h;
    h.id = m.at("id").get<std::string>();
    h.role = ParseRole(m.at("role").get<std::string>());
    h.generation = m.at("generation").get<int>();
    h.policy = std::make_shared<Policy>(Policy::Deserialize(ss.str()));
    pop.Add(std::move(h));
  }
  return pop;
}

}  // namespace pitchlab
