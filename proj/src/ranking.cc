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

#include "pitchlab/ranking.h"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>

#include "httplib.h"

namespace pitchlab {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr char kLogFile[] = "log.jsonl";
constexpr char kSnapshotFile[] = "snapshot.json";

std::string UtcNow() {
  std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFileAtomic(const fs::path& path, const std::string& text) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string Numbered(char prefix, size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%c%06zu", prefix, n);
  return buf;
}

std::pair<std::string, std::string> Unordered(const std::string& a, const std::string& b) {
  return a < b ? std::pair{a, b} : std::pair{b, a};
}

json ToJson(const SubmissionRecord& s) {
  return {{"id", s.id},           {"user", s.user},     {"scenario", s.scenario},
          {"fingerprint", s.fingerprint}, {"received", s.received},
          {"policy_file", s.policy_file}, {"score", s.score}, {"elo", s.elo},
          {"matches", s.matches}, {"status", s.status}};
}

SubmissionRecord SubmissionFromJson(const json& j) {
  SubmissionRecord s;
  s.id = j.at("id");
  s.user = j.at("user");
  s.scenario = j.at("scenario");
  s.fingerprint = j.at("fingerprint");
  s.received = j.at("received");
  s.policy_file = j.at("policy_file");
  s.score = j.value("score", 0.0);
  s.elo = j.value("elo", kEloInitial);
  s.matches = j.value("matches", 0);
  s.status = j.value("status", std::string("pending"));
  return s;
}

json ToJson(const MatchRecord& m) {
  return {{"id", m.id},
          {"scenario", m.scenario},
          {"a", m.a},
          {"b", m.b},
          {"kind", m.kind},
          {"round", m.round},
          {"episodes", m.episodes},
          {"win_rate", m.win_rate},
          {"draw_rate", m.draw_rate},
          {"loss_rate", m.loss_rate},
          {"mean_goal_difference", m.mean_goal_difference},
          {"outcome_a", m.outcome_a},
          {"replay_file", m.replay_file}};
}

MatchRecord MatchFromJson(const json& j) {
  MatchRecord m;
  m.id = j.at("id");
  m.scenario = j.at("scenario");
  m.a = j.at("a");
  m.b = j.at("b");
  m.kind = j.at("kind");
  m.round = j.at("round");
  m.episodes = j.at("episodes");
  m.win_rate = j.at("win_rate");
  m.draw_rate = j.at("draw_rate");
  m.loss_rate = j.at("loss_rate");
  m.mean_goal_difference = j.at("mean_goal_difference");
  m.outcome_a = j.at("outcome_a");
  m.replay_file = j.at("replay_file");
  return m;
}

json ToJson(const RoundRecord& r) {
  json pairings = json::array();
  for (const auto& p : r.pairings) pairings.push_back({{"a", p.a}, {"b", p.b}, {"match", p.match}});
  return {{"scenario", r.scenario}, {"index", r.index},   {"weight", r.weight},
          {"pairings", pairings},   {"bye", r.bye},       {"round_scores", r.round_scores}};
}

RoundRecord RoundFromJson(const json& j) {
  RoundRecord r;
  r.scenario = j.at("scenario");
  r.index = j.at("index");
  r.weight = j.at("weight");
  for (const auto& p : j.at("pairings")) r.pairings.push_back({p.at("a"), p.at("b"), p.at("match")});
  r.bye = j.at("bye");
  r.round_scores = j.at("round_scores").get<std::map<std::string, double>>();
  return r;
}

json ToJson(const RankingRow& r, int rank) {
  return {{"rank", rank},       {"id", r.id},           {"user", r.user},  {"score", r.score},
          {"elo", r.elo},       {"matches", r.matches}, {"status", r.status}};
}

}  // namespace

// --- State fold ------------------------------------------------------------------

void LeaderboardState::Apply(const json& event) {
  const std::string type = event.at("type");
  if (type == "submission") {
    SubmissionRecord s = SubmissionFromJson(event.at("submission"));
    submissions[s.id] = s;
  } else if (type == "match") {
    MatchRecord m = MatchFromJson(event.at("match"));
    SubmissionRecord& a = submissions.at(m.a);
    SubmissionRecord& b = submissions.at(m.b);
    EloPair e = EloUpdate(a.elo, b.elo, m.outcome_a);
    a.elo = e.a;
    b.elo = e.b;
    ++a.matches;
    ++b.matches;
    matches[m.id] = m;
  } else if (type == "round") {
    RoundRecord r = RoundFromJson(event.at("round"));
    for (const auto& [id, s] : r.round_scores) submissions.at(id).score += r.weight * s;
    rounds.push_back(std::move(r));
  } else if (type == "placement_done") {
    submissions.at(event.at("id").get<std::string>()).status = "active";
  } else {
    throw ParseError("unknown event type '" + type + "'", 0);
  }
  ++events;
}

json LeaderboardState::ToJson() const {
  json subs = json::array(), ms = json::array(), rs = json::array();
  for (const auto& [id, s] : submissions) subs.push_back(pitchlab::ToJson(s));
  for (const auto& [id, m] : matches) ms.push_back(pitchlab::ToJson(m));
  for (const auto& r : rounds) rs.push_back(pitchlab::ToJson(r));
  return {{"events", events}, {"submissions", subs}, {"matches", ms}, {"rounds", rs}};
}

LeaderboardState LeaderboardState::FromJson(const json& j) {
  LeaderboardState s;
  s.events = j.at("events");
  for (const auto& x : j.at("submissions")) {
    SubmissionRecord r = SubmissionFromJson(x);
    s.submissions[r.id] = r;
  }
  for (const auto& x : j.at("matches")) {
    MatchRecord m = MatchFromJson(x);
    s.matches[m.id] = m;
  }
  for (const auto& x : j.at("rounds")) s.rounds.push_back(RoundFromJson(x));
  return s;
}

std::vector<RankingRow> LeaderboardState::Ranking(const std::string& scenario) const {
  std::vector<RankingRow> rows;
  for (const auto& [id, s] : submissions) {
    if (s.scenario != scenario) continue;
    rows.push_back({s.id, s.user, s.score, s.elo, s.matches, s.status});
  }
  std::sort(rows.begin(), rows.end(), [](const RankingRow& x, const RankingRow& y) {
    if (x.score != y.score) return x.score > y.score;
    if (x.elo != y.elo) return x.elo > y.elo;
    return x.id < y.id;
  });
  return rows;
}

std::set<std::pair<std::string, std::string>> LeaderboardState::Played(
    const std::string& scenario) const {
  std::set<std::pair<std::string, std::string>> out;
  for (const auto& r : rounds) {
    if (r.scenario != scenario) continue;
    for (const auto& p : r.pairings) out.insert(Unordered(p.a, p.b));
  }
  return out;
}

// --- Swiss pairing ---------------------------------------------------------------

SwissPairing PairSwiss(const std::vector<std::string>& ranked,
                       const std::set<std::pair<std::string, std::string>>& played) {
  SwissPairing out;
  std::vector<std::string> pool = ranked;
  if (pool.size() % 2 == 1) {
    out.bye = pool.back();
    pool.pop_back();
  }
  const size_t n = pool.size();
  std::vector<bool> used(n, false);
  std::vector<std::pair<size_t, size_t>> chosen;
  long long budget = 200000;  // search nodes before giving up on rematch-freedom
  std::function<bool()> search = [&]() -> bool {
    if (--budget < 0) return false;
    size_t i = 0;
    while (i < n && used[i]) ++i;
    if (i == n) return true;
    used[i] = true;
    for (size_t j = i + 1; j < n; ++j) {
      if (used[j] || played.count(Unordered(pool[i], pool[j]))) continue;
      used[j] = true;
      chosen.emplace_back(i, j);
      if (search()) return true;
      chosen.pop_back();
      used[j] = false;
    }
    used[i] = false;
    return false;
  };
  if (search()) {
    for (auto [i, j] : chosen) out.pairs.emplace_back(pool[i], pool[j]);
  } else {
    for (size_t i = 0; i + 1 < n; i += 2) out.pairs.emplace_back(pool[i], pool[i + 1]);
  }
  return out;
}

std::map<std::string, EnvSpec> DefaultScenarios() {
  MiniPitchConfig one;
  one.n_per_team = 1;
  one.max_steps = 200;
  return {{"minipitch", EnvSpec::Pitch(MiniPitchConfig{})},
          {"minipitch_1v1", EnvSpec::Pitch(one)},
          {"rps", EnvSpec::Parse("rps")}};
}

// --- Service ---------------------------------------------------------------------

RankingService::RankingService(RankingOptions options) : options_(std::move(options)) {
  if (options_.data_dir.empty()) throw ConfigError("ranking service needs a data directory");
  if (options_.scenarios.empty()) options_.scenarios = DefaultScenarios();
  if (options_.placement_episodes < 1) throw ConfigError("placement_episodes must be >= 1");
  if (options_.snapshot_every < 1) throw ConfigError("snapshot_every must be >= 1");
  const fs::path root(options_.data_dir);
  std::error_code ec;
  fs::create_directories(root / "policies", ec);
  if (!ec) fs::create_directories(root / "replays", ec);
  if (ec) throw std::runtime_error("cannot create data directory " + root.string() + ": " + ec.message());
  {
    // Probe writability up front rather than on the first request.
    fs::path probe = root / ".write_probe";
    std::ofstream out(probe);
    if (!out) throw std::runtime_error("data directory is not writable: " + root.string());
    out.close();
    fs::remove(probe, ec);
  }

  long long skip = 0;
  if (fs::exists(root / kSnapshotFile)) {
    json snap = json::parse(ReadFile(root / kSnapshotFile));
    state_ = LeaderboardState::FromJson(snap.at("state"));
    skip = state_.events;
  }
  if (fs::exists(root / kLogFile)) {
    std::ifstream in(root / kLogFile);
    std::string line;
    long long n = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (n++ < skip) continue;
      try {
        state_.Apply(json::parse(line));
      } catch (const json::exception& e) {
        throw ParseError(std::string("match log: ") + e.what(), static_cast<int>(n));
      }
    }
    if (n < skip) throw ParseError("snapshot is ahead of the match log", static_cast<int>(n));
  }
  // Placements interrupted by a restart are re-queued.
  std::vector<std::string> pending;
  for (const auto& [id, s] : state_.submissions)
    if (s.status == "pending") pending.push_back(id);
  worker_ = std::thread([this] { WorkerLoop(); });
  for (const auto& id : pending) Enqueue([this, id] { Placement(id); });
}

RankingService::~RankingService() {
  {
    std::lock_guard lock(queue_mu_);
    stopping_ = true;
  }
  queue_cv_.notify_all();
  if (worker_.joinable()) worker_.join();
  try {
    WriteSnapshot();
  } catch (...) {
  }
}

void RankingService::Append(json event) {
  const fs::path log = fs::path(options_.data_dir) / kLogFile;
  std::ofstream out(log, std::ios::app | std::ios::binary);
  if (!out) throw std::runtime_error("cannot append to " + log.string());
  out << event.dump() << '\n';
  out.flush();
  if (!out) throw std::runtime_error("append failed: " + log.string());
  state_.Apply(event);
  if (++since_snapshot_ >= options_.snapshot_every) {
    json snap = {{"state", state_.ToJson()}};
    WriteFileAtomic(fs::path(options_.data_dir) / kSnapshotFile, snap.dump() + "\n");
    since_snapshot_ = 0;
  }
}

void RankingService::WriteSnapshot() {
  std::unique_lock lock(mu_);
  json snap = {{"state", state_.ToJson()}};
  WriteFileAtomic(fs::path(options_.data_dir) / kSnapshotFile, snap.dump() + "\n");
  since_snapshot_ = 0;
}

void RankingService::Enqueue(std::function<void()> job) {
  {
    std::lock_guard lock(queue_mu_);
    queue_.push_back(std::move(job));
  }
  queue_cv_.notify_all();
}

void RankingService::WorkerLoop() {
  while (true) {
    std::function<void()> job;
    {
      std::unique_lock lock(queue_mu_);
      queue_cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (queue_.empty()) return;  // stopping and drained
      job = std::move(queue_.front());
      queue_.pop_front();
      busy_ = true;
    }
    try {
      job();
    } catch (...) {
      // Jobs report their own errors; a failed placement stays pending.
    }
    {
      std::lock_guard lock(queue_mu_);
      busy_ = false;
    }
    queue_cv_.notify_all();
  }
}

void RankingService::WaitIdle() {
  std::unique_lock lock(queue_mu_);
  queue_cv_.wait(lock, [&] { return queue_.empty() && !busy_; });
}

std::string RankingService::NextMatchIdLocked() const {
  return Numbered('m', state_.matches.size() + 1);
}

std::string RankingService::Submit(const std::string& artifact, const std::string& user,
                                   const std::string& scenario) {
  auto it = options_.scenarios.find(scenario);
  if (it == options_.scenarios.end()) throw ConfigError("unknown scenario '" + scenario + "'");
  Policy policy = Policy::Deserialize(artifact);
  policy.Validate();
  const std::string expected = it->second.Fingerprint();
  if (policy.env_fingerprint != expected) {
    throw ConfigError("artifact fingerprint '" + policy.env_fingerprint +
                      "' does not match scenario '" + scenario + "' (" + expected + ")");
  }
  std::string id;
  {
    std::unique_lock lock(mu_);
    id = Numbered('s', state_.submissions.size() + 1);
    SubmissionRecord s;
    s.id = id;
    s.user = user.empty() ? "anonymous" : user;
    s.scenario = scenario;
    s.fingerprint = expected;
    s.received = UtcNow();
    s.policy_file = "policies/" + id + ".policy";
    // Stored verbatim; ids are per upload, so duplicates are new entries.
    WriteFileAtomic(fs::path(options_.data_dir) / s.policy_file, artifact);
    Append({{"type", "submission"}, {"submission", pitchlab::ToJson(s)}});
  }
  Enqueue([this, id] { Placement(id); });
  return id;
}

MatchRecord RankingService::Play(const std::string& scenario, const std::string& a,
                                 const std::string& b, const std::string& kind, int round,
                                 int episodes) {
  const EnvSpec& env = options_.scenarios.at(scenario);
  std::string id, file_a, file_b;
  {
    std::shared_lock lock(mu_);
    id = NextMatchIdLocked();
    file_a = state_.submissions.at(a).policy_file;
    file_b = state_.submissions.at(b).policy_file;
  }
  const fs::path root(options_.data_dir);
  Policy pa = Policy::Deserialize(ReadFile(root / file_a));
  Policy pb = Policy::Deserialize(ReadFile(root / file_b));
  pa.id = a;
  pb.id = b;
  const uint64_t seed = DeriveSeed(options_.seed, Fnv1a(id));
  const bool pitch = env.kind == EnvSpec::Kind::kMiniPitch;
  EvalResult r = Evaluate(env, pa, pb, episodes, seed, pitch);
  MatchRecord m;
  m.id = id;
  m.scenario = scenario;
  m.a = a;
  m.b = b;
  m.kind = kind;
  m.round = round;
  m.episodes = episodes;
  m.win_rate = r.win_rate;
  m.draw_rate = r.draw_rate;
  m.loss_rate = r.loss_rate;
  m.mean_goal_difference = r.mean_goal_difference;
  m.outcome_a = r.mean_goal_difference > 0 ? 1.0 : (r.mean_goal_difference < 0 ? 0.0 : 0.5);
  if (pitch && !r.replays.empty()) {
    m.replay_file = "replays/" + id + ".replay";
    WriteReplayFile(r.replays.front(), (root / m.replay_file).string());
  }
  std::unique_lock lock(mu_);
  Append({{"type", "match"}, {"match", pitchlab::ToJson(m)}});
  return m;
}

void RankingService::Placement(const std::string& id) {
  std::string scenario;
  std::vector<std::string> top;
  {
    std::shared_lock lock(mu_);
    scenario = state_.submissions.at(id).scenario;
    for (const auto& row : state_.Ranking(scenario)) {
      if (row.id == id) continue;
      top.push_back(row.id);
      if (top.size() == 3) break;
    }
  }
  for (const auto& opp : top) Play(scenario, id, opp, "placement", -1, options_.placement_episodes);
  std::unique_lock lock(mu_);
  Append({{"type", "placement_done"}, {"id", id}});
}

RoundRecord RankingService::RunSwissRound(const std::string& scenario, int episodes,
                                          double weight) {
  if (!options_.scenarios.count(scenario)) throw ConfigError("unknown scenario '" + scenario + "'");
  if (episodes < 1) throw ConfigError("episodes per pairing must be >= 1");
  if (!(weight > 0.0) || !std::isfinite(weight)) throw ConfigError("round weight must be > 0");
  auto promise = std::make_shared<std::promise<RoundRecord>>();
  std::future<RoundRecord> result = promise->get_future();
  Enqueue([this, scenario, episodes, weight, promise] {
    try {
      RoundRecord r;
      r.scenario = scenario;
      r.weight = weight;
      std::vector<std::string> ranked;
      std::set<std::pair<std::string, std::string>> played;
      {
        std::shared_lock lock(mu_);
        for (const auto& row : state_.Ranking(scenario)) ranked.push_back(row.id);
        played = state_.Played(scenario);
        r.index = static_cast<int>(std::count_if(state_.rounds.begin(), state_.rounds.end(),
                                                 [&](const RoundRecord& x) { return x.scenario == scenario; }));
      }
      if (ranked.size() < 2) {
        throw ConfigError("a round needs at least two submissions in '" + scenario + "'");
      }
      SwissPairing pairing = PairSwiss(ranked, played);
      for (const auto& [a, b] : pairing.pairs) {
        MatchRecord m = Play(scenario, a, b, "round", r.index, episodes);
        r.pairings.push_back({a, b, m.id});
        r.round_scores[a] = m.outcome_a;
        r.round_scores[b] = 1.0 - m.outcome_a;
      }
      r.bye = pairing.bye;
      if (!r.bye.empty()) r.round_scores[r.bye] = 0.5;
      {
        std::unique_lock lock(mu_);
        Append({{"type", "round"}, {"round", pitchlab::ToJson(r)}});
      }
      promise->set_value(std::move(r));
    } catch (...) {
      promise->set_exception(std::current_exception());
    }
  });
  return result.get();
}

std::vector<RankingRow> RankingService::Ranking(const std::string& scenario) const {
  std::shared_lock lock(mu_);
  return state_.Ranking(scenario);
}

SubmissionRecord RankingService::Submission(const std::string& id) const {
  std::shared_lock lock(mu_);
  auto it = state_.submissions.find(id);
  if (it == state_.submissions.end()) throw NotFoundError("unknown submission '" + id + "'");
  return it->second;
}

MatchRecord RankingService::Match(const std::string& id) const {
  std::shared_lock lock(mu_);
  auto it = state_.matches.find(id);
  if (it == state_.matches.end()) throw NotFoundError("unknown match '" + id + "'");
  return it->second;
}

std::string RankingService::ReplayBytes(const std::string& match_id) const {
  MatchRecord m = Match(match_id);
  if (m.replay_file.empty()) throw NotFoundError("match '" + match_id + "' has no replay");
  return ReadFile(fs::path(options_.data_dir) / m.replay_file);
}

json RankingService::MatchStats(const std::string& match_id) const {
  MatchRecord m = Match(match_id);
  json out = {{"match", pitchlab::ToJson(m)}};
  if (m.replay_file.empty()) return out;
  Replay replay = ReadReplay(ReplayBytes(match_id));
  EventCounts c = DetectEvents(replay, Decompose(replay)).counts;
  auto pair = [](const std::array<int, 2>& v) { return json::array({v[0], v[1]}); };
  out["replay_events"] = {{"teams", json::array({replay.header.policy_ids[0], replay.header.policy_ids[1]})},
                          {"passes", pair(c.passes)},
                          {"intercepts", pair(c.intercepts)},
                          {"assists", pair(c.assists)},
                          {"shots", pair(c.shots)},
                          {"goals", pair(c.goals)},
                          {"possession_steps", pair(c.possession_steps)}};
  return out;
}

std::string RankingService::StateJson() const {
  std::shared_lock lock(mu_);
  return state_.ToJson().dump();
}

LeaderboardState RankingService::RebuildFromLog(const std::string& data_dir) {
  LeaderboardState s;
  std::ifstream in(fs::path(data_dir) / kLogFile);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      s.Apply(json::parse(line));
    } catch (const json::exception& e) {
      throw ParseError(std::string("match log: ") + e.what(), n);
    }
  }
  return s;
}

// --- HTTP ------------------------------------------------------------------------

void RegisterRoutes(httplib::Server& server, RankingService& service) {
  auto reply = [](httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump() + "\n", "application/json");
  };
  // Maps library errors onto status codes.
  auto guarded = [reply](auto handler) {
    return [reply, handler](const httplib::Request& req, httplib::Response& res) {
      try {
        handler(req, res);
      } catch (const NotFoundError& e) {
        reply(res, 404, {{"error", e.what()}, {"kind", "not_found"}});
      } catch (const ParseError& e) {
        reply(res, 400, {{"error", e.what()}, {"kind", "parse"}, {"line", e.line()}});
      } catch (const ConfigError& e) {
        reply(res, 400, {{"error", e.what()}, {"kind", "config"}});
      } catch (const json::exception& e) {
        reply(res, 400, {{"error", e.what()}, {"kind", "parse"}});
      } catch (const std::exception& e) {
        reply(res, 500, {{"error", e.what()}, {"kind", "runtime"}});
      }
    };
  };

  server.Get("/health", guarded([&service, reply](const httplib::Request&, httplib::Response& res) {
    json scenarios = json::array();
    for (const auto& [name, env] : service.options().scenarios) scenarios.push_back(name);
    reply(res, 200, {{"status", "ok"}, {"version", kRankingServiceVersion}, {"scenarios", scenarios}});
  }));

  server.Post("/submissions", guarded([&service, reply](const httplib::Request& req,
                                                         httplib::Response& res) {
    if (!req.has_param("scenario")) throw ConfigError("missing 'scenario' query parameter");
    std::string user = req.has_param("user") ? req.get_param_value("user") : "anonymous";
    std::string id = service.Submit(req.body, user, req.get_param_value("scenario"));
    reply(res, 201, {{"id", id}, {"status", "pending"}});
  }));

  server.Post("/rounds", guarded([&service, reply](const httplib::Request& req,
                                                    httplib::Response& res) {
    json body = req.body.empty() ? json::object() : json::parse(req.body);
    std::string scenario = body.value("scenario", std::string("minipitch"));
    int episodes = body.value("episodes", 4);
    double weight = body.value("weight", 1.0);
    RoundRecord r = service.RunSwissRound(scenario, episodes, weight);
    reply(res, 200, ToJson(r));
  }));

  server.Get("/ranking", guarded([&service, reply](const httplib::Request& req,
                                                    httplib::Response& res) {
    std::string scenario = req.has_param("scenario") ? req.get_param_value("scenario") : "minipitch";
    if (!service.options().scenarios.count(scenario)) {
      throw ConfigError("unknown scenario '" + scenario + "'");
    }
    json rows = json::array();
    int rank = 0;
    for (const auto& row : service.Ranking(scenario)) rows.push_back(ToJson(row, ++rank));
    reply(res, 200, {{"scenario", scenario}, {"ranking", rows}});
  }));

  server.Get(R"(/submissions/([^/]+))", guarded([&service, reply](const httplib::Request& req,
                                                                   httplib::Response& res) {
    reply(res, 200, ToJson(service.Submission(req.matches[1])));
  }));

  server.Get(R"(/matches/([^/]+)/replay)", guarded([&service](const httplib::Request& req,
                                                               httplib::Response& res) {
    res.status = 200;
    res.set_content(service.ReplayBytes(req.matches[1]), "text/plain; charset=utf-8");
  }));

  server.Get(R"(/matches/([^/]+)/stats)", guarded([&service, reply](const httplib::Request& req,
                                                                     httplib::Response& res) {
    reply(res, 200, service.MatchStats(req.matches[1]));
  }));
}

}  // namespace pitchlab
