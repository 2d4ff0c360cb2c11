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

// Local leaderboard: policy submissions, Swiss-system rounds with weighted
// score accumulation, Elo, and replay downloads over HTTP. All state is a
// fold over an append-only event log in the data directory.

#ifndef PITCHLAB_RANKING_H_
#define PITCHLAB_RANKING_H_

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <shared_mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pitchlab/orchestrator.h"

namespace httplib {
class Server;
}

namespace pitchlab {

inline constexpr char kRankingServiceVersion[] = "pitchlab-ranking/1.0.0";

struct SubmissionRecord {
  std::string id;
  std::string user;
  std::string scenario;
  std::string fingerprint;
  std::string received;  // UTC, ISO 8601
  std::string policy_file;
  double score = 0.0;
  double elo = kEloInitial;
  int matches = 0;
  std::string status = "pending";  // active once placement has run
};

struct MatchRecord {
  std::string id;
  std::string scenario;
  std::string a;
  std::string b;
  std::string kind;  // placement | round
  int round = -1;
  int episodes = 0;
  double win_rate = 0.0;  // from a's side
  double draw_rate = 0.0;
  double loss_rate = 0.0;
  double mean_goal_difference = 0.0;
  double outcome_a = 0.5;
  std::string replay_file;
};

struct RoundRecord {
  std::string scenario;
  int index = 0;
  double weight = 1.0;
  struct Pairing {
    std::string a;
    std::string b;
    std::string match;
  };
  std::vector<Pairing> pairings;
  std::string bye;  // empty when the count is even
  std::map<std::string, double> round_scores;
};

struct RankingRow {
  std::string id;
  std::string user;
  double score = 0.0;
  double elo = kEloInitial;
  int matches = 0;
  std::string status;
};

// The leaderboard as a pure fold over log events.
struct LeaderboardState {
  std::map<std::string, SubmissionRecord> submissions;
  std::map<std::string, MatchRecord> matches;
  std::vector<RoundRecord> rounds;
  long long events = 0;

  void Apply(const nlohmann::json& event);
  nlohmann::json ToJson() const;
  static LeaderboardState FromJson(const nlohmann::json& j);
  // Score desc, Elo desc, id asc.
  std::vector<RankingRow> Ranking(const std::string& scenario) const;
  // Unordered pairs that already met in a round of `scenario`.
  std::set<std::pair<std::string, std::string>> Played(const std::string& scenario) const;
};

struct SwissPairing {
  std::vector<std::pair<std::string, std::string>> pairs;
  std::string bye;
};

// Pairs neighbours in `ranked` order. With an odd count the last entry gets
// the bye. Backtracks to avoid rematches; when no rematch-free pairing
// exists, plain adjacent pairing is used.
SwissPairing PairSwiss(const std::vector<std::string>& ranked,
                       const std::set<std::pair<std::string, std::string>>& played);

struct RankingOptions {
  std::string data_dir;
  std::map<std::string, EnvSpec> scenarios;
  int placement_episodes = 4;
  int snapshot_every = 50;  // events between snapshots
  uint64_t seed = 0;
};

// Default scenarios: "minipitch" (default config), "minipitch_1v1" and "rps".
std::map<std::string, EnvSpec> DefaultScenarios();

class RankingService {
 public:
  // Restores state from snapshot.json plus the log tail. Throws if the data
  // directory cannot be created or written.
  explicit RankingService(RankingOptions options);
  ~RankingService();
  RankingService(const RankingService&) = delete;
  RankingService& operator=(const RankingService&) = delete;

  // Validates and stores the artifact, queues its placement evaluation and
  // returns the new id. ConfigError on unknown scenario or fingerprint
  // mismatch, ParseError on a malformed artifact.
  std::string Submit(const std::string& artifact, const std::string& user,
                     const std::string& scenario);
  // Runs one round on the simulation queue and waits for it. ConfigError
  // when fewer than two submissions exist.
  RoundRecord RunSwissRound(const std::string& scenario, int episodes, double weight);
  std::vector<RankingRow> Ranking(const std::string& scenario) const;
  SubmissionRecord Submission(const std::string& id) const;  // NotFoundError
  MatchRecord Match(const std::string& id) const;            // NotFoundError
  std::string ReplayBytes(const std::string& match_id) const;
  nlohmann::json MatchStats(const std::string& match_id) const;

  // Blocks until queued simulations have finished.
  void WaitIdle();
  void WriteSnapshot();
  // Canonical serialisation of the live state.
  std::string StateJson() const;
  const RankingOptions& options() const { return options_; }

  // Fold over the log alone, ignoring any snapshot.
  static LeaderboardState RebuildFromLog(const std::string& data_dir);

 private:
  void Append(nlohmann::json event);  // requires mu_ held exclusively
  void Enqueue(std::function<void()> job);
  void WorkerLoop();
  void Placement(const std::string& id);
  MatchRecord Play(const std::string& scenario, const std::string& a, const std::string& b,
                   const std::string& kind, int round, int episodes);
  std::string NextMatchIdLocked() const;

  RankingOptions options_;
  mutable std::shared_mutex mu_;
  LeaderboardState state_;
  long long since_snapshot_ = 0;

  std::mutex queue_mu_;
  std::condition_variable queue_cv_;
  std::deque<std::function<void()>> queue_;
  bool busy_ = false;
  bool stopping_ = false;
  std::thread worker_;
};

// HTTP routes: POST /submissions, POST /rounds, GET /ranking,
// GET /submissions/{id}, GET /matches/{id}/replay, GET /matches/{id}/stats,
// GET /health.
void RegisterRoutes(httplib::Server& server, RankingService& service);

}  // namespace pitchlab

#endif  // PITCHLAB_RANKING_H_
