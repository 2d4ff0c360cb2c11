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

// Drives the pitchlab binary end to end.

#include <gtest/gtest.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "httplib.h"
#include "json.hpp"
#include "pitchlab/orchestrator.h"
#include "pitchlab/ranking.h"

extern char** environ;

namespace pitchlab {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

fs::path Scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("pitchlab_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome Invoke(const std::string& args) {
  static int counter = 0;
  fs::path dir = fs::temp_directory_path() / "pitchlab_cli_io";
  fs::create_directories(dir);
  fs::path out = dir / ("out" + std::to_string(counter));
  fs::path err = dir / ("err" + std::to_string(counter++));
  std::string cmd = std::string(PITCHLAB_BIN) + " " + args + " >" + out.string() + " 2>" + err.string();
  int status = std::system(cmd.c_str());
  Outcome o;
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  o.out = Slurp(out);
  o.err = Slurp(err);
  return o;
}

int CountLines(const std::string& s) {
  return static_cast<int>(std::count(s.begin(), s.end(), '\n'));
}

TEST(CliTest, TrainPsroWritesRunDirectory) {
  fs::path dir = Scratch("psro");
  Outcome o = Invoke("train psro --env rps --generations 5 --seed 1 --out " + dir.string());
  ASSERT_EQ(o.code, 0) << o.err;
  for (const char* f : {"payoff.csv", "nash.csv", "elo.csv", "population.json", "manifest.json",
                        "config.txt", "generations.csv", "metrics.csv"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  json m = json::parse(Slurp(dir / "manifest.json"));
  EXPECT_EQ(m["pipeline"], "psro");
  EXPECT_EQ(m["seed"], 1);
  EXPECT_EQ(m["config"]["generations"], "5");
  EXPECT_FALSE(m["run_id"].get<std::string>().empty());
  EXPECT_FALSE(m["artifacts"].empty());
  // Header plus one row per member.
  EXPECT_EQ(CountLines(Slurp(dir / "nash.csv")), 1 + 6);
  json summary = json::parse(o.out);
  EXPECT_LT(summary["exploitability"].get<double>(), 0.05);
}

TEST(CliTest, SeedFixesOutputsAndConfigSnapshotReruns) {
  fs::path a = Scratch("det_a"), b = Scratch("det_b"), c = Scratch("det_c");
  const std::string args =
      " --env minipitch:n_per_team=1,max_steps=40 --generations 1 --seed 7 --set stop.max_steps=600"
      " --set payoff_episodes=2 --set initial=idle,builtin:2";
  ASSERT_EQ(Invoke("train psro" + args + " --out " + a.string()).code, 0);
  ASSERT_EQ(Invoke("train psro" + args + " --out " + b.string()).code, 0);
  ASSERT_EQ(Invoke("train --config " + (a / "config.txt").string() + " --out " + c.string()).code, 0);
  for (const char* f : {"payoff.csv", "nash.csv", "elo.csv", "policies/br_0.policy"}) {
    EXPECT_EQ(Slurp(a / f), Slurp(b / f)) << f;
    EXPECT_EQ(Slurp(a / f), Slurp(c / f)) << f;
  }
  EXPECT_EQ(json::parse(Slurp(a / "manifest.json"))["run_id"],
            json::parse(Slurp(c / "manifest.json"))["run_id"]);
}

TEST(CliTest, FlagsOverrideConfigFile) {
  fs::path dir = Scratch("override");
  std::ofstream(dir / "cfg.txt") << "pipeline=psro\nenv=rps\ngenerations=1\nseed=3\n";
  Outcome o = Invoke("train --config " + (dir / "cfg.txt").string() + " --generations 3 --out " +
                  (dir / "run").string());
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_EQ(CountLines(Slurp(dir / "run" / "generations.csv")), 1 + 3);
}

TEST(CliTest, MissingEnvIsUsageError) {
  fs::path dir = Scratch("noenv");
  Outcome o = Invoke("train psro --generations 2 --out " + dir.string());
  EXPECT_EQ(o.code, 2);
  json j = json::parse(o.err.substr(0, o.err.find('\n')));
  EXPECT_EQ(j["kind"], "usage");
  EXPECT_EQ(Invoke("").code, 2);
  EXPECT_EQ(Invoke("train psro --mode sideways --env rps").code, 2);
}

TEST(CliTest, ConfigErrorsExitThree) {
  fs::path dir = Scratch("badcfg");
  std::ofstream(dir / "cfg.txt") << "env=rps\nbogus_key=1\n";
  Outcome o = Invoke("train psro --config " + (dir / "cfg.txt").string() + " --out " +
                  (dir / "run").string());
  EXPECT_EQ(o.code, 3);
  EXPECT_EQ(json::parse(o.err.substr(0, o.err.find('\n')))["kind"], "config");
}

TEST(CliTest, AsyncBestResponseLogsWallClock) {
  fs::path dir = Scratch("br");
  Outcome o = Invoke(
      "train br --env minipitch:n_per_team=1,max_steps=40 --mode async --workers 4"
      " --set stop.max_steps=1500 --set payoff_episodes=2 --out " + dir.string());
  ASSERT_EQ(o.code, 0) << o.err;
  std::string metrics = Slurp(dir / "metrics.csv");
  EXPECT_EQ(metrics.substr(0, metrics.find('\n')), "policy,step,win_rate,wall_clock");
  EXPECT_GT(CountLines(metrics), 1);
}

TEST(CliTest, AnalyzeReplayIsDeterministicAndRejectsCorruptInput) {
  fs::path dir = Scratch("analyze");
  ASSERT_EQ(Invoke("train psro --env minipitch:n_per_team=1,max_steps=40 --generations 1"
                " --set stop.max_steps=300 --set payoff_episodes=2 --set initial=idle,builtin:0"
                " --out " + (dir / "run").string())
                .code,
            0);
  fs::path replay;
  for (const auto& e : fs::directory_iterator(dir / "run" / "replays")) replay = e.path();
  ASSERT_FALSE(replay.empty());
  Outcome first = Invoke("analyze " + replay.string() + " --out " + (dir / "a1").string());
  Outcome second = Invoke("analyze " + replay.string() + " --out " + (dir / "a2").string());
  ASSERT_EQ(first.code, 0) << first.err;
  EXPECT_EQ(first.out, second.out);
  for (const char* f : {"events.csv", "style.csv", "decomposition.txt"}) {
    EXPECT_EQ(Slurp(dir / "a1" / f), Slurp(dir / "a2" / f)) << f;
  }

  std::string text = Slurp(replay);
  // Break the third line.
  size_t pos = text.find('\n', text.find('\n') + 1);
  text.insert(pos + 1, "{not json\n");
  std::ofstream(dir / "bad.replay") << text;
  Outcome bad = Invoke("analyze " + (dir / "bad.replay").string());
  EXPECT_EQ(bad.code, 3);
  json j = json::parse(bad.err.substr(0, bad.err.find('\n')));
  EXPECT_EQ(j["kind"], "parse");
  EXPECT_EQ(j["line"], 3);

  Outcome radar = Invoke("analyze " + (dir / "run").string() + " --radar --episodes 2");
  ASSERT_EQ(radar.code, 0) << radar.err;
  std::istringstream rows(radar.out);
  std::string line;
  std::getline(rows, line);
  int members = 0;
  while (std::getline(rows, line)) {
    ++members;
    std::istringstream cells(line);
    std::string cell;
    std::getline(cells, cell, ',');
    while (std::getline(cells, cell, ',')) {
      double v = std::stod(cell);
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  EXPECT_EQ(members, 3);

  Outcome dump = Invoke("replay-dump " + replay.string());
  ASSERT_EQ(dump.code, 0);
  json header = json::parse(dump.out.substr(0, dump.out.find('\n')));
  EXPECT_EQ(header["n_per_team"], 1);
}

TEST(CliTest, EvaluateReportsRates) {
  fs::path dir = Scratch("evaluate");
  const std::string fp = EnvSpec::Parse("rps").Fingerprint();
  std::ofstream(dir / "rock.policy") << MixedPolicy("rock", {1, 0, 0}, fp).Serialize();
  std::ofstream(dir / "paper.policy") << MixedPolicy("paper", {0, 1, 0}, fp).Serialize();
  Outcome o = Invoke("evaluate --env rps --a " + (dir / "paper.policy").string() + " --b " +
                  (dir / "rock.policy").string() + " --episodes 10");
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_DOUBLE_EQ(json::parse(o.out)["win_rate"].get<double>(), 1.0);
}

// --- serve -------------------------------------------------------------------

class Server {
 public:
  explicit Server(const fs::path& data) {
    int fds[2];
    EXPECT_EQ(pipe(fds), 0);
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, fds[1], 1);
    posix_spawn_file_actions_addclose(&actions, fds[0]);
    std::string data_dir = data.string();
    std::vector<std::string> args = {PITCHLAB_BIN, "serve", "--port", "0", "--data-dir", data_dir,
                                     "--placement-episodes", "2"};
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    EXPECT_EQ(posix_spawn(&pid_, PITCHLAB_BIN, &actions, nullptr, argv.data(), environ), 0);
    posix_spawn_file_actions_destroy(&actions);
    close(fds[1]);
    out_ = fdopen(fds[0], "r");
    char buf[4096];
    if (fgets(buf, sizeof(buf), out_)) port_ = json::parse(buf)["port"];
  }
  ~Server() {
    if (pid_ > 0) Stop();
    if (out_) fclose(out_);
  }
  int Stop() {
    kill(pid_, SIGTERM);
    int status = 0;
    waitpid(pid_, &status, 0);
    pid_ = -1;
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  int port() const { return port_; }

 private:
  pid_t pid_ = -1;
  FILE* out_ = nullptr;
  int port_ = 0;
};

TEST(CliTest, ServeSurvivesRestartWithIdenticalRanking) {
  fs::path data = Scratch("serve");
  const std::string fp = DefaultScenarios().at("rps").Fingerprint();
  std::string before;
  {
    Server server(data);
    ASSERT_GT(server.port(), 0);
    httplib::Client client("127.0.0.1", server.port());
    auto health = client.Get("/health");
    ASSERT_TRUE(health);
    EXPECT_EQ(json::parse(health->body)["version"], kRankingServiceVersion);
    for (int i = 0; i < 3; ++i) {
      std::vector<double> mix(3, 0.0);
      mix[i] = 1.0;
      auto res = client.Post("/submissions?scenario=rps&user=u" + std::to_string(i),
                             MixedPolicy("p", mix, fp).Serialize(), "text/plain");
      ASSERT_TRUE(res);
      ASSERT_EQ(res->status, 201) << res->body;
    }
    auto round = client.Post("/rounds", R"({"scenario":"rps","episodes":2})", "application/json");
    ASSERT_TRUE(round);
    ASSERT_EQ(round->status, 200) << round->body;
    auto ranking = client.Get("/ranking?scenario=rps");
    ASSERT_TRUE(ranking);
    before = ranking->body;
    EXPECT_EQ(server.Stop(), 0);
  }
  EXPECT_TRUE(fs::exists(data / "snapshot.json"));
  Server again(data);
  httplib::Client client("127.0.0.1", again.port());
  auto ranking = client.Get("/ranking?scenario=rps");
  ASSERT_TRUE(ranking);
  EXPECT_EQ(ranking->body, before);
  EXPECT_EQ(RankingService::RebuildFromLog(data.string()).ToJson(),
            json::parse(Slurp(data / "snapshot.json"))["state"]);
}

TEST(CliTest, ServeRejectsUnusableDataDir) {
  fs::path dir = Scratch("serve_bad");
  std::ofstream(dir / "file") << "x";
  Outcome o = Invoke("serve --port 0 --data-dir " + (dir / "file" / "sub").string());
  EXPECT_EQ(o.code, 4);
  EXPECT_EQ(json::parse(o.err.substr(0, o.err.find('\n')))["kind"], "runtime");
}

}  // namespace
}  // namespace pitchlab
