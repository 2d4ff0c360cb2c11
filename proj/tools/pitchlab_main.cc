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

// pitchlab: train | evaluate | analyze | serve | replay-dump.
//
// Exit codes: 0 ok, 2 usage, 3 config or malformed input, 4 runtime.
// Diagnostics go to stderr as one JSON object per line. PITCHLAB_LOG sets the
// verbosity (error, warn, info, debug; default warn).

#include <pthread.h>
#include <signal.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "httplib.h"
#include "json.hpp"
#include "pitchlab/orchestrator.h"
#include "pitchlab/ranking.h"

namespace pitchlab {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitConfig = 3;
constexpr int kExitRuntime = 4;

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// --- Logging -----------------------------------------------------------------

enum class Level { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

Level Verbosity() {
  static const Level level = [] {
    const char* v = std::getenv("PITCHLAB_LOG");
    std::string s = v ? v : "warn";
    if (s == "error") return Level::kError;
    if (s == "info") return Level::kInfo;
    if (s == "debug") return Level::kDebug;
    return Level::kWarn;
  }();
  return level;
}

void Log(Level level, const std::string& msg) {
  static constexpr const char* kNames[] = {"error", "warn", "info", "debug"};
  if (level > Verbosity()) return;
  std::cerr << json{{"level", kNames[static_cast<int>(level)]}, {"msg", msg}}.dump() << std::endl;
}

void Diagnose(const std::string& kind, const std::string& what, int line = -1) {
  json j = {{"error", what}, {"kind", kind}};
  if (line >= 0) j["line"] = line;
  std::cerr << j.dump() << std::endl;
}

// --- Helpers -----------------------------------------------------------------

std::string ReadText(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

Policy LoadPolicyFile(const std::string& path) {
  Policy p = Policy::Deserialize(ReadText(path));
  p.Validate();
  return p;
}

// Expands a MiniPitch config file into env.* keys so that the snapshot is
// self-contained; env.* keys already present win over the file.
KeyValues ExpandEnv(KeyValues kv) {
  auto it = kv.find("env");
  if (it == kv.end()) return kv;
  const std::string spec = it->second;
  if (spec.rfind("minipitch:", 0) == 0 && fs::exists(spec.substr(10))) {
    for (const auto& [k, v] : ReadKeyValueFile(spec.substr(10))) kv.emplace("env." + k, v);
    kv["env"] = "minipitch";
  }
  return kv;
}

EnvSpec EnvFromKeyValues(const KeyValues& kv) {
  auto it = kv.find("env");
  if (it == kv.end() || it->second.empty()) {
    throw UsageError("--env is required (rps, matrix:FILE, minipitch or minipitch:CFG)");
  }
  KeyValues pitch = Section(kv, "env.");
  if (pitch.empty()) return EnvSpec::Parse(it->second);
  if (it->second != "minipitch") throw ConfigError("env.* keys apply to minipitch only");
  return EnvSpec::Pitch(MiniPitchConfig::FromKeyValues(pitch));
}

std::string KeyValueText(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

std::vector<std::string> ListFiles(const fs::path& dir) {
  std::vector<std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out.push_back(fs::relative(e.path(), dir).generic_string());
  std::sort(out.begin(), out.end());
  return out;
}

// --- train -------------------------------------------------------------------

struct TrainArgs {
  std::string pipeline;
  std::string env;
  std::string config;
  std::string out;
  std::vector<std::string> sets;
  int generations = 0;
  uint64_t seed = 0;
  std::string mode;
  int workers = 0;
};

int CmdTrain(const TrainArgs& a, const CLI::App& sub) {
  KeyValues kv;
  if (!a.config.empty()) kv = ReadKeyValueFile(a.config);
  // Flags win over the file.
  if (sub.count("--env")) kv["env"] = a.env;
  if (sub.count("--generations")) kv["generations"] = std::to_string(a.generations);
  if (sub.count("--seed")) kv["seed"] = std::to_string(a.seed);
  if (sub.count("--mode")) kv["mode"] = a.mode;
  if (sub.count("--workers")) kv["workers"] = std::to_string(a.workers);
  for (const auto& s : a.sets) {
    auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + s + "'");
    kv[s.substr(0, eq)] = s.substr(eq + 1);
  }
  std::string pipeline = a.pipeline;
  if (pipeline.empty()) {
    auto it = kv.find("pipeline");
    if (it == kv.end()) throw UsageError("train needs a pipeline: psro, league or br");
    pipeline = it->second;
  }
  if (pipeline != "psro" && pipeline != "league" && pipeline != "br") {
    throw UsageError("unknown pipeline '" + pipeline + "' (psro, league or br)");
  }
  kv["pipeline"] = pipeline;
  kv = ExpandEnv(std::move(kv));
  EnvSpec env = EnvFromKeyValues(kv);
  PipelineConfig cfg = PipelineConfig::FromKeyValues(kv);
  cfg.Validate();
  if (a.out.empty()) throw UsageError("--out is required");

  Log(Level::kInfo, "training " + pipeline + " on " + kv["env"] + " for " +
                        std::to_string(cfg.generations) + " generations");
  Population pop = InitialPopulation(env, cfg);
  PipelineResult result;
  if (pipeline == "psro") {
    result = RunPsro(env, std::move(pop), cfg);
  } else if (pipeline == "league") {
    result = RunLeague(env, std::move(pop), nullptr, cfg);
  } else {
    result = RunBestResponse(env, std::move(pop), cfg);
  }

  const fs::path out(a.out);
  fs::create_directories(out);
  WriteRunDirectory(out.string(), env, result, cfg.metric);
  const std::string snapshot = KeyValueText(kv);
  WriteText(out / "config.txt", snapshot);
  char run_id[64];
  std::snprintf(run_id, sizeof(run_id), "%s-s%llu-%08llx", pipeline.c_str(),
                static_cast<unsigned long long>(cfg.seed),
                static_cast<unsigned long long>(Fnv1a(snapshot) & 0xffffffffULL));
  json manifest = {{"run_id", run_id},
                   {"pipeline", pipeline},
                   {"env", kv["env"]},
                   {"env_fingerprint", env.Fingerprint()},
                   {"seed", cfg.seed},
                   {"config", kv},
                   {"config_file", "config.txt"}};
  std::vector<std::string> artifacts = ListFiles(out);
  artifacts.push_back("manifest.json");
  manifest["artifacts"] = artifacts;
  WriteText(out / "manifest.json", manifest.dump(2) + "\n");

  json summary = {{"run_id", run_id}, {"out", out.string()},
                  {"population", result.population.size()}};
  if (env.kind == EnvSpec::Kind::kMatrix) summary["exploitability"] = result.final_exploitability;
  std::cout << summary.dump() << std::endl;
  return kExitOk;
}

// --- evaluate ----------------------------------------------------------------

int CmdEvaluate(const std::string& env_spec, const std::string& pa, const std::string& pb,
                int episodes, uint64_t seed, const std::string& replay_out) {
  if (env_spec.empty()) throw UsageError("--env is required");
  if (episodes < 1) throw UsageError("--episodes must be >= 1");
  EnvSpec env = EnvSpec::Parse(env_spec);
  Policy a = LoadPolicyFile(pa);
  Policy b = LoadPolicyFile(pb);
  const bool keep = !replay_out.empty();
  if (keep && env.kind != EnvSpec::Kind::kMiniPitch) throw ConfigError("replays need a minipitch env");
  EvalResult r = Evaluate(env, a, b, episodes, seed, keep);
  if (keep && !r.replays.empty()) WriteReplayFile(r.replays.front(), replay_out);
  std::cout << json{{"a", a.id},
                    {"b", b.id},
                    {"episodes", r.episodes},
                    {"win_rate", r.win_rate},
                    {"draw_rate", r.draw_rate},
                    {"loss_rate", r.loss_rate},
                    {"mean_goal_difference", r.mean_goal_difference}}
                   .dump()
            << std::endl;
  return kExitOk;
}

// --- analyze -----------------------------------------------------------------

std::string PrefixRows(const std::string& csv, const std::string& prefix, bool keep_header) {
  std::istringstream in(csv);
  std::string line, out;
  bool first = true;
  while (std::getline(in, line)) {
    if (first) {
      first = false;
      if (keep_header) out += "match," + line + "\n";
      continue;
    }
    out += prefix + "," + line + "\n";
  }
  return out;
}

int CmdAnalyze(const std::string& target, bool radar, bool crossplay, const std::string& env_flag,
               int episodes, uint64_t seed, const std::string& out_dir) {
  if (!fs::exists(target)) throw ConfigError("no such replay or run directory: " + target);
  std::map<std::string, std::string> files;  // name -> contents

  if (fs::is_regular_file(target)) {
    if (radar || crossplay) throw UsageError("--radar and --crossplay need a run directory");
    Replay replay = ReadReplayFile(target);
    MatchDecomposition d = Decompose(replay);
    MatchEvents ev = DetectEvents(replay, d);
    files["events.csv"] = EventCountsCsv(ev.counts);
    files["decomposition.txt"] = DumpDecomposition(d);
    std::vector<StyleMetrics> raw(2);
    for (int t = 0; t < 2; ++t) {
      StyleAccumulator acc;
      acc.Add(replay, t == 0 ? TeamId::kLeft : TeamId::kRight);
      raw[t] = acc.Metrics();
    }
    std::ostringstream style;
    style << "team";
    for (auto name : kStyleMetricNames) style << ',' << name;
    style << '\n';
    for (int t = 0; t < 2; ++t) {
      style << replay.header.policy_ids[t];
      for (double v : raw[t]) style << ',' << v;
      style << '\n';
    }
    files["style.csv"] = style.str();
    std::cout << files["events.csv"];
  } else {
    const fs::path dir(target);
    // Per-replay event counts for every stored replay.
    std::string events;
    bool header = true;
    if (fs::exists(dir / "replays")) {
      std::vector<fs::path> paths;
      for (const auto& e : fs::directory_iterator(dir / "replays")) paths.push_back(e.path());
      std::sort(paths.begin(), paths.end());
      for (const auto& p : paths) {
        Replay r = ReadReplayFile(p.string());
        events += PrefixRows(EventCountsCsv(DetectEvents(r, Decompose(r)).counts),
                             p.stem().string(), header);
        header = false;
      }
    }
    if (!events.empty()) files["events.csv"] = events;
    if (radar || crossplay) {
      KeyValues env_kv;
      if (fs::exists(dir / "manifest.json")) {
        json m = json::parse(ReadText((dir / "manifest.json").string()));
        if (m.contains("config")) env_kv = m["config"].get<KeyValues>();
      }
      if (!env_flag.empty()) env_kv = ExpandEnv({{"env", env_flag}});
      if (!env_kv.count("env")) throw UsageError("--env is required when the run has no manifest");
      KeyValues only_env;
      for (const auto& [k, v] : env_kv)
        if (k == "env" || k.rfind("env.", 0) == 0) only_env[k] = v;
      EnvSpec env = EnvFromKeyValues(only_env);
      Population pop = LoadPopulation(dir.string());
      std::vector<const Policy*> policies;
      std::vector<std::string> ids;
      for (const auto& m : pop.members()) {
        policies.push_back(m.policy.get());
        ids.push_back(m.id);
      }
      if (radar) {
        if (env.kind != EnvSpec::Kind::kMiniPitch) throw ConfigError("--radar needs a minipitch run");
        files["radar.csv"] = StyleRadarCsv(ids, StyleRadar(env.pitch, policies, episodes, seed));
        std::cout << files["radar.csv"];
      }
      if (crossplay) {
        files["crossplay.csv"] = CrossPlayCsv(ids, CrossPlayMatrix(env, policies, episodes, seed));
        std::cout << files["crossplay.csv"];
      }
    } else {
      std::cout << events;
    }
  }
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    for (const auto& [name, text] : files) WriteText(fs::path(out_dir) / name, text);
  }
  return kExitOk;
}

// --- serve -------------------------------------------------------------------

int CmdServe(const std::string& host, int port, const std::string& data_dir, uint64_t seed,
             int placement_episodes, const std::string& static_dir) {
  if (data_dir.empty()) throw UsageError("--data-dir is required");
  // Signals are taken synchronously by a dedicated thread; every other
  // thread inherits the blocked mask.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  RankingOptions options;
  options.data_dir = data_dir;
  options.seed = seed;
  options.placement_episodes = placement_episodes;
  RankingService service(options);
  httplib::Server server;
  RegisterRoutes(server, service);
  if (!static_dir.empty() && !server.set_mount_point("/debugger", static_dir)) {
    throw ConfigError("static directory not found: " + static_dir);
  }
  int bound = port;
  if (port == 0) {
    bound = server.bind_to_any_port(host);
    if (bound < 0) throw std::runtime_error("cannot bind " + host);
  } else if (!server.bind_to_port(host, port)) {
    throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port) +
                             " (port in use?)");
  }
  std::atomic<bool> signalled{false};
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&set, &sig);
    signalled = true;
    server.stop();
  });
  std::cout << json{{"event", "listening"}, {"host", host}, {"port", bound},
                    {"data_dir", data_dir}, {"version", kRankingServiceVersion}}
                   .dump()
            << std::endl;
  server.listen_after_bind();
  if (!signalled) pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  service.WaitIdle();
  service.WriteSnapshot();
  Log(Level::kInfo, "snapshot written; shutting down");
  std::cout << json{{"event", "stopped"}}.dump() << std::endl;
  return kExitOk;
}

// --- replay-dump -------------------------------------------------------------

int CmdReplayDump(const std::string& path, bool frames) {
  Replay replay = ReadReplayFile(path);
  const ReplayHeader& h = replay.header;
  std::cout << json{{"version", h.version},
                    {"env_fingerprint", h.env_fingerprint},
                    {"policy_ids", {h.policy_ids[0], h.policy_ids[1]}},
                    {"seed", h.seed},
                    {"config_hash", h.config_hash},
                    {"width", h.width},
                    {"height", h.height},
                    {"n_per_team", h.n_per_team},
                    {"steps", replay.steps.size()}}
                   .dump()
            << "\n";
  if (frames) {
    std::cout << WriteReplay(replay);
  } else {
    std::cout << DumpDecomposition(Decompose(replay));
  }
  return kExitOk;
}

int Main(int argc, char** argv) {
  CLI::App app{"pitchlab: population training, analysis and ranking for MiniPitch"};
  app.require_subcommand(1);

  TrainArgs train;
  CLI::App* t = app.add_subcommand("train", "Run a psro, league or br pipeline");
  t->add_option("pipeline", train.pipeline, "psro | league | br")
      ->check(CLI::IsMember({"psro", "league", "br"}));
  t->add_option("--env", train.env, "rps | matrix:FILE | minipitch | minipitch:CFG");
  t->add_option("--config", train.config, "key=value pipeline config; flags win")
      ->check(CLI::ExistingFile);
  t->add_option("--generations", train.generations)->check(CLI::NonNegativeNumber);
  t->add_option("--seed", train.seed);
  t->add_option("--mode", train.mode)->check(CLI::IsMember({"sync", "async"}));
  t->add_option("--workers", train.workers)->check(CLI::PositiveNumber);
  t->add_option("--out", train.out, "run directory");
  t->add_option("--set", train.sets, "extra key=value overrides");

  std::string e_env, e_a, e_b, e_replay;
  int e_episodes = 100;
  uint64_t e_seed = 0;
  CLI::App* e = app.add_subcommand("evaluate", "Play two policy files against each other");
  e->add_option("--env", e_env);
  e->add_option("--a", e_a)->required()->check(CLI::ExistingFile);
  e->add_option("--b", e_b)->required()->check(CLI::ExistingFile);
  e->add_option("--episodes", e_episodes);
  e->add_option("--seed", e_seed);
  e->add_option("--replay-out", e_replay, "write the first episode's replay here");

  std::string an_target, an_env, an_out;
  bool an_radar = false, an_cross = false;
  int an_episodes = 10;
  uint64_t an_seed = 0;
  CLI::App* an = app.add_subcommand("analyze", "Event counts, style radar, cross-play");
  an->add_option("target", an_target, "replay file or run directory")->required();
  an->add_flag("--radar", an_radar);
  an->add_flag("--crossplay", an_cross);
  an->add_option("--env", an_env, "needed when the run has no manifest");
  an->add_option("--episodes", an_episodes)->check(CLI::PositiveNumber);
  an->add_option("--seed", an_seed);
  an->add_option("--out", an_out, "directory for the CSV outputs");

  std::string s_host = "127.0.0.1", s_data, s_static;
  int s_port = 8080, s_placement = 4;
  uint64_t s_seed = 0;
  CLI::App* s = app.add_subcommand("serve", "Run the ranking service");
  s->add_option("--host", s_host);
  s->add_option("--port", s_port, "0 picks a free port")->check(CLI::Range(0, 65535));
  s->add_option("--data-dir", s_data);
  s->add_option("--seed", s_seed);
  s->add_option("--placement-episodes", s_placement)->check(CLI::PositiveNumber);
  s->add_option("--static", s_static, "directory served under /debugger");

  std::string d_path;
  bool d_frames = false;
  CLI::App* d = app.add_subcommand("replay-dump", "Print a replay header and decomposition");
  d->add_option("replay", d_path)->required();
  d->add_flag("--frames", d_frames, "re-emit the full replay instead of the decomposition");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& h) {
    return app.exit(h);
  } catch (const CLI::CallForAllHelp& h) {
    return app.exit(h);
  } catch (const CLI::ParseError& err) {
    Diagnose("usage", err.what());
    std::cerr << app.help();
    return kExitUsage;
  }

  try {
    if (t->parsed()) return CmdTrain(train, *t);
    if (e->parsed()) return CmdEvaluate(e_env, e_a, e_b, e_episodes, e_seed, e_replay);
    if (an->parsed()) return CmdAnalyze(an_target, an_radar, an_cross, an_env, an_episodes, an_seed, an_out);
    if (s->parsed()) return CmdServe(s_host, s_port, s_data, s_seed, s_placement, s_static);
    if (d->parsed()) return CmdReplayDump(d_path, d_frames);
  } catch (const UsageError& err) {
    Diagnose("usage", err.what());
    return kExitUsage;
  } catch (const ParseError& err) {
    Diagnose("parse", err.what(), err.line());
    return kExitConfig;
  } catch (const ConfigError& err) {
    Diagnose("config", err.what());
    return kExitConfig;
  } catch (const std::exception& err) {
    Diagnose("runtime", err.what());
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace
}  // namespace pitchlab

int main(int argc, char** argv) { return pitchlab::Main(argc, argv); }
