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

#include <gtest/gtest.h>

#include <algorithm>

#include "test_util.h"

namespace pitchlab {
namespace {

using testing::AllIdle;
using testing::RandomEpisode;

MiniPitchConfig Config(int n = 3) {
  MiniPitchConfig c;
  c.n_per_team = n;
  return c;
}

TEST(MiniPitchTest, ResetPlacesBallAtCentre) {
  MiniPitch env(Config());
  RawObservation obs = env.Reset(7);
  EXPECT_EQ(obs.ball.position, (GridVec{6, 4}));
  EXPECT_EQ(obs.score, (std::array<int, 2>{0, 0}));
  EXPECT_EQ(obs.game_mode, GameMode::kKickOff);
  EXPECT_EQ(obs.steps_left, 400);
  EXPECT_EQ(obs.ball.owned_team, TeamId::kLeft);
  EXPECT_EQ(obs.ball.owned_player, 2);
  EXPECT_EQ(obs.left[2].role, Role::kForward);
  EXPECT_EQ(obs.left[0].role, Role::kDefender);
  EXPECT_EQ(obs.left[1].role, Role::kMidfielder);
  ASSERT_EQ(obs.keepers.size(), 2u);
}

TEST(MiniPitchTest, ResetIsDeterministic) {
  MiniPitch a(Config()), b(Config());
  EXPECT_EQ(a.Reset(7), b.Reset(7));
  EXPECT_EQ(RandomEpisode(Config(), 11), RandomEpisode(Config(), 11));
}

TEST(MiniPitchTest, HalftimeConfigHalvesNothingAtReset) {
  MiniPitchConfig c = Config();
  c.halftime_swap = true;
  c.max_steps = 200;
  MiniPitch env(c);
  EXPECT_EQ(env.Reset(1).steps_left, 200);
}

TEST(MiniPitchTest, InvalidConfigRejected) {
  MiniPitchConfig c = Config();
  c.width = 3;
  EXPECT_THROW(MiniPitch{c}, ConfigError);
  c = Config();
  c.n_per_team = 0;
  EXPECT_THROW(MiniPitch{c}, ConfigError);
  c = Config();
  c.max_steps = 0;
  EXPECT_THROW(MiniPitch{c}, ConfigError);
}

TEST(MiniPitchTest, BadActionAndStepAfterTerminal) {
  MiniPitchConfig c = Config(1);
  c.max_steps = 1;
  MiniPitch env(c);
  env.Reset(0);
  EXPECT_THROW(env.Step({{{19}, {0}}}), std::out_of_range);
  EXPECT_THROW(env.Step({{{0, 0}, {0}}}), std::out_of_range);
  StepResult r = env.Step(AllIdle(1));
  EXPECT_TRUE(r.terminal);
  EXPECT_THROW(env.Step(AllIdle(1)), std::logic_error);
}

TEST(MiniPitchTest, IdleStepLeavesFieldPlayersAndBall) {
  MiniPitch env(Config());
  RawObservation before = env.Reset(3);
  StepResult r = env.Step(AllIdle(3));
  EXPECT_TRUE(r.events.empty());
  EXPECT_EQ(r.observation.left, before.left);
  EXPECT_EQ(r.observation.right, before.right);
  EXPECT_EQ(r.observation.ball.position, before.ball.position);
  EXPECT_EQ(r.observation.steps_left, before.steps_left - 1);
}

// Left forward on the edge of the goal mouth.
RawObservation AdjacentShotState(MiniPitch& env) {
  RawObservation s = env.Reset(5);
  s.game_mode = GameMode::kNormal;
  s.left[2].position = {11, 4};
  s.ball.position = {11, 4};
  s.ball.owned_team = TeamId::kLeft;
  s.ball.owned_player = 2;
  return s;
}

TEST(MiniPitchTest, AdjacentShotAlwaysScores) {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    MiniPitch env(Config());
    env.Reset(seed);
    env.LoadState(AdjacentShotState(env));
    JointAction a = AllIdle(3);
    a[0][2] = static_cast<int>(Action::kShot);
    StepResult r = env.Step(a);
    bool goal = std::any_of(r.events.begin(), r.events.end(), [](auto& e) {
      return e.kind == EventKind::kGoal && e.team == TeamId::kLeft;
    });
    EXPECT_TRUE(goal) << seed;
    EXPECT_EQ(r.observation.score, (std::array<int, 2>{1, 0}));
    EXPECT_EQ(r.observation.game_mode, GameMode::kKickOff);
    EXPECT_EQ(r.observation.ball.owned_team, TeamId::kRight);
  }
}

TEST(MiniPitchTest, AcademyEndsOnGoal) {
  MiniPitchConfig c = Config();
  c.academy_mode = true;
  MiniPitch env(c);
  env.LoadState(AdjacentShotState(env));
  JointAction a = AllIdle(3);
  a[0][2] = static_cast<int>(Action::kShot);
  EXPECT_TRUE(env.Step(a).terminal);
}

TEST(MiniPitchTest, AcademyEndsOnInterception) {
  MiniPitchConfig c = Config();
  c.academy_mode = true;
  c.keepers = false;
  bool intercepted = false;
  for (uint64_t seed = 0; seed < 64 && !intercepted; ++seed) {
    MiniPitch env(c);
    RawObservation s = env.Reset(seed);
    s.game_mode = GameMode::kNormal;
    s.left[2].position = {2, 4};
    s.left[0].position = {9, 4};
    s.left[1].position = {11, 7};
    for (int i = 0; i < 3; ++i) s.right[i].position = {4 + i, 4};
    s.ball.position = {2, 4};
    s.ball.owned_team = TeamId::kLeft;
    s.ball.owned_player = 2;
    env.LoadState(s);
    JointAction a = AllIdle(3);
    a[0][2] = static_cast<int>(Action::kShortPass);
    for (int t = 0; t < 6 && !env.terminal(); ++t) {
      StepResult r = env.Step(a);
      a = AllIdle(3);
      for (const Event& e : r.events) {
        if (e.kind == EventKind::kOwnershipChange &&
            e.team == TeamId::kRight) {
          intercepted = true;
          EXPECT_TRUE(r.terminal);
        }
      }
    }
  }
  EXPECT_TRUE(intercepted);
}

TEST(MiniPitchTest, OwnershipInvariants) {
  for (uint64_t seed = 0; seed < 8; ++seed) {
    Replay r = RandomEpisode(Config(), seed, 0.5);
    for (const StepRecord& rec : r.steps) {
      const BallState& b = rec.state.ball;
      EXPECT_EQ(b.owned_team == TeamId::kNone, b.owned_player < 0);
      if (b.owned_team != TeamId::kNone) {
        EXPECT_EQ(b.pass_team, TeamId::kNone);
        EXPECT_EQ(rec.state.team(b.owned_team)[b.owned_player].position,
                  b.position);
      }
      PitchGeometry geo{rec.state.width, rec.state.height};
      EXPECT_TRUE(geo.InBounds(b.position));
      for (TeamId t : {TeamId::kLeft, TeamId::kRight}) {
        for (const PlayerState& p : rec.state.team(t)) {
          EXPECT_TRUE(geo.InBounds(p.position));
        }
      }
    }
  }
}

TEST(MiniPitchTest, ScoreMatchesGoalEvents) {
  for (uint64_t seed = 0; seed < 8; ++seed) {
    Replay r = RandomEpisode(Config(2), seed, 0.6);
    std::array<int, 2> goals{0, 0};
    for (const StepRecord& rec : r.steps) {
      for (const Event& e : rec.events) {
        if (e.kind == EventKind::kGoal) ++goals[Index(e.team)];
      }
    }
    EXPECT_EQ(goals, r.steps.back().state.score);
    EXPECT_EQ(r.steps.back().state.steps_left, 0);
    EXPECT_EQ(static_cast<int>(r.steps.size()), 401);
  }
}

TEST(FrameTest, MirrorIsAnInvolution) {
  Replay r = RandomEpisode(Config(), 2);
  for (size_t t = 0; t < r.steps.size(); t += 17) {
    const RawObservation& s = r.steps[t].state;
    EXPECT_EQ(Mirror(Mirror(s)), s);
    EXPECT_EQ(Reflect(Reflect(s)), s);
    EXPECT_EQ(TeamView(s, TeamId::kRight), Mirror(s));
    EXPECT_EQ(TeamView(s, TeamId::kLeft), s);
  }
}

// Playing the right team's actions from its own frame must be the mirror of
// playing the same actions for the left team from the mirrored start.
TEST(FrameTest, DynamicsCommuteWithMirror) {
  MiniPitchConfig c = Config();
  c.keepers = false;
  MiniPitch a(c), b(c);
  RawObservation sa = a.Reset(4);
  a.LoadState(sa);
  // b starts from the mirror image with ownership handed to the right team.
  b.Reset(4);
  b.LoadState(Mirror(sa));
  for (int t = 0; t < 30; ++t) {
    int m = 1 + (t % 8);
    JointAction ja{std::vector<int>{m, 0, 13}, std::vector<int>{0, 0, 0}};
    JointAction jb{ja[1], ja[0]};
    StepResult ra = a.Step(ja);
    StepResult rb = b.Step(jb);
    EXPECT_EQ(Mirror(ra.observation).left, rb.observation.left) << t;
    EXPECT_EQ(Mirror(ra.observation).ball.position,
              rb.observation.ball.position);
  }
}

TEST(FrameTest, HalftimeReflectsPositions) {
  MiniPitchConfig c = Config();
  c.halftime_swap = true;
  c.max_steps = 20;
  c.keepers = false;
  MiniPitch env(c);
  env.Reset(0);
  RawObservation before;
  for (int t = 0; t < 10; ++t) before = env.Step(AllIdle(3)).observation;
  ASSERT_FALSE(before.sides_swapped);
  RawObservation after = env.Step(AllIdle(3)).observation;
  EXPECT_TRUE(after.sides_swapped);
  EXPECT_EQ(after.left, Reflect(before).left);
  EXPECT_EQ(after.right, Reflect(before).right);
  EXPECT_FALSE(AttacksRight(after, TeamId::kLeft));
  // The team view is unchanged by the swap.
  EXPECT_EQ(TeamView(after, TeamId::kLeft).left,
            TeamView(before, TeamId::kLeft).left);
}

TEST(ShotTest, ProbabilityCurve) {
  EXPECT_DOUBLE_EQ(ShotSuccessProbability(1), 1.0);
  EXPECT_NEAR(ShotSuccessProbability(2), 0.8, 1e-12);
  EXPECT_NEAR(ShotSuccessProbability(4), 0.4, 1e-12);
  EXPECT_DOUBLE_EQ(ShotSuccessProbability(10), 0.0);
  PitchGeometry geo{12, 8};
  EXPECT_EQ(geo.ShotDistance({11, 3}), 1);
  EXPECT_EQ(geo.ShotDistance({11, 0}), 3);
  EXPECT_EQ(geo.ShotDistance({8, 4}), 4);
}

TEST(MatrixGameTest, RockPaperScissors) {
  MatrixGame g = MatrixGame::RockPaperScissors();
  EXPECT_EQ(g.Step(0, 2), std::make_pair(1.0, -1.0));
  EXPECT_EQ(g.Step(0, 1), std::make_pair(-1.0, 1.0));
  EXPECT_EQ(g.Step(1, 1), std::make_pair(0.0, 0.0));
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) EXPECT_EQ(g.at(r, c), -g.at(c, r));
}

TEST(MatrixGameTest, FromText) {
  MatrixGame g = MatrixGame::FromText("0 2\n1 0\n");
  EXPECT_EQ(g.rows(), 2);
  EXPECT_EQ(g.Step(0, 1), std::make_pair(2.0, -2.0));
  EXPECT_THROW(MatrixGame::FromText("1 2\n3\n"), ConfigError);
  EXPECT_THROW(MatrixGame::FromText("1 x\n"), ParseError);
  EXPECT_THROW(g.Step(2, 0), std::out_of_range);
}

}  // namespace
}  // namespace pitchlab
