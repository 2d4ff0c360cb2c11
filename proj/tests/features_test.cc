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

#include <gtest/gtest.h>

#include <cmath>

#include "oracles.h"
#include "test_util.h"

namespace pitchlab {
namespace {

RawObservation Kickoff(int n = 3, uint64_t seed = 7) {
  MiniPitchConfig c;
  c.n_per_team = n;
  MiniPitch env(c);
  return env.Reset(seed);
}

TEST(LayoutTest, SimpleLength) {
  EXPECT_EQ(SimpleLayout(3).size(), 41);
  for (int n = 1; n <= 5; ++n) {
    EXPECT_EQ(SimpleLayout(n).size(), 4 * (2 * n) + 6 + 3 + 5 + n);
  }
}

TEST(LayoutTest, ComplexBlocks) {
  for (int n = 1; n <= 5; ++n) {
    const FeatureLayout& l = ComplexLayout(n);
    std::vector<int> lengths;
    for (const auto& b : l.blocks) lengths.push_back(b.length);
    EXPECT_EQ(lengths, (std::vector<int>{19, 18, 19, 7, 7, 7 * (n - 1), 7 * n, n}));
    EXPECT_EQ(l.size(), 19 + 18 + 19 + 7 + 7 + 7 * (n - 1) + 7 * n + n);
    int offset = 0;
    for (const auto& b : l.blocks) {
      EXPECT_EQ(b.offset, offset);
      EXPECT_EQ(static_cast<int>(b.fields.size()), b.length);
      offset += b.length;
    }
  }
  EXPECT_EQ(ComplexLayout(3).size(), 108);
}

TEST(LayoutTest, SchemaRoundTrip) {
  const FeatureLayout& l = ComplexLayout(3);
  FeatureLayout back = FeatureLayout::FromSchemaText(l.ToSchemaText());
  EXPECT_EQ(back.ToSchemaText(), l.ToSchemaText());
  EXPECT_THROW(FeatureLayout::FromSchemaText("ball 0 2 x\n"), ParseError);
}

TEST(EncodeTest, UnownedBallOwnershipOneHot) {
  RawObservation obs = Kickoff();
  obs.ball.owned_team = TeamId::kNone;
  obs.ball.owned_player = -1;
  FeatureVector f = EncodeSimple(obs, TeamId::kLeft, 0);
  auto own = f.block("ownership");
  EXPECT_EQ(std::vector<double>(own.begin(), own.end()),
            (std::vector<double>{1, 0, 0}));
}

TEST(EncodeTest, InvalidAgent) {
  RawObservation obs = Kickoff();
  EXPECT_THROW(EncodeSimple(obs, TeamId::kLeft, 3), std::out_of_range);
  EXPECT_THROW(EncodeComplex(obs, TeamId::kRight, -1), std::out_of_range);
}

TEST(EncodeTest, ClosestTeammateAdjacent) {
  RawObservation obs = Kickoff(2);
  obs.left[0].position = {3, 3};
  obs.left[1].position = {4, 3};
  FeatureVector f = EncodeComplex(obs, TeamId::kLeft, 0);
  auto mate = f.block("closest_teammate");
  EXPECT_NEAR(mate[5], 1.0 / std::hypot(11.0, 7.0), 1e-12);
}

TEST(EncodeTest, ClosestOpponentTieGoesToLowestIndex) {
  RawObservation obs = Kickoff(2);
  obs.left[0].position = {5, 3};
  obs.right[0].position = {3, 3};
  obs.right[1].position = {7, 3};
  FeatureVector f = EncodeComplex(obs, TeamId::kLeft, 0);
  EXPECT_NEAR(f.block("closest_opponent")[0], -2.0 / 11.0, 1e-12);
}

TEST(EncodeTest, AvailableActionsEqualsMask) {
  for (const auto& rec : testing::RandomEpisode(MiniPitchConfig{}, 3).steps) {
    for (int i = 0; i < 3; ++i) {
      ActionMask m = ComputeActionMask(rec.state, TeamId::kRight, i);
      auto block = EncodeComplex(rec.state, TeamId::kRight, i).block("available_actions");
      for (int a = 0; a < kActionCount; ++a) EXPECT_EQ(block[a], m[a] ? 1.0 : 0.0);
    }
  }
}

TEST(EncodeTest, MirrorInvarianceAndRange) {
  MiniPitchConfig c;
  c.halftime_swap = true;
  for (uint64_t seed = 0; seed < 3; ++seed) {
    for (const auto& rec : testing::RandomEpisode(c, seed).steps) {
      RawObservation mirrored = Mirror(rec.state);
      for (int i = 0; i < 3; ++i) {
        FeatureVector a = EncodeComplex(rec.state, TeamId::kRight, i);
        FeatureVector b = EncodeComplex(mirrored, TeamId::kLeft, i);
        ASSERT_EQ(a.values, b.values);
        EXPECT_EQ(EncodeSimple(rec.state, TeamId::kRight, i).values,
                  EncodeSimple(mirrored, TeamId::kLeft, i).values);
        for (double v : a.values) {
          ASSERT_TRUE(std::isfinite(v));
          ASSERT_LE(std::abs(v), 1.0 + 1e-12);
        }
      }
    }
  }
}

TEST(MaskTest, OpponentOwnsBall) {
  RawObservation obs = Kickoff();
  ActionMask m = ComputeActionMask(obs, TeamId::kRight, 0);
  for (Action a : {Action::kLongPass, Action::kHighPass, Action::kShortPass,
                   Action::kShot, Action::kDribble}) {
    EXPECT_FALSE(m[static_cast<int>(a)]);
  }
  EXPECT_TRUE(m[static_cast<int>(Action::kIdle)]);
}

TEST(MaskTest, OwnTeamOwnsBallDisablesSlide) {
  RawObservation obs = Kickoff();
  obs.game_mode = GameMode::kNormal;
  for (int i = 0; i < 3; ++i) {
    EXPECT_FALSE(ComputeActionMask(obs, TeamId::kLeft, i)[static_cast<int>(Action::kSliding)]);
  }
}

TEST(MaskTest, InsidePenaltyArea) {
  RawObservation obs = Kickoff();
  obs.game_mode = GameMode::kNormal;
  obs.left[2].position = {11, 4};
  obs.ball.position = {11, 4};
  ActionMask m = ComputeActionMask(obs, TeamId::kLeft, 2);
  EXPECT_FALSE(m[static_cast<int>(Action::kHighPass)]);
  EXPECT_FALSE(m[static_cast<int>(Action::kLongPass)]);
  EXPECT_TRUE(m[static_cast<int>(Action::kShot)]);
  EXPECT_TRUE(m[static_cast<int>(Action::kShortPass)]);
}

TEST(MaskTest, SetPieceTaker) {
  RawObservation obs = Kickoff();
  obs.game_mode = GameMode::kPenalty;
  obs.left[2].position = {9, 4};
  obs.ball.position = {9, 4};
  ActionMask m = ComputeActionMask(obs, TeamId::kLeft, 2);
  EXPECT_TRUE(m[static_cast<int>(Action::kShot)]);
  EXPECT_FALSE(m[static_cast<int>(Action::kShortPass)]);
  EXPECT_FALSE(m[static_cast<int>(Action::kTop)]);
  EXPECT_FALSE(ComputeActionMask(obs, TeamId::kRight, 0)[static_cast<int>(Action::kSliding)]);
}

TEST(MaskTest, BitsRoundTrip) {
  ActionMask m = ComputeActionMask(Kickoff(), TeamId::kRight, 1);
  EXPECT_EQ(ActionMask::FromBits(m.bits()).allowed, m.allowed);
  EXPECT_EQ(ActionMask::All().count(), kActionCount);
}

// Agrees with the rule-by-rule oracle on random reachable states, and every
// masked-in action is accepted by the environment.
TEST(MaskTest, MatchesOracleOnRandomPlay) {
  MiniPitchConfig c;
  c.halftime_swap = true;
  int checked = 0;
  for (uint64_t seed = 0; seed < 4; ++seed) {
    for (const auto& rec : testing::RandomEpisode(c, 100 + seed, 0.5).steps) {
      for (TeamId t : {TeamId::kLeft, TeamId::kRight}) {
        for (int i = 0; i < 3; ++i) {
          ASSERT_EQ(ComputeActionMask(rec.state, t, i).allowed,
                    oracle::ExpectedMask(rec.state, t, i));
          ++checked;
        }
      }
    }
  }
  EXPECT_GT(checked, 4000);
}

}  // namespace
}  // namespace pitchlab
