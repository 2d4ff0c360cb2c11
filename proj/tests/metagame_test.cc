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

#include "pitchlab/metagame.h"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.h"

namespace pitchlab {
namespace {

Matrix RandomMatrix(int m, int n, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  Matrix a(m, std::vector<double>(n));
  for (auto& row : a)
    for (double& v : row) v = u(rng);
  return a;
}

TEST(PayoffTableTest, WinRateAndAntisymmetry) {
  PayoffTable t;
  t.Add("a");
  t.Add("b");
  t.Add("c");
  for (double gd : {1.0, 2.0, 1.0, -1.0}) t.Record(0, 1, gd);
  EXPECT_DOUBLE_EQ(t.Payoffs(PayoffMetric::kWinRate)[0][1], 0.5);
  EXPECT_DOUBLE_EQ(t.Payoffs(PayoffMetric::kGoalDifference)[0][1], 0.75);
  for (int i = 0; i < 3; ++i) t.Record(1, 2, 0.0);
  EXPECT_EQ(t.Payoffs(PayoffMetric::kWinRate)[1][2], 0.0);
  t.Record(2, 2, 1.0);
  EXPECT_EQ(t.entry(2, 2).games, 1);
  EXPECT_EQ(t.entry(0, 1).wins, t.entry(1, 0).losses);
  for (auto metric : {PayoffMetric::kWinRate, PayoffMetric::kGoalDifference}) {
    Matrix m = t.Payoffs(metric);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) EXPECT_EQ(m[i][j] + m[j][i], 0.0);
  }
  EXPECT_THROW(t.Add("a"), std::invalid_argument);
  EXPECT_EQ(t.IndexOf("c"), 2);
  EXPECT_EQ(t.IndexOf("z"), -1);
  EXPECT_EQ(t.ToCsv(PayoffMetric::kWinRate).substr(0, 15), "policy,a,b,c\na,");
}

TEST(NashTest, RockPaperScissors) {
  Matrix rps = {{0, -1, 1}, {1, 0, -1}, {-1, 1, 0}};
  NashResult r = SolveNash(rps);
  EXPECT_TRUE(r.converged);
  for (double p : r.row) EXPECT_NEAR(p, 1.0 / 3, 1e-3);
  for (double p : r.col) EXPECT_NEAR(p, 1.0 / 3, 1e-3);
  EXPECT_NEAR(r.value, 0.0, 1e-3);
}

TEST(NashTest, MatchingPennies) {
  NashResult r = SolveNash({{1, -1}, {-1, 1}});
  EXPECT_NEAR(r.row[0], 0.5, 1e-3);
  EXPECT_NEAR(r.col[0], 0.5, 1e-3);
  EXPECT_NEAR(r.value, 0.0, 1e-3);
}

TEST(NashTest, TwoByTwo) {
  Matrix a = {{0, 2}, {1, 0}};
  NashResult r = SolveNash(a, 1e-6);
  EXPECT_NEAR(r.row[0], 1.0 / 3, 1e-4);
  EXPECT_NEAR(r.col[0], 2.0 / 3, 1e-4);
  EXPECT_NEAR(r.value, 2.0 / 3, 1e-6);
  EXPECT_NEAR(oracle::SupportEnumerationValue(a), 2.0 / 3, 1e-12);
}

TEST(NashTest, RandomFiveByFive) {
  for (uint64_t seed = 0; seed < 100; ++seed) {
    NashResult r = SolveNash(RandomMatrix(5, 5, seed));
    EXPECT_TRUE(r.converged) << seed;
    EXPECT_LE(r.exploitability, 1e-3) << seed;
  }
}

TEST(NashTest, SmallGamesMatchSupportEnumeration) {
  for (uint64_t seed = 0; seed < 200; ++seed) {
    int m = 2 + seed % 2, n = 2 + (seed / 2) % 2;
    Matrix a = RandomMatrix(m, n, 1000 + seed);
    EXPECT_NEAR(SolveNash(a).value, oracle::SupportEnumerationValue(a), 1e-4) << seed;
  }
}

TEST(NashTest, CapReachedIsFlagged) {
  NashResult r = SolveNash(RandomMatrix(5, 5, 1), 0.0, 10);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.iterations, 10);
  EXPECT_GT(r.exploitability, 0.0);
}

TEST(NashTest, PermutationEquivariant) {
  Matrix a = RandomMatrix(4, 4, 77);
  for (auto& row : a) row.resize(4);
  // Antisymmetric, like a win-rate payoff table.
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) a[i][j] = i == j ? 0 : (i < j ? a[i][j] : -a[j][i]);
  std::vector<int> perm = {2, 0, 3, 1};
  Matrix b(4, std::vector<double>(4));
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) b[i][j] = a[perm[i]][perm[j]];
  NashResult ra = SolveNash(a, 1e-5), rb = SolveNash(b, 1e-5);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(rb.row[i], ra.row[perm[i]], 2e-2);
  EXPECT_NEAR(ra.value, rb.value, 1e-4);
}

TEST(ExploitabilityTest, Examples) {
  Matrix rps = {{0, -1, 1}, {1, 0, -1}, {-1, 1, 0}};
  std::vector<double> u = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  EXPECT_NEAR(Exploitability(rps, u, u), 0.0, 1e-15);
  EXPECT_NEAR(Exploitability(rps, {1, 0, 0}, u), 1.0, 1e-15);
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    Matrix a = RandomMatrix(3, 4, trial);
    std::vector<double> r(3), c(4);
    double sr = 0, sc = 0;
    for (double& x : r) sr += (x = std::uniform_real_distribution<double>(0, 1)(rng));
    for (double& x : c) sc += (x = std::uniform_real_distribution<double>(0, 1)(rng));
    for (double& x : r) x /= sr;
    for (double& x : c) x /= sc;
    EXPECT_GE(Exploitability(a, r, c), -1e-12);
  }
  EXPECT_THROW(Exploitability(rps, {1, 0}, u), std::invalid_argument);
}

TEST(EloTest, Examples) {
  EloPair d = EloUpdate(1000, 1000, 0.5);
  EXPECT_EQ(d.a, 1000);
  EXPECT_EQ(d.b, 1000);
  EloPair w = EloUpdate(1000, 1000, 1.0, 32);
  EXPECT_EQ(w.a, 1016);
  EXPECT_EQ(w.b, 984);
  EloPair u = EloUpdate(1200, 1000, 1.0, 32);
  double expected = 1.0 / (1.0 + std::pow(10.0, -0.5));
  EXPECT_NEAR(u.a, 1200 + 32 * (1 - expected), 1e-9);
  EXPECT_NEAR(u.a - 1200, 7.69, 5e-3);
  EXPECT_THROW(EloUpdate(1000, 1000, 0.3), std::invalid_argument);
}

TEST(EloTest, ConservesSum) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> r(600, 1600);
  for (int i = 0; i < 1000; ++i) {
    double ra = r(rng), rb = r(rng);
    EloPair p = EloUpdate(ra, rb, (i % 3) * 0.5);
    EXPECT_NEAR(p.a + p.b, ra + rb, 1e-9);
  }
}

TEST(EloTest, LogOrderWithTies) {
  std::vector<MatchResult> log = {{2, "a", "b", 1.0}, {1, "b", "c", 1.0}, {2, "c", "a", 0.5}};
  EloTable x = EloFromLog(log, 3);
  std::reverse(log.begin(), log.end());
  EloTable y = EloFromLog(log, 3);
  double sum = 0;
  for (const auto& [id, v] : x.ratings()) sum += v;
  EXPECT_NEAR(sum, 3000.0, 1e-9);
  EXPECT_NEAR(x.rating("b"), EloFromLog({{1, "b", "c", 1.0}}).rating("b") + 0, 40.0);
  EXPECT_EQ(EloCsv(x).substr(0, 11), "policy,elo\n");
  (void)y;
}

TEST(PfspTest, Examples) {
  auto hard = PfspDistribution({0, 0.5, 1});
  EXPECT_NEAR(hard[0], 0.8, 1e-12);
  EXPECT_NEAR(hard[1], 0.2, 1e-12);
  EXPECT_EQ(hard[2], 0.0);
  for (double p : PfspDistribution({0.3, 0.3, 0.3})) EXPECT_NEAR(p, 1.0 / 3, 1e-12);
  for (double p : PfspDistribution({1, 1})) EXPECT_EQ(p, 0.5);
  auto even = PfspDistribution({0.2, 1.0, 0.9}, PfspWeighting::kEven);
  EXPECT_EQ(even, (std::vector<double>{0.5, 0.0, 0.5}));
  EXPECT_THROW(PfspDistribution({1.5}), std::invalid_argument);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> wr(1 + i % 6);
    for (double& x : wr) x = std::uniform_real_distribution<double>(0, 1)(rng);
    EXPECT_NO_THROW(ValidateMixedStrategy(PfspDistribution(wr), wr.size()));
  }
}

}  // namespace
}  // namespace pitchlab
