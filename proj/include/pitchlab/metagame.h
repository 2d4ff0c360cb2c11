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

// Empirical game layer: payoff tables, Nash equilibria of zero-sum matrices,
// exploitability, Elo ratings and PFSP opponent distributions.

#ifndef PITCHLAB_METAGAME_H_
#define PITCHLAB_METAGAME_H_

#include <cstdint>
#include <map>
#include <shared_mutex>
#include <string>
#include <vector>

namespace pitchlab {

using Matrix = std::vector<std::vector<double>>;
using MixedStrategy = std::vector<double>;

void ValidateMixedStrategy(const MixedStrategy& p, size_t size);

struct PayoffEntry {
  int games = 0;
  int wins = 0;
  int draws = 0;
  int losses = 0;
  double gd_sum = 0.0;

  double mean_gd() const { return games ? gd_sum / games : 0.0; }
  double win_rate_payoff() const {
    return games ? static_cast<double>(wins - losses) / games : 0.0;
  }
  friend bool operator==(const PayoffEntry&, const PayoffEntry&) = default;
};

enum class PayoffMetric { kWinRate, kGoalDifference };

// Row policy's results against column policy. Recording (i, j) also records
// the mirrored result at (j, i). Thread-safe: one writer, many readers.
class PayoffTable {
 public:
  PayoffTable() = default;
  PayoffTable(const PayoffTable& other);
  PayoffTable& operator=(const PayoffTable& other);

  int Add(const std::string& id);  // returns the new index
  int size() const;
  std::vector<std::string> ids() const;
  int IndexOf(const std::string& id) const;  // -1 if absent
  PayoffEntry entry(int i, int j) const;

  // One game; `goal_difference` is from i's side.
  void Record(int i, int j, double goal_difference);
  // Exact expected payoff, e.g. from a matrix game.
  void SetExact(int i, int j, double value);

  // Antisymmetric; the diagonal is zero.
  Matrix Payoffs(PayoffMetric metric) const;
  std::string ToCsv(PayoffMetric metric) const;

 private:
  void RecordLocked(int i, int j, double gd);

  mutable std::shared_mutex mu_;
  std::vector<std::string> ids_;
  std::vector<std::vector<PayoffEntry>> entries_;
};

struct NashResult {
  MixedStrategy row;
  MixedStrategy col;
  double value = 0.0;
  double exploitability = 0.0;
  long long iterations = 0;
  bool converged = false;  // false when the cap was hit before `tol`
  bool refined = false;    // exact solve on the detected support succeeded
};

// Alternating fictitious play with lowest-index tie-breaking, followed by an
// exact solve on the support it found when that solve checks out.
NashResult SolveNash(const Matrix& a, double tol = 1e-3,
                     long long max_iterations = 1000000);

double Exploitability(const Matrix& a, const MixedStrategy& row,
                      const MixedStrategy& col);

struct EloPair {
  double a;
  double b;
};
inline constexpr double kEloInitial = 1000.0;
inline constexpr double kEloK = 32.0;
double EloExpected(double ra, double rb);
EloPair EloUpdate(double ra, double rb, double outcome_a, double k = kEloK);

struct MatchResult {
  int64_t timestamp = 0;
  std::string a;
  std::string b;
  double outcome_a = 0.5;  // 1 win, 0.5 draw, 0 loss
};

class EloTable {
 public:
  explicit EloTable(double k = kEloK) : k_(k) {}
  double rating(const std::string& id) const;
  void Ensure(const std::string& id);
  void Update(const std::string& a, const std::string& b, double outcome_a);
  const std::map<std::string, double>& ratings() const { return ratings_; }
  double k() const { return k_; }

 private:
  double k_;
  std::map<std::string, double> ratings_;
};

// Sequential updates in timestamp order; equal timestamps are ordered by a
// seeded shuffle so the result does not depend on log layout.
EloTable EloFromLog(std::vector<MatchResult> log, uint64_t tie_seed = 0,
                    double k = kEloK);
std::string EloCsv(const EloTable& table);

enum class PfspWeighting { kHard, kEven };
MixedStrategy PfspDistribution(const std::vector<double>& win_rates,
                               PfspWeighting weighting = PfspWeighting::kHard);

}  // namespace pitchlab

#endif  // PITCHLAB_METAGAME_H_
