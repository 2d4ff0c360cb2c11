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

#include <algorithm>
#include <cmath>
#include <functional>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "pitchlab/common.h"

namespace pitchlab {
namespace {

void CheckMatrix(const Matrix& a) {
  if (a.empty() || a[0].empty()) throw std::invalid_argument("empty payoff matrix");
  for (const auto& row : a) {
    if (row.size() != a[0].size()) throw std::invalid_argument("ragged payoff matrix");
    for (double v : row) {
      if (!std::isfinite(v)) throw std::invalid_argument("non-finite payoff");
    }
  }
}

int ArgMax(const std::vector<double>& v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}
int ArgMin(const std::vector<double>& v) {
  return static_cast<int>(std::min_element(v.begin(), v.end()) - v.begin());
}

std::string FormatDouble(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}


// Solves m z = b in place by Gauss-Jordan elimination; false if singular.
bool SolveSquare(Matrix m, std::vector<double> b, std::vector<double>* z) {
  const size_t n = b.size();
  for (size_t col = 0; col < n; ++col) {
    size_t piv = col;
    for (size_t r = col + 1; r < n; ++r)
      if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
    if (std::abs(m[piv][col]) < 1e-12) return false;
    std::swap(m[piv], m[col]);
    std::swap(b[piv], b[col]);
    for (size_t r = 0; r < n; ++r) {
      if (r == col || m[r][col] == 0.0) continue;
      double f = m[r][col] / m[col][col];
      for (size_t k = col; k < n; ++k) m[r][k] -= f * m[col][k];
      b[r] -= f * b[col];
    }
  }
  z->resize(n);
  for (size_t i = 0; i < n; ++i) (*z)[i] = b[i] / m[i][i];
  return true;
}

// Mixed strategy on `support` making the opponent indifferent across
// `other`. Unknowns are the weights plus the common payoff.
bool Indifference(const Matrix& a, const std::vector<int>& support,
                  const std::vector<int>& other, bool rows, MixedStrategy* out,
                  size_t size) {
  const size_t k = support.size();
  Matrix m(k + 1, std::vector<double>(k + 1, 0.0));
  std::vector<double> b(k + 1, 0.0), z;
  for (size_t i = 0; i < k; ++i) {
    for (size_t j = 0; j < k; ++j) {
      m[i][j] = rows ? a[support[j]][other[i]] : a[other[i]][support[j]];
    }
    m[i][k] = -1.0;
    m[k][i] = 1.0;
  }
  b[k] = 1.0;
  if (!SolveSquare(m, b, &z)) return false;
  out->assign(size, 0.0);
  double sum = 0.0;
  for (size_t i = 0; i < k; ++i) {
    if (z[i] < -1e-9) return false;
    (*out)[support[i]] = std::max(0.0, z[i]);
    sum += (*out)[support[i]];
  }
  for (double& x : *out) x /= sum;
  return true;
}

// Fictitious play converges slowly in the value. Guess the equilibrium
// support from the averaged play and solve it exactly; keep the guess only
// if it is a better equilibrium than the averages.
bool TryExact(const Matrix& a, const std::vector<int>& rs,
              const std::vector<int>& cs, NashResult* res) {
  if (rs.size() != cs.size() || rs.empty()) return false;
  MixedStrategy row, col;
  if (!Indifference(a, rs, cs, true, &row, a.size()) ||
      !Indifference(a, cs, rs, false, &col, a[0].size())) {
    return false;
  }
  double e = Exploitability(a, row, col);
  if (e >= res->exploitability || e > 1e-9) return false;
  res->row = std::move(row);
  res->col = std::move(col);
  res->exploitability = e;
  res->refined = true;
  return true;
}

// All size-k subsets of `from`, appended to `out`, at most `limit` of them.
void Subsets(const std::vector<int>& from, size_t k, size_t limit,
             std::vector<std::vector<int>>* out) {
  std::vector<int> cur;
  std::function<void(size_t)> rec = [&](size_t start) {
    if (out->size() >= limit) return;
    if (cur.size() == k) {
      out->push_back(cur);
      return;
    }
    for (size_t i = start; i < from.size(); ++i) {
      cur.push_back(from[i]);
      rec(i + 1);
      cur.pop_back();
    }
  };
  rec(0);
}

void Refine(const Matrix& a, NashResult* res) {
  const size_t m = a.size(), n = a[0].size();
  // Actions played with non-negligible frequency.
  for (double threshold : {0.2, 0.1, 0.05, 0.02, 0.01, 0.005, 0.001}) {
    std::vector<int> rs, cs;
    for (size_t i = 0; i < m; ++i)
      if (res->row[i] > threshold) rs.push_back(static_cast<int>(i));
    for (size_t j = 0; j < n; ++j)
      if (res->col[j] > threshold) cs.push_back(static_cast<int>(j));
    if (TryExact(a, rs, cs, res)) return;
  }
  // Degenerate games: try every square support pair when that is cheap.
  // The pair count is C(m + n, m) - 1.
  constexpr double kBudget = 4096;
  double pairs = 1.0;
  for (size_t i = 1; i <= m; ++i) pairs = pairs * static_cast<double>(n + i) / i;
  if (pairs - 1.0 > kBudget) return;
  std::vector<int> all_rows(m), all_cols(n);
  std::iota(all_rows.begin(), all_rows.end(), 0);
  std::iota(all_cols.begin(), all_cols.end(), 0);
  for (size_t k = 1; k <= std::min(m, n); ++k) {
    std::vector<std::vector<int>> rsub, csub;
    Subsets(all_rows, k, static_cast<size_t>(kBudget), &rsub);
    Subsets(all_cols, k, static_cast<size_t>(kBudget), &csub);
    for (const auto& r : rsub)
      for (const auto& c : csub)
        if (TryExact(a, r, c, res)) return;
  }
}

}  // namespace

void ValidateMixedStrategy(const MixedStrategy& p, size_t size) {
  if (p.size() != size) {
    throw std::invalid_argument("mixed strategy has " + std::to_string(p.size()) +
                                " entries, expected " + std::to_string(size));
  }
  double sum = 0;
  for (double x : p) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      throw std::invalid_argument("mixed strategy entry is negative or not finite");
    }
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("mixed strategy does not sum to 1");
}

PayoffTable::PayoffTable(const PayoffTable& other) {
  std::shared_lock lock(other.mu_);
  ids_ = other.ids_;
  entries_ = other.entries_;
}

PayoffTable& PayoffTable::operator=(const PayoffTable& other) {
  if (this == &other) return *this;
  std::shared_lock lock_other(other.mu_, std::defer_lock);
  std::unique_lock lock_this(mu_, std::defer_lock);
  std::lock(lock_other, lock_this);
  ids_ = other.ids_;
  entries_ = other.entries_;
  return *this;
}

int PayoffTable::Add(const std::string& id) {
  std::unique_lock lock(mu_);
  if (std::find(ids_.begin(), ids_.end(), id) != ids_.end()) {
    throw std::invalid_argument("duplicate policy id '" + id + "'");
  }
  ids_.push_back(id);
  for (auto& row : entries_) row.emplace_back();
  entries_.emplace_back(ids_.size());
  return static_cast<int>(ids_.size()) - 1;
}

int PayoffTable::size() const {
  std::shared_lock lock(mu_);
  return static_cast<int>(ids_.size());
}

std::vector<std::string> PayoffTable::ids() const {
  std::shared_lock lock(mu_);
  return ids_;
}

int PayoffTable::IndexOf(const std::string& id) const {
  std::shared_lock lock(mu_);
  auto it = std::find(ids_.begin(), ids_.end(), id);
  return it == ids_.end() ? -1 : static_cast<int>(it - ids_.begin());
}

PayoffEntry PayoffTable::entry(int i, int j) const {
  std::shared_lock lock(mu_);
  return entries_.at(i).at(j);
}

void PayoffTable::RecordLocked(int i, int j, double gd) {
  if (i < 0 || j < 0 || i >= static_cast<int>(ids_.size()) ||
      j >= static_cast<int>(ids_.size())) {
    throw std::out_of_range("payoff table index out of range");
  }
  auto add = [](PayoffEntry& e, double g) {
    ++e.games;
    e.gd_sum += g;
    if (g > 0) ++e.wins;
    else if (g < 0) ++e.losses;
    else ++e.draws;
  };
  add(entries_[i][j], gd);
  if (i != j) add(entries_[j][i], -gd);
}

void PayoffTable::Record(int i, int j, double goal_difference) {
  std::unique_lock lock(mu_);
  RecordLocked(i, j, goal_difference);
}

void PayoffTable::SetExact(int i, int j, double value) {
  std::unique_lock lock(mu_);
  if (i < 0 || j < 0 || i >= static_cast<int>(ids_.size()) ||
      j >= static_cast<int>(ids_.size())) {
    throw std::out_of_range("payoff table index out of range");
  }
  entries_[i][j] = PayoffEntry{};
  entries_[j][i] = PayoffEntry{};
  RecordLocked(i, j, value);
}

Matrix PayoffTable::Payoffs(PayoffMetric metric) const {
  std::shared_lock lock(mu_);
  const size_t n = ids_.size();
  Matrix m(n, std::vector<double>(n, 0.0));
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const PayoffEntry& e = entries_[i][j];
      m[i][j] = metric == PayoffMetric::kWinRate ? e.win_rate_payoff() : e.mean_gd();
    }
  }
  return m;
}

std::string PayoffTable::ToCsv(PayoffMetric metric) const {
  Matrix m = Payoffs(metric);
  std::vector<std::string> names = ids();
  std::ostringstream os;
  os << "policy";
  for (const auto& id : names) os << ',' << id;
  os << '\n';
  for (size_t i = 0; i < names.size(); ++i) {
    os << names[i];
    for (double v : m[i]) os << ',' << FormatDouble(v);
    os << '\n';
  }
  return os.str();
}

double Exploitability(const Matrix& a, const MixedStrategy& row,
                      const MixedStrategy& col) {
  CheckMatrix(a);
  const size_t m = a.size(), n = a[0].size();
  ValidateMixedStrategy(row, m);
  ValidateMixedStrategy(col, n);
  std::vector<double> row_payoff(m, 0.0), col_payoff(n, 0.0);
  for (size_t r = 0; r < m; ++r) {
    for (size_t c = 0; c < n; ++c) {
      row_payoff[r] += a[r][c] * col[c];
      col_payoff[c] += row[r] * a[r][c];
    }
  }
  // The value terms cancel.
  return *std::max_element(row_payoff.begin(), row_payoff.end()) -
         *std::min_element(col_payoff.begin(), col_payoff.end());
}

NashResult SolveNash(const Matrix& a, double tol, long long max_iterations) {
  CheckMatrix(a);
  if (!(tol >= 0.0)) throw std::invalid_argument("tolerance must be >= 0");
  const int m = static_cast<int>(a.size()), n = static_cast<int>(a[0].size());
  // Cumulative payoffs against the opponent's play counts.
  std::vector<double> row_acc(m, 0.0), col_acc(n, 0.0);
  std::vector<long long> row_count(m, 0), col_count(n, 0);
  NashResult res;
  // Alternating updates: the row player responds to the column history,
  // then the column player responds to the updated row history.
  for (long long t = 1; t <= max_iterations; ++t) {
    int r = ArgMax(row_acc);
    ++row_count[r];
    for (int j = 0; j < n; ++j) col_acc[j] += a[r][j];
    int c = ArgMin(col_acc);
    ++col_count[c];
    for (int i = 0; i < m; ++i) row_acc[i] += a[i][c];
    res.iterations = t;
    double gap = (*std::max_element(row_acc.begin(), row_acc.end()) -
                  *std::min_element(col_acc.begin(), col_acc.end())) /
                 static_cast<double>(t);
    if (gap <= tol) {
      res.converged = true;
      break;
    }
  }
  const double total = static_cast<double>(res.iterations);
  res.row.resize(m);
  res.col.resize(n);
  for (int i = 0; i < m; ++i) res.row[i] = row_count[i] / total;
  for (int j = 0; j < n; ++j) res.col[j] = col_count[j] / total;
  res.exploitability = Exploitability(a, res.row, res.col);
  Refine(a, &res);
  res.value = 0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) res.value += res.row[i] * a[i][j] * res.col[j];
  return res;
}

double EloExpected(double ra, double rb) {
  return 1.0 / (1.0 + std::pow(10.0, (rb - ra) / 400.0));
}

EloPair EloUpdate(double ra, double rb, double outcome_a, double k) {
  if (!(outcome_a == 0.0 || outcome_a == 0.5 || outcome_a == 1.0)) {
    throw std::invalid_argument("Elo outcome must be 0, 0.5 or 1");
  }
  double delta = k * (outcome_a - EloExpected(ra, rb));
  return {ra + delta, rb - delta};
}

double EloTable::rating(const std::string& id) const {
  auto it = ratings_.find(id);
  return it == ratings_.end() ? kEloInitial : it->second;
}

void EloTable::Ensure(const std::string& id) { ratings_.emplace(id, kEloInitial); }

void EloTable::Update(const std::string& a, const std::string& b, double outcome_a) {
  if (a == b) throw std::invalid_argument("Elo update of a policy against itself");
  EloPair p = EloUpdate(rating(a), rating(b), outcome_a, k_);
  ratings_[a] = p.a;
  ratings_[b] = p.b;
}

EloTable EloFromLog(std::vector<MatchResult> log, uint64_t tie_seed, double k) {
  std::mt19937_64 rng(tie_seed);
  std::vector<uint64_t> tie(log.size());
  for (auto& t : tie) t = rng();
  std::vector<size_t> order(log.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t x, size_t y) {
    if (log[x].timestamp != log[y].timestamp) return log[x].timestamp < log[y].timestamp;
    return tie[x] < tie[y];
  });
  EloTable table(k);
  for (size_t i : order) {
    table.Ensure(log[i].a);
    table.Ensure(log[i].b);
    table.Update(log[i].a, log[i].b, log[i].outcome_a);
  }
  return table;
}

std::string EloCsv(const EloTable& table) {
  std::ostringstream os;
  os << "policy,elo\n";
  for (const auto& [id, r] : table.ratings()) os << id << ',' << FormatDouble(r) << '\n';
  return os.str();
}

MixedStrategy PfspDistribution(const std::vector<double>& win_rates,
                               PfspWeighting weighting) {
  if (win_rates.empty()) throw std::invalid_argument("PFSP needs at least one opponent");
  std::vector<double> w(win_rates.size());
  for (size_t i = 0; i < w.size(); ++i) {
    double x = win_rates[i];
    if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument("win rate outside [0,1]");
    w[i] = weighting == PfspWeighting::kHard ? (1.0 - x) * (1.0 - x) : (x < 1.0 ? 1.0 : 0.0);
  }
  double sum = std::accumulate(w.begin(), w.end(), 0.0);
  if (sum <= 0.0) return MixedStrategy(w.size(), 1.0 / w.size());
  for (double& x : w) x /= sum;
  return w;
}

}  // namespace pitchlab
