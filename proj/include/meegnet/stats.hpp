#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "meegnet/common.hpp"

// Friedman rank test over blocks x groups with midranks for ties, its
// chi-square tail probability via the regularized upper incomplete gamma
// function, and the Nemenyi post-hoc critical difference at alpha = 0.05.

namespace meegnet {

// Regularized upper incomplete gamma Q(a, x) = Gamma(a, x) / Gamma(a).
// Series expansion below a + 1, Lentz continued fraction above.
inline double gammq(double a, double x) {
  if (!(a > 0.0) || !(x >= 0.0)) throw ConfigError("gammq: requires a > 0 and x >= 0");
  if (x == 0.0) return 1.0;
  const double log_prefactor = -x + a * std::log(x) - std::lgamma(a);
  if (x < a + 1.0) {
    double ap = a;
    double del = 1.0 / a;
    double sum = del;
    for (int n = 0; n < 1000; ++n) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * 1e-17) break;
    }
    return 1.0 - sum * std::exp(log_prefactor);
  }
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 1000; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-17) break;
  }
  return std::exp(log_prefactor) * h;
}

// Survival function of the chi-square distribution with `dof` degrees of
// freedom: P(X >= x).
inline double chi2_sf(double x, int dof) {
  if (dof < 1) throw ConfigError("chi2_sf: dof must be >= 1");
  if (!(x >= 0.0)) throw ConfigError("chi2_sf: statistic must be >= 0");
  return gammq(0.5 * dof, 0.5 * x);
}

// Midranks of one row, rank 1 for the smallest value.
inline std::vector<double> midranks(const std::vector<double>& row) {
  const std::size_t k = row.size();
  std::vector<std::size_t> idx(k);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&row](std::size_t a, std::size_t b) { return row[a] < row[b]; });
  std::vector<double> ranks(k);
  std::size_t i = 0;
  while (i < k) {
    std::size_t j = i;
    while (j < k && row[idx[j]] == row[idx[i]]) ++j;
    const double mid = 0.5 * (static_cast<double>(i) + 1.0 + static_cast<double>(j));
    for (std::size_t m = i; m < j; ++m) ranks[idx[m]] = mid;
    i = j;
  }
  return ranks;
}

struct FriedmanResult {
  double statistic = 0.0;  // chi-square with (groups - 1) dof
  double p_value = 1.0;
  int groups = 0;
  int blocks = 0;
  std::vector<double> mean_ranks;  // rank 1 = smallest measurement
};

// `data` holds one row per block, each row one measurement per group.
inline FriedmanResult friedman_test(const std::vector<std::vector<double>>& data) {
  if (data.size() < 2) throw ConfigError("friedman: needs at least two blocks, got " + std::to_string(data.size()));
  const std::size_t k = data.front().size();
  if (k < 2) throw ConfigError("friedman: needs at least two groups, got " + std::to_string(k));
  for (const auto& row : data)
    if (row.size() != k)
      throw ShapeError("friedman: block with " + std::to_string(row.size()) + " measurements, expected " +
                       std::to_string(k));
  const double n = static_cast<double>(data.size());
  std::vector<double> rank_sums(k, 0.0);
  for (const auto& row : data) {
    for (const double v : row)
      if (!std::isfinite(v)) throw NumericError("friedman: non-finite measurement");
    const std::vector<double> r = midranks(row);
    for (std::size_t j = 0; j < k; ++j) rank_sums[j] += r[j];
  }
  double sum_sq = 0.0;
  for (const double r : rank_sums) sum_sq += r * r;
  const double kk = static_cast<double>(k);
  double stat = 12.0 / (n * kk * (kk + 1.0)) * sum_sq - 3.0 * n * (kk + 1.0);
  if (stat < 0.0) stat = 0.0;  // guard against rounding on tied-heavy inputs

  FriedmanResult res;
  res.statistic = stat;
  res.groups = static_cast<int>(k);
  res.blocks = static_cast<int>(n);
  res.p_value = chi2_sf(stat, res.groups - 1);
  res.mean_ranks.resize(k);
  for (std::size_t j = 0; j < k; ++j) res.mean_ranks[j] = rank_sums[j] / n;
  return res;
}

// Studentized range quantiles q_alpha(k) / sqrt(2) for alpha = 0.05,
// k = 2..10 (Demsar's post-hoc table).
inline double nemenyi_q05(int groups) {
  static constexpr std::array<double, 9> table = {1.960, 2.343, 2.569, 2.728, 2.850,
                                                  2.949, 3.031, 3.102, 3.164};
  if (groups < 2 || groups > 10)
    throw ConfigError("nemenyi: alpha=0.05 table covers 2..10 groups, got " + std::to_string(groups));
  return table[static_cast<std::size_t>(groups - 2)];
}

// Mean-rank gap two groups must exceed to differ significantly at 0.05.
inline double nemenyi_critical_difference(int groups, int blocks) {
  if (blocks < 1) throw ConfigError("nemenyi: needs at least one block");
  const double k = static_cast<double>(groups);
  return nemenyi_q05(groups) * std::sqrt(k * (k + 1.0) / (6.0 * static_cast<double>(blocks)));
}

struct NemenyiResult {
  double critical_difference = 0.0;
  std::vector<std::vector<bool>> significant;  // [i][j], symmetric, false on diagonal
};

inline NemenyiResult nemenyi_test(const FriedmanResult& friedman) {
  NemenyiResult res;
  res.critical_difference = nemenyi_critical_difference(friedman.groups, friedman.blocks);
  const std::size_t k = friedman.mean_ranks.size();
  res.significant.assign(k, std::vector<bool>(k, false));
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j)
      res.significant[i][j] =
          i != j && std::abs(friedman.mean_ranks[i] - friedman.mean_ranks[j]) > res.critical_difference;
  return res;
}

}  // namespace meegnet
