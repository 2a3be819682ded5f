#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "meegnet/common.hpp"
#include "meegnet/data.hpp"
#include "meegnet/rng.hpp"

// Validation splits over a pooled WindowedDataset.
//
//   kfold  windows are shuffled and dealt into k blocks whose sizes differ by
//          at most one; each block is a test fold in turn and every other
//          window trains. Windows of the same case land on both sides.
//   loco   leave-one-case-out: one fold per case, that case's windows test
//          and every other case trains.

namespace meegnet {

enum class SplitKind { kfold, loco };

inline std::string to_string(SplitKind k) { return k == SplitKind::kfold ? "kfold" : "loco"; }

inline SplitKind split_kind_from_string(std::string_view s) {
  if (s == "kfold") return SplitKind::kfold;
  if (s == "loco") return SplitKind::loco;
  throw ConfigError("unknown split kind '" + std::string(s) + "' (expected kfold or loco)");
}

struct Fold {
  std::vector<int> train;  // window indices into the pooled dataset
  std::vector<int> test;
  std::string label;       // "fold0".. for kfold, the case id for loco
};

struct SplitPlan {
  SplitKind kind = SplitKind::kfold;
  std::uint64_t seed = 0;
  std::vector<Fold> folds;
};

// Window-level k-fold: a seeded shuffle of 0..n-1 dealt into k consecutive
// blocks. The first (n mod k) blocks take one extra window.
inline SplitPlan split_kfold(int n_windows, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("split: kfold needs k >= 2, got " + std::to_string(k));
  if (n_windows < k)
    throw ConfigError("split: " + std::to_string(n_windows) + " windows cannot fill " + std::to_string(k) +
                      " folds");
  std::vector<int> order(static_cast<std::size_t>(n_windows));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(Rng::derive(seed, "split.kfold"));
  shuffle_in_place(order, rng);

  SplitPlan plan;
  plan.kind = SplitKind::kfold;
  plan.seed = seed;
  std::size_t at = 0;
  for (int f = 0; f < k; ++f) {
    const std::size_t size = static_cast<std::size_t>(n_windows / k + (f < n_windows % k ? 1 : 0));
    Fold fold;
    fold.label = "fold" + std::to_string(f);
    fold.test.assign(order.begin() + static_cast<std::ptrdiff_t>(at),
                     order.begin() + static_cast<std::ptrdiff_t>(at + size));
    fold.train.reserve(static_cast<std::size_t>(n_windows) - size);
    fold.train.insert(fold.train.end(), order.begin(), order.begin() + static_cast<std::ptrdiff_t>(at));
    fold.train.insert(fold.train.end(), order.begin() + static_cast<std::ptrdiff_t>(at + size), order.end());
    plan.folds.push_back(std::move(fold));
    at += size;
  }
  return plan;
}

inline SplitPlan split_kfold(const WindowedDataset& ds, int k, std::uint64_t seed) {
  return split_kfold(ds.windows(), k, seed);
}

// Case-level leave-one-case-out, folds in first-appearance case order.
inline SplitPlan split_loco(const WindowedDataset& ds) {
  const std::vector<std::string> cases = ds.cases();
  if (cases.size() < 2)
    throw ConfigError("split: leave-one-case-out needs at least 2 cases, got " + std::to_string(cases.size()));
  SplitPlan plan;
  plan.kind = SplitKind::loco;
  for (const auto& id : cases) {
    Fold fold;
    fold.label = id;
    for (int t = 0; t < ds.windows(); ++t)
      (ds.case_ids[static_cast<std::size_t>(t)] == id ? fold.test : fold.train).push_back(t);
    plan.folds.push_back(std::move(fold));
  }
  return plan;
}

// Order-insensitive digest of the fold layout; paired runs (e.g. one per
// kernel size) must agree on it.
inline std::uint64_t split_fingerprint(const SplitPlan& plan) {
  std::uint64_t h = 0x9e3779b97f4a7c15ull ^ static_cast<std::uint64_t>(plan.kind);
  auto mix = [&h](std::uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  };
  mix(plan.seed);
  for (const auto& fold : plan.folds) {
    mix(fold.train.size());
    mix(fold.test.size());
    for (const int i : fold.test) mix(static_cast<std::uint64_t>(i));
  }
  return h;
}

}  // namespace meegnet
