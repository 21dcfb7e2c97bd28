#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

#include "proxidist/common.hpp"
#include "proxidist/rng.hpp"

namespace proxidist {

// Seeded shuffle followed by round-robin assignment; fold sizes differ by at
// most one.
struct FoldPlan {
  int n_folds = 0;
  std::uint64_t seed = 0;
  std::vector<int> fold_of_row;

  std::vector<std::vector<int>> members() const {
    std::vector<std::vector<int>> out(static_cast<std::size_t>(n_folds));
    for (std::size_t i = 0; i < fold_of_row.size(); ++i)
      out[static_cast<std::size_t>(fold_of_row[i])].push_back(static_cast<int>(i));
    return out;
  }

  std::vector<int> complement(int fold) const {
    std::vector<int> out;
    out.reserve(fold_of_row.size());
    for (std::size_t i = 0; i < fold_of_row.size(); ++i)
      if (fold_of_row[i] != fold) out.push_back(static_cast<int>(i));
    return out;
  }
};

inline FoldPlan make_folds(int n, int n_folds, std::uint64_t seed) {
  if (n_folds < 2 || n_folds > n) fail_config("folds", "need 2 <= K <= n");
  FoldPlan plan;
  plan.n_folds = n_folds;
  plan.seed = seed;
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng = Rng::stream(seed, 0xf01d5ull);
  for (int i = n - 1; i > 0; --i) {
    const auto j = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(i + 1));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  plan.fold_of_row.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    plan.fold_of_row[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = i % n_folds;
  return plan;
}

}  // namespace proxidist
