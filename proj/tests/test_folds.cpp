#include <gtest/gtest.h>

#include "proxidist/folds.hpp"

using namespace proxidist;

TEST(Folds, BalancedSplit) {
  const FoldPlan plan = make_folds(6, 3, 42);
  const auto members = plan.members();
  ASSERT_EQ(members.size(), 3u);
  for (const auto& fold : members) EXPECT_EQ(fold.size(), 2u);
}

TEST(Folds, RemainderRule) {
  const FoldPlan plan = make_folds(7, 3, 42);
  const auto members = plan.members();
  std::vector<std::size_t> sizes;
  for (const auto& fold : members) sizes.push_back(fold.size());
  std::sort(sizes.begin(), sizes.end());
  EXPECT_EQ(sizes, (std::vector<std::size_t>{2, 2, 3}));
}

TEST(Folds, EveryRowAssignedOnce) {
  const FoldPlan plan = make_folds(101, 5, 9);
  const auto members = plan.members();
  std::vector<int> seen(101, 0);
  for (int f = 0; f < 5; ++f) {
    for (int row : members[static_cast<std::size_t>(f)]) ++seen[static_cast<std::size_t>(row)];
  }
  for (int count : seen) EXPECT_EQ(count, 1);
  const auto complement = plan.complement(0);
  EXPECT_EQ(complement.size(), 101u - members[0].size());
}

TEST(Folds, DeterministicGivenSeed) {
  const FoldPlan a = make_folds(50, 4, 1234);
  const FoldPlan b = make_folds(50, 4, 1234);
  EXPECT_EQ(a.fold_of_row, b.fold_of_row);
  const FoldPlan c = make_folds(50, 4, 1235);
  EXPECT_NE(a.fold_of_row, c.fold_of_row);
}

TEST(Folds, RejectsBadCounts) {
  EXPECT_THROW(make_folds(3, 4, 1), Error);
  EXPECT_THROW(make_folds(3, 1, 1), Error);
}
