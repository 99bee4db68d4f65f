#include <array>
#include <cmath>
#include <cstdint>
#include <set>

#include <gtest/gtest.h>

#include "kalpha/rng.hpp"

namespace {

using kalpha::Philox;

// Known-answer vectors from the Random123 distribution (philox4x32, 10 rounds).
struct Kat {
  Philox::Block counter;
  Philox::Key key;
  Philox::Block expected;
};

TEST(Philox, KnownAnswerVectors) {
  const std::array<Kat, 3> kats{{
      {{0, 0, 0, 0}, {0, 0}, {0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}},
      {{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff},
       {0xffffffff, 0xffffffff},
       {0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}},
      {{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344},
       {0xa4093822, 0x299f31d0},
       {0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}},
  }};
  for (const auto& k : kats) EXPECT_EQ(Philox::bijection(k.counter, k.key), k.expected);
}

TEST(Philox, SameSeedAndStreamReproduce) {
  Philox a(42, 7), b(42, 7);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a(), b());
}

TEST(Philox, StreamsDiffer) {
  Philox a(42, 0), b(42, 1);
  int same = 0;
  for (int i = 0; i < 100; ++i) same += a() == b();
  EXPECT_EQ(same, 0);
}

TEST(Philox, UniformBitsLookUniform) {
  Philox g(3);
  std::array<int, 16> buckets{};
  const int draws = 160000;
  for (int i = 0; i < draws; ++i) ++buckets[g() >> 60];
  for (int c : buckets) EXPECT_NEAR(c, draws / 16, 5 * std::sqrt(draws / 16.0));
}

TEST(DeriveSeed, DistinctPathsGiveDistinctSeeds) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 50; ++i)
    for (std::uint64_t j = 0; j < 50; ++j) seen.insert(kalpha::derive_seed(9, {i, j}));
  EXPECT_EQ(seen.size(), 2500u);
  EXPECT_EQ(kalpha::derive_seed(9, {1, 2}), kalpha::derive_seed(9, {1, 2}));
  EXPECT_NE(kalpha::derive_seed(9, {1, 2}), kalpha::derive_seed(9, {2, 1}));
}

}  // namespace
