#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "cpmartingale/math.hpp"
#include "cpmartingale/prefix_moments.hpp"
#include "cpmartingale/rng.hpp"
#include "cpmartingale/score_buffer.hpp"
#include "cpmartingale/series.hpp"
#include "support/brute_force.hpp"

namespace {

TEST(ScoreBuffer, RankExamples) {
  cpm::ScoreBuffer buf;
  buf.insert(1.0);
  buf.insert(3.0);
  buf.insert(2.0);
  EXPECT_EQ(buf.size(), 3u);
  auto rc = buf.rank_counts(2.0);
  EXPECT_EQ(rc.greater, 1u);
  EXPECT_EQ(rc.equal, 1u);

  rc = buf.rank_counts(3.0);
  EXPECT_EQ(rc.greater, 0u);
  EXPECT_EQ(rc.equal, 1u);
}

TEST(ScoreBuffer, Duplicates) {
  cpm::ScoreBuffer buf;
  buf.insert(1.0);
  buf.insert(1.0);
  auto rc = buf.rank_counts(1.0);
  EXPECT_EQ(rc.equal, 2u);
  EXPECT_EQ(rc.greater, 0u);

  cpm::ScoreBuffer all_ties;
  all_ties.insert(2.0);
  all_ties.insert(2.0);
  all_ties.insert(2.0);
  rc = all_ties.rank_counts(2.0);
  EXPECT_EQ(rc.greater, 0u);
  EXPECT_EQ(rc.equal, 3u);
}

TEST(ScoreBuffer, Singleton) {
  cpm::ScoreBuffer buf;
  buf.insert(5.0);
  EXPECT_EQ(buf.size(), 1u);
  EXPECT_EQ(buf.rank_counts(5.0).greater, 0u);
}

TEST(ScoreBuffer, RejectsNonFinite) {
  cpm::ScoreBuffer buf;
  EXPECT_THROW(buf.insert(std::nan("")), std::invalid_argument);
  EXPECT_THROW(buf.insert(INFINITY), std::invalid_argument);
}

TEST(ScoreBuffer, MatchesLinearScan) {
  std::mt19937_64 gen(42);
  // small value alphabet to force plenty of ties
  std::uniform_int_distribution<int> coarse(0, 30);
  std::uniform_real_distribution<double> fine(-5.0, 5.0);

  cpm::ScoreBuffer buf;
  std::vector<double> plain;
  for (int i = 0; i < 10000; ++i) {
    const double v = (i % 3 == 0) ? coarse(gen) * 0.25 : fine(gen);
    buf.insert(v);
    plain.push_back(v);
    if (i % 37 == 0 || i < 50) {
      const double probe = (i % 2 == 0) ? v : fine(gen);
      const auto rc = buf.rank_counts(probe);
      const auto [g, e] = testsupport::brute_force_rank(plain, probe);
      ASSERT_EQ(rc.greater, g);
      ASSERT_EQ(rc.equal, e);
      ASSERT_EQ(buf.size(), plain.size());
    }
  }
}

TEST(PrefixMoments, SegmentExamples) {
  cpm::PrefixMoments pm;
  pm.push(1.0);
  pm.push(2.0);
  pm.push(3.0);
  EXPECT_DOUBLE_EQ(pm.segment_mean(1, 3), 2.0);
  EXPECT_DOUBLE_EQ(pm.segment_mean(2, 2), 2.0);
  EXPECT_DOUBLE_EQ(pm.segment_mean(2, 1), 0.0);  // empty range convention
  EXPECT_DOUBLE_EQ(pm.segment_mean_sq(1, 2), 2.5);
  EXPECT_THROW(pm.segment_mean(1, 4), std::out_of_range);
  EXPECT_THROW(pm.segment_mean(0, 2), std::out_of_range);
}

TEST(PrefixMoments, MatchesDirectSummation) {
  std::mt19937_64 gen(7);
  std::normal_distribution<double> dist(0.3, 1.0);
  std::vector<double> z;
  cpm::PrefixMoments pm;
  for (int i = 0; i < 5000; ++i) {
    z.push_back(dist(gen));
    pm.push(z.back());
  }
  std::uniform_int_distribution<std::size_t> pick(1, z.size());
  for (int trial = 0; trial < 2000; ++trial) {
    std::size_t a = pick(gen), b = pick(gen);
    if (a > b) std::swap(a, b);
    double direct = 0.0, direct_sq = 0.0;
    for (std::size_t i = a; i <= b; ++i) {
      direct += z[i - 1];
      direct_sq += z[i - 1] * z[i - 1];
    }
    const double len = static_cast<double>(b - a + 1);
    EXPECT_NEAR(pm.segment_mean(a, b), direct / len, 1e-10 * std::max(1.0, std::abs(direct / len)));
    EXPECT_NEAR(pm.segment_mean_sq(a, b), direct_sq / len,
                1e-10 * std::max(1.0, direct_sq / len));
  }
}

TEST(PrefixMoments, CauchySchwarz) {
  std::mt19937_64 gen(11);
  std::normal_distribution<double> dist(0.0, 2.0);
  cpm::PrefixMoments pm;
  for (int i = 1; i <= 300; ++i) {
    pm.push(dist(gen));
    const double s1 = pm.segment_sum(1, i);
    const double s2 = pm.segment_sum_sq(1, i);
    EXPECT_GE(s2, s1 * s1 / static_cast<double>(i) - 1e-12);
  }
}

TEST(RngHandle, Reproducible) {
  cpm::RngHandle a(123), b(123);
  for (int i = 0; i < 100; ++i) {
    ASSERT_EQ(a.next_u64(), b.next_u64());
  }
  ASSERT_DOUBLE_EQ(a.normal(0, 1), b.normal(0, 1));
  ASSERT_DOUBLE_EQ(a.uniform01(), b.uniform01());
}

TEST(RngHandle, SubstreamsIndependentOfConsumption) {
  cpm::RngHandle a(99), b(99);
  (void)a.next_u64();  // consuming the parent must not move the substreams
  cpm::RngHandle sub_a = a.substream(5);
  cpm::RngHandle sub_b = b.substream(5);
  EXPECT_EQ(sub_a.next_u64(), sub_b.next_u64());
  EXPECT_NE(a.substream(1).next_u64(), a.substream(2).next_u64());
}

TEST(RngHandle, UniformOpenIsPositive) {
  cpm::RngHandle rng(5);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform_open01();
    ASSERT_GT(u, 0.0);
    ASSERT_LE(u, 1.0);
  }
}

TEST(LogSumExp, Basics) {
  EXPECT_NEAR(cpm::log_add_exp(std::log(1.0), std::log(1.0)), std::log(2.0), 1e-12);
  EXPECT_DOUBLE_EQ(cpm::log_add_exp(cpm::kNegInf, 2.5), 2.5);
  std::vector<double> vals{-1000.0, -1000.0, -1000.0};
  EXPECT_NEAR(cpm::log_sum_exp(vals), -1000.0 + std::log(3.0), 1e-12);

  cpm::OnlineLogSumExp acc;
  for (double v : {0.5, -2.0, 3.0, 3.0}) acc.add(v);
  std::vector<double> same{0.5, -2.0, 3.0, 3.0};
  EXPECT_NEAR(acc.value(), cpm::log_sum_exp(same), 1e-12);
}

TEST(Series, ShapeAndValidation) {
  cpm::Series s(2);
  const double row[2] = {1.0, -2.0};
  s.push(row);
  EXPECT_EQ(s.size(), 1u);
  EXPECT_EQ(s.at(0)[1], -2.0);
  EXPECT_THROW(s.push(3.0), std::invalid_argument);
  const double bad[2] = {1.0, NAN};
  EXPECT_THROW(s.push(bad), std::invalid_argument);

  auto sc = cpm::Series::scalars({1.0, 2.0});
  EXPECT_EQ(sc.dim(), 1u);
  EXPECT_EQ(sc.scalar_at(1), 2.0);
}

}  // namespace
