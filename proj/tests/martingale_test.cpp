#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "cpmartingale/martingale.hpp"
#include "cpmartingale/simulate.hpp"
#include "support/stats.hpp"

namespace {

cpm::Series iid_stream(std::size_t n, double mu, cpm::RngHandle& rng) {
  cpm::Series s(1);
  for (std::size_t i = 0; i < n; ++i) s.push(rng.normal(mu, 1.0));
  return s;
}

TEST(ConformalPValue, Examples) {
  cpm::ScoreBuffer buf;
  buf.insert(7.0);
  EXPECT_DOUBLE_EQ(cpm::conformal_pvalue(buf, 7.0, 0.25), 0.25);  // n = 1 -> p = u

  cpm::ScoreBuffer buf2;
  for (double a : {3.0, 1.0, 2.0}) buf2.insert(a);
  EXPECT_DOUBLE_EQ(cpm::conformal_pvalue(buf2, 2.0, 0.5), 0.5);  // (1 + 0.5) / 3

  cpm::ScoreBuffer buf3;
  for (double a : {1.0, 2.0, 3.0}) buf3.insert(a);
  EXPECT_NEAR(cpm::conformal_pvalue(buf3, 3.0, 1.0), 1.0 / 3.0, 1e-15);

  cpm::ScoreBuffer empty;
  EXPECT_THROW(cpm::conformal_pvalue(empty, 1.0, 0.5), std::invalid_argument);
}

TEST(IcmStep, Examples) {
  cpm::IcmState st;
  st.cut = 0.5;
  cpm::icm_step(st, 2.0);
  EXPECT_NEAR(st.cut, 0.5 + std::log(2.0), 1e-12);

  cpm::IcmState st2;
  st2.cut = 0.1;
  st2.log_s = 0.1;  // keep the identity consistent for the assert
  cpm::icm_step(st2, std::exp(-0.5));
  EXPECT_DOUBLE_EQ(st2.cut, 0.0);

  cpm::IcmState st3;
  cpm::icm_step(st3, 1.5);
  EXPECT_NEAR(std::exp(st3.log_s), 1.5, 1e-12);

  cpm::IcmState st4;
  EXPECT_THROW(cpm::icm_step(st4, 0.0), std::invalid_argument);
  EXPECT_THROW(cpm::icm_step(st4, -1.0), std::invalid_argument);
}

TEST(IcmState, CutEqualsLogSMinusRunningMin) {
  cpm::RngHandle rng(17);
  cpm::IcmState st;
  for (int i = 0; i < 5000; ++i) {
    cpm::icm_step(st, cpm::constant_bet(rng.uniform01()));
    ASSERT_NEAR(st.cut, st.log_s - st.min_log_s, 1e-9);
  }
}

TEST(ConstantBet, UnitMeanOnUniform) {
  cpm::RngHandle rng(23);
  double acc = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) acc += cpm::constant_bet(rng.uniform01());
  EXPECT_NEAR(acc / n, 1.0, 0.01);
}

TEST(RunIcm, ZeroThresholdAlarmsImmediately) {
  cpm::RngHandle rng(3);
  cpm::TrainingSet train(iid_stream(20, 0.0, rng), rng);
  cpm::Series stream = iid_stream(50, 0.0, rng);
  cpm::NcmConfig ncm;
  ncm.kind = cpm::NcmConfig::Kind::knn;
  ncm.k = 7;
  auto res = cpm::run_icm(std::move(train), stream, ncm, cpm::BettingSpec{}, 0.0, rng.substream(1));
  ASSERT_TRUE(res.tau.has_value());
  EXPECT_EQ(*res.tau, 1u);
}

TEST(RunIcm, DeterministicGivenSeed) {
  cpm::NcmConfig ncm;
  ncm.kind = cpm::NcmConfig::Kind::lr_gaussian;
  for (int trial = 0; trial < 2; ++trial) {
    cpm::RngHandle rng(11);
    cpm::TrainingSet train(iid_stream(50, 0.0, rng), rng);
    cpm::Series stream = iid_stream(300, 0.0, rng);
    auto res = cpm::run_icm(std::move(train), stream, ncm, cpm::BettingSpec{}, 1e9,
                            rng.substream(0), true);
    static std::vector<double> first_cut;
    std::vector<double> cut;
    for (const auto& row : res.trace) cut.push_back(row.cut);
    if (trial == 0) first_cut = cut;
    else EXPECT_EQ(cut, first_cut);
  }
}

TEST(RunIcm, ConstantStreamBehavesAsUniformPValues) {
  // all scores tie, so p_n = u_n: KS should not reject uniformity
  cpm::RngHandle rng(29);
  cpm::TrainingSet train(iid_stream(20, 0.0, rng), rng);
  cpm::Series zeros(1);
  for (int i = 0; i < 2000; ++i) zeros.push(0.0);
  cpm::NcmConfig ncm;
  ncm.kind = cpm::NcmConfig::Kind::mean_distance;
  auto res = cpm::run_icm(std::move(train), zeros, ncm, cpm::BettingSpec{}, 1e9,
                          rng.substream(0), true);
  EXPECT_FALSE(res.tau.has_value());
  std::vector<double> ps;
  for (const auto& row : res.trace) ps.push_back(row.p);
  EXPECT_LT(testsupport::ks_uniform_statistic(ps), testsupport::ks_critical_01(ps.size()));
}

TEST(RunIcm, PValuesUniformOnIidStreams) {
  // Theorem-level smoke check; the 50-seed suite lives in the acceptance run.
  for (auto kind : {cpm::NcmConfig::Kind::knn, cpm::NcmConfig::Kind::lr_gaussian}) {
    cpm::RngHandle rng(101 + static_cast<int>(kind));
    cpm::TrainingSet train(iid_stream(200, 0.0, rng), rng);
    cpm::Series stream = iid_stream(5000, 0.0, rng);
    cpm::NcmConfig ncm;
    ncm.kind = kind;
    auto res = cpm::run_icm(std::move(train), stream, ncm, cpm::BettingSpec{}, 1e9,
                            rng.substream(0), true);
    std::vector<double> ps;
    for (const auto& row : res.trace) ps.push_back(row.p);
    EXPECT_LT(testsupport::ks_uniform_statistic(ps), testsupport::ks_critical_01(ps.size()));
    EXPECT_LT(std::abs(testsupport::lag1_autocorrelation(ps)),
              4.0 / std::sqrt(static_cast<double>(ps.size())));
  }
}

TEST(RunIcm, StoppingTimeMonotoneInThreshold) {
  cpm::NcmConfig ncm;
  ncm.kind = cpm::NcmConfig::Kind::lr_gaussian;
  cpm::RngHandle rng(41);
  cpm::TrainingSet train(iid_stream(100, 0.0, rng), rng);
  cpm::Series stream(1);
  for (int i = 0; i < 200; ++i) stream.push(rng.normal(i >= 100 ? 1.0 : 0.0, 1.0));

  std::optional<std::size_t> prev;
  for (double h : {0.2, 0.5, 1.0, 2.0, 3.0}) {
    cpm::RngHandle run_rng(999);  // identical tie-breaking across thresholds
    cpm::RngHandle train_rng(7);
    cpm::TrainingSet tr(iid_stream(100, 0.0, train_rng), train_rng);
    auto res = cpm::run_icm(std::move(tr), stream, ncm, cpm::BettingSpec{}, h, run_rng);
    if (prev && res.tau) EXPECT_LE(*prev, *res.tau);
    if (prev && !res.tau) SUCCEED();  // censored at higher threshold is consistent
    prev = res.tau ? *res.tau : std::numeric_limits<std::size_t>::max();
  }
}

TEST(RunIcm, CutGrowsAfterChange) {
  // qualitative shape: sustained growth after the change point
  cpm::NcmConfig ncm;
  ncm.kind = cpm::NcmConfig::Kind::lr_gaussian;
  std::vector<double> cut_at_theta, cut_after;
  for (int seed = 0; seed < 100; ++seed) {
    cpm::ExperimentConfig cfg;
    cfg.m = 200;
    cfg.theta = 500;
    cfg.mu1 = 1.0;
    cfg.horizon = 650;
    cfg.seed = 1234;
    auto data = cpm::generate_realization(cfg, seed);
    cpm::TrainingSet train(std::move(data.training), data.rng);
    auto res = cpm::run_icm(std::move(train), data.stream, ncm, cpm::BettingSpec{}, 1e9,
                            data.rng, true);
    cut_at_theta.push_back(res.trace[499].cut);
    cut_after.push_back(res.trace[599].cut);
  }
  std::nth_element(cut_at_theta.begin(), cut_at_theta.begin() + 50, cut_at_theta.end());
  std::nth_element(cut_after.begin(), cut_after.begin() + 50, cut_after.end());
  EXPECT_GT(cut_after[50], cut_at_theta[50]);
}

TEST(FullCm, FirstPValueIsU) {
  cpm::FullCmDetector det(std::make_unique<cpm::ConstantBetting>(), cpm::RngHandle(55));
  const double z[1] = {3.7};
  det.step(z);
  cpm::RngHandle expected(55);
  EXPECT_DOUBLE_EQ(det.last_pvalue(), expected.uniform_open01());
}

TEST(FullCm, ConstantStreamTies) {
  cpm::Series zeros(1);
  for (int i = 0; i < 1500; ++i) zeros.push(0.0);
  auto res = cpm::run_full_cm(zeros, cpm::BettingSpec{}, 1e9, cpm::RngHandle(13), true);
  EXPECT_FALSE(res.tau.has_value());
  std::vector<double> ps;
  for (const auto& row : res.trace) ps.push_back(row.p);
  EXPECT_LT(testsupport::ks_uniform_statistic(ps), testsupport::ks_critical_01(ps.size()));
}

TEST(FullCm, LeaveOneOutScores) {
  cpm::FullCmDetector det(std::make_unique<cpm::ConstantBetting>(), cpm::RngHandle(1));
  const double z1[1] = {1.0}, z2[1] = {3.0}, z3[1] = {-1.0};
  det.step(z1);
  det.step(z2);  // alpha_2 = |3 - 1| = 2
  EXPECT_DOUBLE_EQ(det.last_alpha(), 2.0);
  det.step(z3);  // alpha_3 = |-1 - (1+3)/2| = 3
  EXPECT_DOUBLE_EQ(det.last_alpha(), 3.0);
}

TEST(CalibrationRecipe, DensityDecreasesTowardOne) {
  // p-values from a stream with a change concentrate near zero, so the
  // calibrated density has more mass on [0, 0.2] than on [0.8, 1].
  cpm::ExperimentConfig cfg;
  cfg.m = 200;
  cfg.theta = 500;
  cfg.mu1 = 1.0;
  cfg.horizon = 1000;
  cfg.seed = 4242;
  auto data = cpm::generate_realization(cfg, 0);
  cpm::TrainingSet train(std::move(data.training), data.rng);
  cpm::NcmConfig ncm;
  ncm.kind = cpm::NcmConfig::Kind::lr_gaussian;
  auto res = cpm::run_icm(std::move(train), data.stream, ncm, cpm::BettingSpec{}, 1e9,
                          data.rng, true);
  std::vector<double> ps;
  for (const auto& row : res.trace) ps.push_back(row.p);
  auto density = cpm::PrecomputedBetting::calibrate(ps, 1001);
  double low = 0.0, high = 0.0;
  for (int i = 0; i <= 200; ++i) {
    low += density.grid()[i];
    high += density.grid()[800 + i];
  }
  EXPECT_GT(low, high);
}

}  // namespace
