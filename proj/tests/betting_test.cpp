#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "cpmartingale/betting.hpp"
#include "support/quadrature.hpp"

namespace {

// Exact CDF of the mixture betting density: G(p) = (p - 1) / log p.
double mixture_cdf(double p) { return (p - 1.0) / std::log(p); }

TEST(ConstantBet, Examples) {
  EXPECT_DOUBLE_EQ(cpm::constant_bet(0.3), 1.5);
  EXPECT_DOUBLE_EQ(cpm::constant_bet(0.5), 0.5);  // boundary belongs to the upper piece
  EXPECT_DOUBLE_EQ(cpm::constant_bet(0.0), 1.5);
  EXPECT_DOUBLE_EQ(cpm::constant_bet(1.0), 0.5);
  EXPECT_THROW(cpm::constant_bet(-0.1), std::invalid_argument);
  EXPECT_THROW(cpm::constant_bet(1.1), std::invalid_argument);
  const double integral =
      testsupport::adaptive_simpson([](double p) { return cpm::constant_bet(p); }, 0.0, 0.5) +
      testsupport::adaptive_simpson([](double p) { return cpm::constant_bet(p); }, 0.5, 1.0);
  EXPECT_NEAR(integral, 1.0, 1e-9);
}

TEST(MixtureBet, ClosedFormExamples) {
  EXPECT_NEAR(cpm::mixture_bet(1.0), 0.5, 1e-12);
  EXPECT_NEAR(cpm::mixture_bet(std::exp(-1.0)), std::exp(1.0) - 2.0, 1e-12);
  EXPECT_NEAR(cpm::mixture_bet(0.01), 4.451, 5e-4);
  EXPECT_THROW(cpm::mixture_bet(-0.01), std::invalid_argument);
  EXPECT_THROW(cpm::mixture_bet(1.01), std::invalid_argument);
  // p = 0 clamps instead of throwing
  EXPECT_GT(cpm::mixture_bet(0.0), 0.0);
}

TEST(MixtureBet, MatchesDefiningIntegral) {
  // g(p) = int_0^1 eps p^(eps-1) d eps, quadrature over eps on a p grid
  for (int i = 1; i <= 1000; ++i) {
    const double p = static_cast<double>(i) / 1000.0;
    const double direct = testsupport::gauss_legendre_32(
        [p](double eps) { return eps * std::pow(p, eps - 1.0); }, 0.0, 1.0);
    ASSERT_NEAR(cpm::mixture_bet(p), direct, 1e-8) << "p = " << p;
  }
}

TEST(MixtureBet, SeriesBranchAgreesWithClosedForm) {
  // inside the series region the raw closed form still has ~1e-10
  // relative accuracy, enough to validate the switch
  for (double t : {-0.999e-3, -0.5e-3, -1e-4}) {
    const double p = std::exp(t);
    const double closed = (t - 1.0 + std::exp(-t)) / (t * t);
    EXPECT_NEAR(cpm::mixture_bet(p), closed, 1e-8);
  }
}

TEST(MixtureBet, CdfConsistentWithDensity) {
  for (double p : {0.001, 0.01, 0.1, 0.3, 0.7, 0.99}) {
    const double eps = p * 1e-6;
    const double fd = (mixture_cdf(p + eps) - mixture_cdf(p - eps)) / (2.0 * eps);
    ASSERT_NEAR(fd, cpm::mixture_bet(p), 1e-5 * std::max(1.0, cpm::mixture_bet(p)));
  }
}

TEST(MixtureBet, UnitIntegral) {
  // numeric mass on [delta, 1] plus the exact tail below delta
  const double delta = 1e-6;
  const double body = testsupport::adaptive_simpson(
      [](double p) { return cpm::mixture_bet(p); }, delta, 1.0, 1e-10, 48);
  EXPECT_NEAR(body + mixture_cdf(delta), 1.0, 1e-6);
}

double quadrature_mass(const std::function<double(double)>& g) {
  return testsupport::adaptive_simpson(g, 0.0, 1.0, 1e-10, 44);
}

TEST(WindowKde, UniformHistoryIsNearUniform) {
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  cpm::PValueHistory hist(5000);
  for (int i = 0; i < 5000; ++i) hist.push(unif(gen));
  for (double p : {0.1, 0.5, 0.9})
    EXPECT_NEAR(cpm::kde_window_density(hist, p), 1.0, 0.05) << "p = " << p;
}

TEST(WindowKde, UnitIntegralInReachableStates) {
  // empty, tiny, concentrated and bimodal histories all integrate to 1
  std::vector<cpm::PValueHistory> states;
  states.emplace_back(100);

  cpm::PValueHistory one(100);
  one.push(0.4);
  states.push_back(one);

  cpm::PValueHistory concentrated(200);
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> tight(0.0, 0.04);
  for (int i = 0; i < 100; ++i) concentrated.push(tight(gen));
  states.push_back(concentrated);

  cpm::PValueHistory bimodal(50);
  for (int i = 0; i < 25; ++i) {
    bimodal.push(0.02 + 0.001 * i);
    bimodal.push(0.98 - 0.001 * i);
  }
  states.push_back(bimodal);

  for (const auto& st : states) {
    const double mass = quadrature_mass([&](double p) { return cpm::kde_window_density(st, p); });
    EXPECT_NEAR(mass, 1.0, 1e-6);
  }
}

TEST(WindowKde, ConcentratedHistoryBetsLow) {
  cpm::PValueHistory hist(200);
  std::mt19937_64 gen(13);
  std::normal_distribution<double> near_zero(0.02, 0.005);
  for (int i = 0; i < 100; ++i) hist.push(std::clamp(near_zero(gen), 0.0, 1.0));
  EXPECT_GT(cpm::kde_window_density(hist, 0.05), cpm::kde_window_density(hist, 0.95));
  EXPECT_GT(cpm::kde_window_density(hist, 0.95), 0.0);  // floored, log stays finite
}

TEST(WindowKde, PermutationInvariant) {
  std::vector<double> ps{0.1, 0.7, 0.3, 0.9, 0.02, 0.55};
  cpm::PValueHistory a(10), b(10);
  for (double p : ps) a.push(p);
  for (auto it = ps.rbegin(); it != ps.rend(); ++it) b.push(*it);
  for (double q : {0.05, 0.3, 0.8})
    EXPECT_NEAR(cpm::kde_window_density(a, q), cpm::kde_window_density(b, q), 1e-12);
}

TEST(WindowKde, EmptyHistoryUniformAndEviction) {
  cpm::WindowKdeBetting betting(3);
  EXPECT_DOUBLE_EQ(betting.step(0.5), 1.0);  // empty history -> uniform
  betting.step(0.5);
  betting.step(0.5);
  betting.step(0.5);  // evicts the first value; window holds {0.5, 0.5, 0.5}
  EXPECT_EQ(betting.history().size(), 3u);
  EXPECT_GT(cpm::kde_window_density(betting.history(), 0.5),
            cpm::kde_window_density(betting.history(), 0.0));
}

TEST(Precomputed, UniformCalibration) {
  std::mt19937_64 gen(31);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> ps;
  for (int i = 0; i < 5000; ++i) ps.push_back(unif(gen));
  auto density = cpm::PrecomputedBetting::calibrate(ps, 1001);
  for (double p : {0.1, 0.5, 0.9}) EXPECT_NEAR(density.density(p), 1.0, 0.05);

  // trapezoid integral of the stored grid is 1 to high precision
  auto grid = density.grid();
  double acc = 0.5 * (grid.front() + grid.back());
  for (std::size_t i = 1; i + 1 < grid.size(); ++i) acc += grid[i];
  acc /= static_cast<double>(grid.size() - 1);
  EXPECT_NEAR(acc, 1.0, 1e-9);
}

TEST(Precomputed, InterpolationExamples) {
  EXPECT_DOUBLE_EQ(cpm::PrecomputedBetting(std::vector<double>(101, 1.0)).density(0.37), 1.0);

  std::vector<double> grid(1001, 999.0 / 998.5);
  grid[0] = 2.0;
  grid[1] = 0.0;
  cpm::PrecomputedBetting pb(grid);
  EXPECT_NEAR(pb.density(0.0), 2.0, 1e-12);          // node hit
  EXPECT_NEAR(pb.density(0.0005), 1.0, 1e-12);       // linear midpoint
  EXPECT_NEAR(pb.density(1.0), 999.0 / 998.5, 1e-12);
  EXPECT_THROW(pb.density(-0.1), std::invalid_argument);
}

TEST(Precomputed, RejectsUncalibratedGrid) {
  EXPECT_THROW(cpm::PrecomputedBetting(std::vector<double>(101, 2.0)), std::invalid_argument);
  EXPECT_THROW(cpm::PrecomputedBetting({1.0}), std::invalid_argument);
}

TEST(Precomputed, FileRoundTrip) {
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> ps;
  for (int i = 0; i < 500; ++i) ps.push_back(unif(gen) * unif(gen));  // skewed toward 0
  auto density = cpm::PrecomputedBetting::calibrate(ps, 101);

  std::stringstream file;
  density.save(file);
  auto loaded = cpm::PrecomputedBetting::load(file);
  ASSERT_EQ(loaded.grid_size(), density.grid_size());
  for (std::size_t i = 0; i < loaded.grid_size(); ++i)
    ASSERT_DOUBLE_EQ(loaded.grid()[i], density.grid()[i]);
}

TEST(Precomputed, LoaderRejectsBadFiles) {
  std::stringstream bad_magic("not-a-density\ngrid_size=2\n0 1\n1 1\n");
  EXPECT_THROW(cpm::PrecomputedBetting::load(bad_magic), std::runtime_error);

  std::stringstream truncated;
  truncated << cpm::kDensityFileMagic << "\ngrid_size=3\n0 1\n";
  EXPECT_THROW(cpm::PrecomputedBetting::load(truncated), std::runtime_error);

  std::stringstream bad_integral;
  bad_integral << cpm::kDensityFileMagic << "\ngrid_size=2\n0 2.5\n1 2.5\n";
  EXPECT_THROW(cpm::PrecomputedBetting::load(bad_integral), std::runtime_error);
}

TEST(BettingFactory, Validation) {
  cpm::BettingSpec spec;
  spec.kind = cpm::BettingSpec::Kind::precomputed;
  EXPECT_THROW(cpm::make_betting(spec), std::invalid_argument);
  spec.kind = cpm::BettingSpec::Kind::kde_window;
  spec.window = 0;
  EXPECT_THROW(cpm::make_betting(spec), std::invalid_argument);
}

}  // namespace
