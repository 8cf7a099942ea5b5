#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "cojump/jumpsim.hpp"
#include "cojump/jwc.hpp"
#include "cojump/rng.hpp"

using namespace cojump;
using namespace cojump::jwc;
using wavelet::Boundary;
using wavelet::FilterPair;

namespace {

std::vector<double> random_series(Rng& rng, std::size_t n, double sd = 1.0) {
  std::vector<double> x(n);
  for (auto& v : x) v = sd * rng.normal();
  return x;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

// Time-domain two-scale covariance: average over offsets of realized
// covariance on the sparse grid minus the scaled full-grid realized
// covariance. Prices are cumulated and sampled at {0, g, g+G, ..., N}.
double tscv_oracle(const std::vector<double>& x, const std::vector<double>& y, int G, double c_n) {
  const std::size_t n = x.size();
  std::vector<double> px(n + 1, 0.0), py(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    px[i + 1] = px[i] + x[i];
    py[i + 1] = py[i] + y[i];
  }
  double slow = 0.0;
  for (int g = 0; g < G; ++g) {
    std::vector<std::size_t> pts{0};
    for (std::size_t p = static_cast<std::size_t>(g); p <= n; p += static_cast<std::size_t>(G))
      if (p > 0) pts.push_back(p);
    if (pts.back() != n) pts.push_back(n);
    for (std::size_t k = 1; k < pts.size(); ++k)
      slow += (px[pts[k]] - px[pts[k - 1]]) * (py[pts[k]] - py[pts[k - 1]]);
  }
  slow /= G;
  const double nd = static_cast<double>(n);
  const double ratio = ((nd - G + 1.0) / G) / nd;
  return c_n * (slow - ratio * dot(x, y));
}

struct MeanSe {
  double mean = 0.0, se = 0.0;
};

MeanSe mean_se(const std::vector<double>& v) {
  MeanSe r;
  for (double x : v) r.mean += x;
  r.mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - r.mean) * (x - r.mean);
  r.se = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
  return r;
}

}  // namespace

TEST(Resolve, Defaults) {
  const auto rc = resolve(540, JwcConfig{});
  EXPECT_EQ(rc.slow, 2);
  EXPECT_EQ(rc.fast, 1);
  EXPECT_EQ(rc.levels, 4);
  EXPECT_DOUBLE_EQ(rc.nbar_slow, 539.0 / 2.0);
  EXPECT_DOUBLE_EQ(rc.n_fast, 540.0);
  EXPECT_DOUBLE_EQ(rc.c_n, 1.0 / (1.0 - 539.0 / 1080.0));
  EXPECT_EQ(default_levels(100), 4);
  EXPECT_EQ(default_levels(64), 4);
  EXPECT_EQ(default_levels(32), 3);
  EXPECT_EQ(default_levels(4), 1);
  JwcConfig n23;
  n23.slow_rule = SlowSpacingRule::n_two_thirds;
  EXPECT_EQ(resolve(540, n23).slow, 66);
  JwcConfig fixed;
  fixed.c_n = 1.0;
  EXPECT_EQ(resolve(540, fixed).c_n, 1.0);
}

TEST(Resolve, RejectsBadSpacings) {
  JwcConfig c;
  c.slow_spacing = 1;
  EXPECT_THROW(resolve(100, c), Error);
  c.slow_spacing = 101;
  EXPECT_THROW(resolve(100, c), Error);
  c.slow_spacing = 3;
  c.fast_spacing = 3;
  EXPECT_THROW(resolve(100, c), Error);
  c.fast_spacing = 1;
  c.levels = 40;
  EXPECT_THROW(resolve(100, c), Error);
}

TEST(SparseReturns, EdgeInclusiveGrid) {
  const std::vector<double> r{1, 2, 3, 4, 5};
  EXPECT_EQ(sparse_returns(r, 2, 0), (std::vector<double>{3, 7, 5}));
  EXPECT_EQ(sparse_returns(r, 2, 1), (std::vector<double>{1, 5, 9}));
  EXPECT_EQ(sparse_returns(r, 3, 2), (std::vector<double>{3, 12}));
  EXPECT_EQ(sparse_returns(r, 1, 0), r);
  EXPECT_THROW(sparse_returns(r, 2, 2), std::invalid_argument);
}

TEST(ScaleCovariance, Trivial) {
  const std::vector<double> a{1.0, -2.0, 0.5}, b{0.0, 0.0, 0.0}, c{0.0, 3.0, 0.0}, e{4.0, 0.0, 1.0};
  EXPECT_GE(wavelet_rc_scale(a, a), 0.0);
  EXPECT_EQ(wavelet_rc_scale(a, b), 0.0);
  EXPECT_EQ(wavelet_rc_scale(c, e), 0.0);
  EXPECT_THROW(wavelet_rc_scale(a, std::vector<double>{1.0}), std::invalid_argument);
}

TEST(ScaleCovariance, HaarLengthFourByHand) {
  // Haar circular level 1: W_t = (x_t - x_{t-1})/2, V_t = (x_t + x_{t-1})/2.
  const std::vector<double> x{1, 2, 3, 4}, y{2, -1, 0, 1};
  // W(x) = {-1.5, .5, .5, .5};  W(y) = {.5, -1.5, .5, .5}
  // V(x) = {2.5, 1.5, 2.5, 3.5}; V(y) = {1.5, .5, -.5, .5}
  const auto dx = wavelet::modwt_forward(x, FilterPair::haar(), 1, Boundary::circular);
  const auto dy = wavelet::modwt_forward(y, FilterPair::haar(), 1, Boundary::circular);
  EXPECT_DOUBLE_EQ(wavelet_rc_scale(dx, dy, 1), -0.75 - 0.75 + 0.25 + 0.25);
  EXPECT_DOUBLE_EQ(wavelet_rc_scale(dx, dy, 2), 3.75 + 0.75 - 1.25 + 1.75);
  EXPECT_DOUBLE_EQ(wavelet_rc_scale(dx, dy, 1) + wavelet_rc_scale(dx, dy, 2), dot(x, y));
}

TEST(ScaleCovariance, ScalesAddUpToRealizedCovariance) {
  Rng rng(21);
  for (std::size_t n : {40u, 200u, 540u}) {
    const auto x = random_series(rng, n), y = random_series(rng, n);
    for (const auto& f : {FilterPair::haar(), FilterPair::d4()}) {
      const int J = std::min(4, wavelet::max_levels(n, f, Boundary::reflecting));
      const auto dx = wavelet::modwt_forward(x, f, J, Boundary::reflecting);
      const auto dy = wavelet::modwt_forward(y, f, J, Boundary::reflecting);
      double s = 0.0;
      for (int j = 1; j <= J + 1; ++j) s += wavelet_rc_scale(dx, dy, j);
      EXPECT_NEAR(s, dot(x, y), 1e-10 * std::sqrt(dot(x, x) * dot(y, y)));
    }
  }
}

TEST(Subsampled, SingleOffsetIsPlain) {
  Rng rng(22);
  const auto x = random_series(rng, 128), y = random_series(rng, 128);
  JwcConfig cfg;
  const auto dx = wavelet::modwt_forward(x, cfg.filters, 4, cfg.boundary);
  const auto dy = wavelet::modwt_forward(y, cfg.filters, 4, cfg.boundary);
  for (int j = 1; j <= 5; ++j) EXPECT_EQ(wavelet_rc_subsampled(x, y, j, 1, 4, cfg), wavelet_rc_scale(dx, dy, j));
}

TEST(Subsampled, ZeroReturns) {
  const std::vector<double> z(100, 0.0);
  JwcConfig cfg;
  for (int g : {1, 2, 5, 10})
    for (int j = 1; j <= 4; ++j) EXPECT_EQ(wavelet_rc_subsampled(z, z, j, g, 3, cfg), 0.0);
}

TEST(Bracket, DegenerateSpacingsGiveExactZero) {
  Rng rng(23);
  JwcConfig cfg;
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = 16 + static_cast<std::size_t>(rng.uniform() * 600);
    const auto x = random_series(rng, n, std::pow(10.0, -6.0 + 8.0 * rng.uniform()));
    const auto y = random_series(rng, n);
    const int J = std::min(4, wavelet::max_levels(n, cfg.filters, cfg.boundary));
    for (int j = 1; j <= J + 1; ++j) EXPECT_EQ(two_scale_bracket(x, y, j, 1, 1, J, cfg), 0.0);
  }
}

TEST(Jwc, MatchesTimeDomainTwoScaleOracle) {
  Rng rng(24);
  for (std::size_t n : {60u, 255u, 540u})
    for (int G : {2, 3, 7}) {
      const auto x = random_series(rng, n), y = random_series(rng, n);
      JwcConfig cfg;
      cfg.slow_spacing = G;
      const auto rc = resolve(n, cfg);
      const double scale = std::sqrt(dot(x, x) * dot(y, y));
      EXPECT_NEAR(jwc_pair(x, y, cfg), tscv_oracle(x, y, G, rc.c_n), 1e-10 * scale) << n << " G=" << G;
      cfg.filters = FilterPair::haar();
      EXPECT_NEAR(jwc_pair(x, y, cfg), tscv_oracle(x, y, G, rc.c_n), 1e-10 * scale);
    }
}

TEST(Jwc, Bilinear) {
  Rng rng(25);
  const auto x = random_series(rng, 300), y = random_series(rng, 300), z = random_series(rng, 300);
  std::vector<double> xz(300);
  for (std::size_t i = 0; i < 300; ++i) xz[i] = 2.0 * x[i] - 3.0 * z[i];
  JwcConfig cfg;
  const double lhs = jwc_pair(xz, y, cfg);
  const double rhs = 2.0 * jwc_pair(x, y, cfg) - 3.0 * jwc_pair(z, y, cfg);
  EXPECT_NEAR(lhs, rhs, 1e-10 * std::abs(lhs) + 1e-12);
  EXPECT_NEAR(jwc_pair(x, y, cfg), jwc_pair(y, x, cfg), 1e-12);
}

TEST(Matrix, ZeroAndSymmetric) {
  const std::vector<std::string> names{"A", "B", "C"};
  const std::vector<std::vector<double>> zero(3, std::vector<double>(100, 0.0));
  const auto m0 = jwc_integrated_covariance(zero, names, JwcConfig{});
  for (double v : m0.values) EXPECT_EQ(v, 0.0);

  Rng rng(26);
  const std::vector<std::vector<double>> s{random_series(rng, 200), random_series(rng, 200), random_series(rng, 200)};
  const auto m = jwc_integrated_covariance(s, names, JwcConfig{});
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_EQ(m(i, j), m(j, i));
      if (i != j) {
        EXPECT_NEAR(m(i, j), jwc_pair(s[i], s[j], JwcConfig{}), 1e-14);
      }
    }
}

TEST(Matrix, NegativeDiagonalFloored) {
  // Alternating returns: pure noise, the slow grid sees almost nothing.
  std::vector<double> x(64);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = i % 2 ? 1.0 : -1.0;
  ASSERT_LT(jwc_pair(x, x, JwcConfig{}), 0.0);
  const std::vector<std::vector<double>> s{x};
  const std::vector<std::string> names{"A"};
  const auto m = jwc_integrated_covariance(s, names, JwcConfig{});
  EXPECT_EQ(m(0, 0), 0.0);
  EXPECT_TRUE(m.diagonal_floored[0]);
}

TEST(Correlation, Examples) {
  EXPECT_DOUBLE_EQ(*correlation_from(4, 2, 4).value, 0.5);
  EXPECT_DOUBLE_EQ(*correlation_from(2.5, 2.5, 2.5).value, 1.0);
  const auto c = correlation_from(1.0, 1.03, 1.0);
  EXPECT_EQ(*c.value, 1.0);
  EXPECT_TRUE(c.clamped);
  const auto n = correlation_from(1.0, -1.03, 1.0);
  EXPECT_EQ(*n.value, -1.0);
  EXPECT_TRUE(n.clamped);
  EXPECT_FALSE(correlation_from(0.0, 0.0, 1.0).value);
  EXPECT_FALSE(correlation_from(1.0, 0.0, -1.0).value);
}

TEST(Correlation, FromMatrix) {
  IcMatrix m;
  m.instruments = {"A", "B"};
  m.values = {4, 2, 2, 4};
  const auto c = continuous_correlation(m);
  EXPECT_DOUBLE_EQ(*c[1].value, 0.5);
  EXPECT_DOUBLE_EQ(*c[0].value, 1.0);
}

TEST(MonteCarlo, UnivariateVarianceWithinTwoPercent) {
  sim::SimScenario s;
  s.instruments = {"A"};
  s.intervals = 540;
  s.sigma = {1e-4 * std::sqrt(540.0)};
  s.days = 500;
  s.seed = 31;
  std::vector<double> est;
  for (const auto& day : sim::simulate(s)) est.push_back(jwc_pair(day.observed[0], day.observed[0], JwcConfig{}));
  const double truth = 540.0 * 1e-8;
  EXPECT_NEAR(mean_se(est).mean / truth, 1.0, 0.02);
}

TEST(MonteCarlo, SubsampledScalesSumToTruthForLargerSpacings) {
  sim::SimScenario s;
  s.intervals = 540;
  s.rho = 0.6;
  s.days = 500;
  s.seed = 32;
  const auto days = sim::simulate(s);
  const double truth = days[0].true_ic[1];
  JwcConfig cfg;
  for (int G : {5, 10}) {
    std::vector<double> est;
    for (const auto& day : days) {
      double total = 0.0;
      for (int j = 1; j <= 5; ++j) total += wavelet_rc_subsampled(day.observed[0], day.observed[1], j, G, 4, cfg);
      est.push_back(total);
    }
    const auto m = mean_se(est);
    // Edge blocks keep the sparse grids spanning the whole day, so no bias.
    EXPECT_LT(std::abs(m.mean - truth), 3.0 * m.se) << "G=" << G;
  }
}

TEST(MonteCarlo, NoiseRobustOffDiagonal) {
  sim::SimScenario s;
  s.intervals = 540;
  s.rho = 0.8;
  s.days = 500;
  s.seed = 33;
  s.noise_sd = {0.01 / std::sqrt(540.0)};
  const auto days = sim::simulate(s);
  std::vector<double> jwc_off, rc_diag;
  for (const auto& day : days) {
    jwc_off.push_back(jwc_pair(day.observed[0], day.observed[1], JwcConfig{}));
    rc_diag.push_back(dot(day.observed[0], day.observed[0]));
  }
  const double ic = days[0].true_ic[1], var = days[0].true_ic[0];
  EXPECT_NEAR(mean_se(jwc_off).mean / ic, 1.0, 0.05);
  // Plain realized variance picks up 2 N noise_sd^2 = 2 x truth.
  EXPECT_GT(mean_se(rc_diag).mean / var, 2.5);
}
