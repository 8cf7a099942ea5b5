#include <cmath>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "cojump/event_analysis.hpp"
#include "cojump/rng.hpp"

using namespace cojump;
using namespace cojump::events;
using market::Date;
using market::parse_time_of_day;
using market::TimeOfDay;

namespace {

DayDecomposition day(const std::string& pair, double qv, double cj) {
  DayDecomposition d;
  d.pair = pair;
  d.qv = qv;
  d.cj = cj;
  return d;
}

// Normal equations for y = a + b x solved by Cramer's rule.
std::pair<double, double> ols_oracle(const std::vector<double>& y, const std::vector<double>& x) {
  double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    n += 1;
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double det = n * sxx - sx * sx;
  return {(sy * sxx - sx * sxy) / det, (n * sxy - sx * sy) / det};
}

AnnouncementCalendar fomc_calendar() {
  AnnouncementCalendar cal;
  cal.timezone = "America/New_York";
  cal.events[Date(2008, 3, 18)] = {parse_time_of_day("13:00")};
  cal.windows = {{0, 30}};
  return cal;
}

CoJumpEvent event_at(const char* t, std::vector<double> sizes = {0.001, 0.001}) {
  return CoJumpEvent{0, parse_time_of_day(t), std::move(sizes)};
}

}  // namespace

TEST(CjQv, Examples) {
  const std::vector<DayDecomposition> zero{day("A - B", 1.0, 0.0), day("A - B", 2.0, 0.0)};
  const auto z = cj_qv_summary(zero);
  ASSERT_EQ(z.size(), 1u);
  EXPECT_EQ(z[0].days_cj, 0);
  EXPECT_EQ(z[0].pct_cj_qv, 0.0);
  EXPECT_EQ(z[0].qv, 3.0);

  const std::vector<DayDecomposition> full{day("A - B", 0.5, 0.5)};
  EXPECT_DOUBLE_EQ(cj_qv_summary(full)[0].pct_cj_qv, 100.0);

  const std::vector<DayDecomposition> mixed{day("A - B", 1.0, 0.25), day("A - C", 2.0, 0.0), day("A - B", 2.0, 0.0),
                                            day("A - B", 0.0, 0.0)};
  const auto m = cj_qv_summary(mixed);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[0].pair, "A - B");
  EXPECT_EQ(m[0].days_cj, 1);
  EXPECT_DOUBLE_EQ(m[0].pct_cj_qv, 12.5);
  EXPECT_EQ(m[1].pair, "A - C");
}

TEST(Ols, IdentityCase) {
  const std::vector<double> x{0.1, 0.5, 0.3, 0.9, -0.2};
  const auto r = correlation_impact_regression(x, x);
  EXPECT_NEAR(r.alpha, 0.0, 1e-14);
  EXPECT_NEAR(r.beta, 1.0, 1e-14);
  EXPECT_NEAR(r.r2, 1.0, 1e-14);
  EXPECT_LT(r.wald, 1e-6);
  EXPECT_GT(r.wald_p, 0.05);
}

TEST(Ols, ExactLinearData) {
  const std::vector<double> x{0.1, 0.5, 0.3, 0.9, -0.2, 0.4};
  std::vector<double> y;
  for (double v : x) y.push_back(0.2 + 0.7 * v);
  const auto r = correlation_impact_regression(y, x);
  EXPECT_NEAR(r.alpha, 0.2, 1e-10);
  EXPECT_NEAR(r.beta, 0.7, 1e-10);
  EXPECT_NEAR(r.r2, 1.0, 1e-10);
  EXPECT_EQ(r.wald_p, 0.0);
}

TEST(Ols, MatchesNormalEquations) {
  Rng rng(41);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 3 + static_cast<std::size_t>(rng.uniform() * 200);
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = rng.uniform() * 2.0 - 1.0;
      y[i] = 0.1 + 0.8 * x[i] + 0.1 * rng.normal();
    }
    const auto r = correlation_impact_regression(y, x);
    const auto [a, b] = ols_oracle(y, x);
    EXPECT_NEAR(r.alpha, a, 1e-8);
    EXPECT_NEAR(r.beta, b, 1e-8);
  }
}

TEST(Ols, Errors) {
  const std::vector<double> two{0.1, 0.2};
  EXPECT_THROW(correlation_impact_regression(two, two), Error);
  const std::vector<double> flat{0.3, 0.3, 0.3, 0.3}, y{0.1, 0.2, 0.3, 0.4};
  EXPECT_THROW(correlation_impact_regression(y, flat), Error);
}

TEST(Wald, HandAssembledSandwichTenObservations) {
  const std::vector<double> x{0.12, 0.35, 0.41, 0.55, 0.60, 0.68, 0.72, 0.80, 0.85, 0.91};
  const std::vector<double> y{0.20, 0.30, 0.52, 0.50, 0.71, 0.62, 0.80, 0.77, 0.93, 0.90};
  const auto r = correlation_impact_regression(y, x);
  const auto [a, b] = ols_oracle(y, x);

  // Bread (X'X)^-1 by the 2x2 adjugate, meat sum e^2 x x'.
  double n = 0, sx = 0, sxx = 0, m00 = 0, m01 = 0, m11 = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - a - b * x[i];
    n += 1;
    sx += x[i];
    sxx += x[i] * x[i];
    m00 += e * e;
    m01 += e * e * x[i];
    m11 += e * e * x[i] * x[i];
  }
  const double det = n * sxx - sx * sx;
  const double B00 = sxx / det, B01 = -sx / det, B11 = n / det;
  // V = B M B, written out entry by entry.
  const double T00 = B00 * m00 + B01 * m01, T01 = B00 * m01 + B01 * m11;
  const double T10 = B01 * m00 + B11 * m01, T11 = B01 * m01 + B11 * m11;
  const double V00 = T00 * B00 + T01 * B01, V01 = T00 * B01 + T01 * B11;
  const double V11 = T10 * B01 + T11 * B11;
  EXPECT_NEAR(r.hc0[0], V00, 1e-12);
  EXPECT_NEAR(r.hc0[1], V01, 1e-12);
  EXPECT_NEAR(r.hc0[2], V01, 1e-12);
  EXPECT_NEAR(r.hc0[3], V11, 1e-12);

  const double vdet = V00 * V11 - V01 * V01;
  const double d0 = a, d1 = b - 1.0;
  const double wald = (d0 * d0 * V11 - 2.0 * d0 * d1 * V01 + d1 * d1 * V00) / vdet;
  EXPECT_NEAR(r.wald, wald, 1e-8 * std::max(1.0, wald));
  EXPECT_NEAR(r.wald_p, std::exp(-wald / 2.0), 1e-10);  // chi-square(2) survival
}

TEST(Logit, SaturatedTwoByTwo) {
  // News: 10 days, 5 co-jumps. Other: 20 days, 2 co-jumps.
  std::vector<int> y, news;
  for (int i = 0; i < 10; ++i) {
    news.push_back(1);
    y.push_back(i < 5);
  }
  for (int i = 0; i < 20; ++i) {
    news.push_back(0);
    y.push_back(i < 2);
  }
  const auto f = announcement_logit(y, news);
  EXPECT_TRUE(f.converged);
  EXPECT_NEAR(f.beta0, std::log(1.0 / 9.0), 1e-8);
  EXPECT_NEAR(f.beta1, std::log(9.0), 1e-8);
  EXPECT_NEAR(f.beta0, -2.1972, 1e-4);
  EXPECT_NEAR(f.se0, std::sqrt(1.0 / 2 + 1.0 / 18), 1e-8);
  EXPECT_NEAR(f.se1, std::sqrt(1.0 / 5 + 1.0 / 5 + 1.0 / 2 + 1.0 / 18), 1e-8);
  EXPECT_GT(f.pseudo_r2, 0.0);
  EXPECT_LT(f.pseudo_r2, 1.0);
}

TEST(Logit, ScoreEquationsVanish) {
  Rng rng(42);
  const std::size_t n = 400, k = 3;
  std::vector<double> x;
  std::vector<int> y;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = rng.normal(), b = rng.uniform();
    x.insert(x.end(), {1.0, a, b});
    const double eta = -0.5 + 0.8 * a - 1.2 * b;
    y.push_back(rng.uniform() < 1.0 / (1.0 + std::exp(-eta)));
  }
  const auto f = logit_irls(x, k, y);
  ASSERT_TRUE(f.converged);
  for (std::size_t j = 0; j < k; ++j) {
    double score = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double eta = 0.0;
      for (std::size_t l = 0; l < k; ++l) eta += x[i * k + l] * f.beta[l];
      score += (y[i] - 1.0 / (1.0 + std::exp(-eta))) * x[i * k + j];
    }
    EXPECT_NEAR(score, 0.0, 1e-6);
  }
}

TEST(Logit, Separation) {
  const std::vector<int> y{0, 1, 0, 1}, constant_news{1, 1, 1, 1};
  EXPECT_THROW(announcement_logit(y, constant_news), Error);
  const std::vector<int> news{1, 1, 0, 0}, perfect{1, 1, 0, 0};
  EXPECT_THROW(announcement_logit(perfect, news), Error);
  const std::vector<int> all_zero{0, 0, 0, 0};
  EXPECT_THROW(announcement_logit(all_zero, news), Error);
  try {
    announcement_logit(perfect, news);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "Separation");
    EXPECT_EQ(e.kind(), ErrorKind::numerical);
  }
}

TEST(Window, Containment) {
  const auto cal = fomc_calendar();
  const Date d(2008, 3, 18);
  const std::vector<CoJumpEvent> in{event_at("13:12")}, before{event_at("12:59")}, after{event_at("13:30")};
  EXPECT_EQ(cojump_window_indicator(d, in, "America/New_York", cal), 1);
  EXPECT_EQ(cojump_window_indicator(d, before, "America/New_York", cal), 0);
  EXPECT_EQ(cojump_window_indicator(d, after, "America/New_York", cal), 0);
  EXPECT_EQ(cojump_window_indicator(Date(2008, 3, 19), in, "America/New_York", cal), 0);
  EXPECT_EQ(cojump_window_indicator(d, std::vector<CoJumpEvent>{}, "America/New_York", cal), 0);
}

TEST(Window, EcbTwoWindows) {
  AnnouncementCalendar cal;
  cal.timezone = "Europe/Berlin";
  cal.events[Date(2008, 6, 5)] = {parse_time_of_day("13:30")};
  cal.windows = {{0, 15}, {60, 90}};  // 13:30-13:45 and 14:30-15:00
  const std::vector<CoJumpEvent> ev{event_at("14:45")}, gap{event_at("14:00")};
  EXPECT_EQ(cojump_window_indicator(Date(2008, 6, 5), ev, "Europe/Berlin", cal), 1);
  EXPECT_EQ(cojump_window_indicator(Date(2008, 6, 5), gap, "Europe/Berlin", cal), 0);
}

TEST(Window, TimezoneMismatchIsHardError) {
  const auto cal = fomc_calendar();
  const std::vector<CoJumpEvent> in{event_at("13:12")};
  try {
    cojump_window_indicator(Date(2008, 3, 18), in, "UTC", cal);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "TimezoneMismatch");
    EXPECT_EQ(e.kind(), ErrorKind::config);
  }
}

TEST(Window, DefaultTimeOnOtherDays) {
  auto cal = fomc_calendar();
  const std::vector<CoJumpEvent> ev{event_at("13:05")};
  EXPECT_EQ(cojump_window_indicator(Date(2008, 3, 20), ev, "America/New_York", cal), 0);
  cal.default_time = parse_time_of_day("13:00");
  EXPECT_EQ(cojump_window_indicator(Date(2008, 3, 20), ev, "America/New_York", cal), 1);
}

TEST(Window, MonotoneInLength) {
  Rng rng(43);
  const Date d(2008, 3, 18);
  for (int rep = 0; rep < 200; ++rep) {
    AnnouncementCalendar cal = fomc_calendar();
    const int start = static_cast<int>(rng.uniform() * 60) - 30;
    const int len = 1 + static_cast<int>(rng.uniform() * 60);
    cal.windows = {{start, start + len}};
    const std::vector<CoJumpEvent> ev{
        CoJumpEvent{0, TimeOfDay{12 * 3600 + static_cast<int>(rng.uniform() * 7200)}, {1.0, 1.0}}};
    const int narrow = cojump_window_indicator(d, ev, cal.timezone, cal);
    cal.windows = {{start - static_cast<int>(rng.uniform() * 10), start + len + static_cast<int>(rng.uniform() * 10)}};
    EXPECT_GE(cojump_window_indicator(d, ev, cal.timezone, cal), narrow);
  }
}

TEST(Calendar, Validation) {
  AnnouncementCalendar cal;
  EXPECT_THROW(cal.validate(), Error);
  cal.windows = {{10, 10}};
  EXPECT_THROW(cal.validate(), Error);
  cal.windows = {{0, 30}};
  EXPECT_NO_THROW(cal.validate());
}

TEST(Histogram, Examples) {
  const auto open = parse_time_of_day("07:00"), close = parse_time_of_day("16:00");
  const auto empty = intraday_histogram(std::span<const TimeOfDay>{}, open, close, 30);
  ASSERT_EQ(empty.size(), 18u);
  for (const auto& b : empty) EXPECT_EQ(b.count, 0);

  const std::vector<TimeOfDay> times{parse_time_of_day("07:31"), parse_time_of_day("07:45"), parse_time_of_day("13:05")};
  const auto h = intraday_histogram(times, open, close, 30);
  int total = 0;
  for (const auto& b : h) {
    total += b.count;
    if (b.start == parse_time_of_day("07:30")) EXPECT_EQ(b.count, 2);
    else if (b.start == parse_time_of_day("13:00")) EXPECT_EQ(b.count, 1);
    else EXPECT_EQ(b.count, 0);
  }
  EXPECT_EQ(total, 3);

  const std::vector<TimeOfDay> same{parse_time_of_day("09:00"), parse_time_of_day("09:10"), parse_time_of_day("09:29:59")};
  const auto s = intraday_histogram(same, open, close, 30);
  EXPECT_EQ(s[4].count, 3);
}

TEST(Histogram, Errors) {
  const auto open = parse_time_of_day("07:00"), close = parse_time_of_day("16:00");
  EXPECT_THROW(intraday_histogram(std::span<const TimeOfDay>{}, open, close, 7), Error);
  EXPECT_THROW(intraday_histogram(std::span<const TimeOfDay>{}, open, close, 0), Error);
  const std::vector<TimeOfDay> late{parse_time_of_day("16:00")};
  EXPECT_THROW(intraday_histogram(late, open, close, 30), Error);
}

TEST(ShiftRotation, Examples) {
  EXPECT_EQ(classify_shift_rotation(std::vector<double>{0.004, 0.002}), ShiftRotation::UpShift);
  EXPECT_EQ(classify_shift_rotation(std::vector<double>{-0.004, -0.002}), ShiftRotation::DownShift);
  EXPECT_EQ(classify_shift_rotation(std::vector<double>{0.004, -0.002}), ShiftRotation::Rotation);
  EXPECT_THROW(classify_shift_rotation(std::vector<double>{0.004, 0.0}), Error);
  EXPECT_THROW(classify_shift_rotation(std::vector<double>{0.004}), std::invalid_argument);
}

TEST(ShiftRotation, ExhaustiveSignPatterns) {
  for (std::size_t m : {2u, 3u, 4u}) {
    int counts[4] = {0, 0, 0, 0};
    for (unsigned mask = 0; mask < (1u << m); ++mask) {
      std::vector<double> sizes(m);
      int positives = 0;
      for (std::size_t i = 0; i < m; ++i) {
        const bool up = (mask >> i) & 1u;
        sizes[i] = (up ? 1.0 : -1.0) * 0.001 * static_cast<double>(i + 1);
        positives += up;
      }
      const auto label = classify_shift_rotation(sizes);
      const auto expected = positives == static_cast<int>(m) ? ShiftRotation::UpShift
                            : positives == 0                 ? ShiftRotation::DownShift
                                                             : ShiftRotation::Rotation;
      EXPECT_EQ(label, expected) << "m=" << m << " mask=" << mask;
      ++counts[static_cast<int>(label)];
    }
    EXPECT_EQ(counts[1], 1);
    EXPECT_EQ(counts[2], 1);
    EXPECT_EQ(counts[3], (1 << m) - 2);
  }
}

TEST(ShiftRotation, DayLabelUsesDominantEvent) {
  const std::vector<CoJumpEvent> ev{event_at("08:00", {0.001, 0.001}), event_at("13:00", {0.004, -0.003})};
  EXPECT_EQ(day_label(ev), ShiftRotation::Rotation);
  EXPECT_EQ(day_label(std::vector<CoJumpEvent>{}), ShiftRotation::None);
}

TEST(Table6, PercentagesAndOrdering) {
  AnnouncementCalendar cal;
  cal.windows = {{0, 30}};
  std::set<Date> sample;
  std::vector<LabelledDay> labels;
  Date d(2008, 1, 1);
  for (int i = 0; i < 300; ++i, ++d) {
    sample.insert(d);
    if (i < 106) cal.events[d] = {parse_time_of_day("14:00")};
    if (i < 37) labels.push_back({"A - B - C", d, ShiftRotation::Rotation});
    if (i >= 106 && i < 110) labels.push_back({"A - B - C", d, ShiftRotation::UpShift});
  }
  const auto counts = day_counts(sample, cal);
  EXPECT_EQ(counts.announcement, 106);
  EXPECT_EQ(counts.other, 194);
  const std::vector<std::string> tuples{"A - B - C"};
  const auto rows = shift_rotation_table(labels, tuples, cal, counts);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_TRUE(rows[0].announcement);
  EXPECT_EQ(rows[0].rotations, 37);
  EXPECT_NEAR(rows[0].rotation_pct, 34.91, 0.005);
  EXPECT_EQ(fmt::format("{:.2f}", rows[0].rotation_pct), "34.91");
  EXPECT_EQ(rows[0].days, 37);
  EXPECT_FALSE(rows[1].announcement);
  EXPECT_EQ(rows[1].up_shifts, 4);
  EXPECT_NEAR(rows[1].up_pct, 400.0 / 194.0, 1e-12);
}

TEST(Table6, ZeroEvents) {
  AnnouncementCalendar cal;
  cal.windows = {{0, 30}};
  const std::vector<std::string> tuples{"A - B"};
  const auto rows = shift_rotation_table(std::span<const LabelledDay>{}, tuples, cal, DayCounts{});
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) {
    EXPECT_EQ(r.days, 0);
    EXPECT_EQ(r.days_pct, 0.0);
  }
}
