#pragma once

// Aggregation of daily decompositions into report tables: co-jump share of
// covariation, the correlation-impact regression, the announcement logit,
// intraday histograms and level-shift / rotation counts.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <fmt/format.h>

#include "cojump/cojump_test.hpp"
#include "cojump/error.hpp"
#include "cojump/market_data.hpp"

namespace cojump::events {

using market::Date;
using market::TimeOfDay;

// ---------------------------------------------------------------------------
// Daily records

struct CoJumpEvent {
  std::size_t index = 0;
  TimeOfDay time;             // grid label of the return interval's left end
  std::vector<double> sizes;  // one signed size per member
};

struct DayDecomposition {
  Date date;
  std::string pair;  // "A - B"
  double qv = 0.0;
  double ic = 0.0;      // selected IC*
  double ic_jwc = 0.0;
  double cj = 0.0;      // non-zero only on co_jump days
  double corr_qv = std::numeric_limits<double>::quiet_NaN();
  double corr_ic = std::numeric_limits<double>::quiet_NaN();
  test::Classification classification = test::Classification::no_discontinuity;
  std::vector<CoJumpEvent> events;
};

// ---------------------------------------------------------------------------
// CJ / QV summary

struct CjQvRow {
  std::string pair;
  int days_cj = 0;
  double qv = 0.0;         // sum of daily QV
  double pct_cj_qv = 0.0;  // mean over days with QV != 0 of 100 CJ/QV
};

inline std::vector<CjQvRow> cj_qv_summary(std::span<const DayDecomposition> days) {
  require(!days.empty(), "cj_qv_summary: empty input");
  std::vector<CjQvRow> rows;
  std::map<std::string, std::size_t> at;
  std::vector<int> ratio_days;
  for (const auto& d : days) {
    auto [it, fresh] = at.try_emplace(d.pair, rows.size());
    if (fresh) {
      rows.push_back({d.pair});
      ratio_days.push_back(0);
    }
    auto& r = rows[it->second];
    if (d.cj != 0.0) ++r.days_cj;
    r.qv += d.qv;
    if (d.qv != 0.0) {
      r.pct_cj_qv += 100.0 * d.cj / d.qv;
      ++ratio_days[it->second];
    }
  }
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (ratio_days[i] > 0) rows[i].pct_cj_qv /= ratio_days[i];
  return rows;
}

// ---------------------------------------------------------------------------
// Small dense linear algebra (k <= a handful)

namespace detail {

/// Inverse of a k x k row-major matrix by Gauss-Jordan with partial
/// pivoting; nullopt when singular.
inline std::optional<std::vector<double>> invert(std::vector<double> a, std::size_t k) {
  std::vector<double> inv(k * k, 0.0);
  for (std::size_t i = 0; i < k; ++i) inv[i * k + i] = 1.0;
  double scale = 0.0;
  for (double v : a) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) return std::nullopt;
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < k; ++r)
      if (std::abs(a[r * k + c]) > std::abs(a[p * k + c])) p = r;
    if (std::abs(a[p * k + c]) <= 1e-14 * scale) return std::nullopt;
    if (p != c)
      for (std::size_t j = 0; j < k; ++j) {
        std::swap(a[p * k + j], a[c * k + j]);
        std::swap(inv[p * k + j], inv[c * k + j]);
      }
    const double d = a[c * k + c];
    for (std::size_t j = 0; j < k; ++j) {
      a[c * k + j] /= d;
      inv[c * k + j] /= d;
    }
    for (std::size_t r = 0; r < k; ++r) {
      if (r == c) continue;
      const double f = a[r * k + c];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < k; ++j) {
        a[r * k + j] -= f * a[c * k + j];
        inv[r * k + j] -= f * inv[c * k + j];
      }
    }
  }
  return inv;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Correlation-impact regression: corr_QV = alpha + beta corr_IC + e

struct RegressionResult {
  std::size_t n = 0;
  double alpha = 0.0, beta = 0.0;
  double r2 = std::numeric_limits<double>::quiet_NaN();  // undefined for constant response
  std::array<double, 4> hc0{};  // White covariance of (alpha, beta), row-major
  double wald = 0.0;            // H0: alpha = 0 and beta = 1
  double wald_p = 1.0;          // chi-squared(2) upper tail
};

inline RegressionResult correlation_impact_regression(std::span<const double> corr_qv,
                                                      std::span<const double> corr_ic) {
  require(corr_qv.size() == corr_ic.size(), "correlation_impact_regression: length mismatch");
  const std::size_t n = corr_qv.size();
  if (n < 3) fail_numerical("TooFewObservations", fmt::format("regression needs >= 3 days, got {}", n));
  RegressionResult r;
  r.n = n;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += corr_ic[i];
    my += corr_qv[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (corr_ic[i] - mx) * (corr_ic[i] - mx);
    sxy += (corr_ic[i] - mx) * (corr_qv[i] - my);
    syy += (corr_qv[i] - my) * (corr_qv[i] - my);
  }
  if (!(sxx > 0.0)) fail_numerical("DegenerateRegressor", "continuous correlation has zero variance");
  r.beta = sxy / sxx;
  r.alpha = my - r.beta * mx;

  // (X'X)^-1 X' diag(e^2) X (X'X)^-1 with X = [1, x].
  double ssr = 0.0;
  std::array<double, 4> meat{};
  double s1 = 0.0, sx = 0.0, sxx_raw = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = corr_ic[i];
    const double e = corr_qv[i] - r.alpha - r.beta * x;
    ssr += e * e;
    meat[0] += e * e;
    meat[1] += e * e * x;
    meat[3] += e * e * x * x;
    s1 += 1.0;
    sx += x;
    sxx_raw += x * x;
  }
  meat[2] = meat[1];
  const auto bread = detail::invert({s1, sx, sx, sxx_raw}, 2);
  if (!bread) fail_numerical("DegenerateRegressor", "singular design matrix");
  const auto& b = *bread;
  std::array<double, 4> tmp{};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k) tmp[i * 2 + j] += b[i * 2 + k] * meat[k * 2 + j];
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      double s = 0.0;
      for (int k = 0; k < 2; ++k) s += tmp[i * 2 + k] * b[k * 2 + j];
      r.hc0[i * 2 + j] = s;
    }
  if (syy > 0.0) r.r2 = 1.0 - ssr / syy;

  const std::array<double, 2> dev{r.alpha, r.beta - 1.0};
  const auto vinv = detail::invert({r.hc0.begin(), r.hc0.end()}, 2);
  if (vinv) {
    const auto& v = *vinv;
    r.wald = dev[0] * (v[0] * dev[0] + v[1] * dev[1]) + dev[1] * (v[2] * dev[0] + v[3] * dev[1]);
  } else {
    // Exact fit: zero sampling variance, so any departure is infinitely significant.
    r.wald = (dev[0] == 0.0 && dev[1] == 0.0) ? 0.0 : std::numeric_limits<double>::infinity();
  }
  r.wald_p = std::isinf(r.wald) ? 0.0 : boost::math::cdf(boost::math::complement(boost::math::chi_squared(2.0), r.wald));
  return r;
}

// ---------------------------------------------------------------------------
// Logit by iteratively reweighted least squares

struct LogitResult {
  std::vector<double> beta;
  std::vector<double> se;
  double log_likelihood = 0.0;
  double null_log_likelihood = 0.0;
  double pseudo_r2 = 0.0;  // McFadden
  int iterations = 0;
  bool converged = false;
};

/// Logistic MLE of y on the columns of `x` (n rows, k columns, row-major,
/// include a constant column for an intercept).
inline LogitResult logit_irls(std::span<const double> x, std::size_t k, std::span<const int> y) {
  const std::size_t n = y.size();
  require(k >= 1 && x.size() == n * k, "logit_irls: design shape");
  std::size_t ones = 0;
  for (int v : y) {
    require(v == 0 || v == 1, "logit_irls: binary outcome");
    ones += static_cast<std::size_t>(v);
  }
  if (ones == 0 || ones == n) fail_numerical("Separation", "outcome has a single class");

  auto loglik = [&](const std::vector<double>& b) {
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double eta = 0.0;
      for (std::size_t j = 0; j < k; ++j) eta += x[i * k + j] * b[j];
      // log(1 + e^eta) computed stably
      const double softplus = eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
      ll += y[i] * eta - softplus;
    }
    return ll;
  };

  LogitResult res;
  std::vector<double> b(k, 0.0);
  double ll = loglik(b);
  std::vector<double> info(k * k);
  for (int it = 1; it <= 100; ++it) {
    std::vector<double> score(k, 0.0);
    std::fill(info.begin(), info.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double eta = 0.0;
      for (std::size_t j = 0; j < k; ++j) eta += x[i * k + j] * b[j];
      const double p = 1.0 / (1.0 + std::exp(-eta));
      const double w = p * (1.0 - p);
      for (std::size_t j = 0; j < k; ++j) {
        score[j] += x[i * k + j] * (y[i] - p);
        for (std::size_t l = 0; l < k; ++l) info[j * k + l] += w * x[i * k + j] * x[i * k + l];
      }
    }
    const auto inv = detail::invert(info, k);
    if (!inv) fail_numerical("Separation", "information matrix singular (separated or constant regressor)");
    for (std::size_t j = 0; j < k; ++j)
      for (std::size_t l = 0; l < k; ++l) b[j] += (*inv)[j * k + l] * score[l];
    for (double v : b)
      if (!std::isfinite(v) || std::abs(v) > 50.0) fail_numerical("Separation", "logit estimates diverge (separation)");
    const double next = loglik(b);
    res.iterations = it;
    const double change = std::abs(next - ll);
    ll = next;
    if (change < 1e-10) {
      res.converged = true;
      break;
    }
  }

  // Standard errors from the information at the final estimate.
  std::fill(info.begin(), info.end(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double eta = 0.0;
    for (std::size_t j = 0; j < k; ++j) eta += x[i * k + j] * b[j];
    const double p = 1.0 / (1.0 + std::exp(-eta));
    for (std::size_t j = 0; j < k; ++j)
      for (std::size_t l = 0; l < k; ++l) info[j * k + l] += p * (1.0 - p) * x[i * k + j] * x[i * k + l];
  }
  const auto cov = detail::invert(info, k);
  if (!cov) fail_numerical("Separation", "information matrix singular at the optimum");
  res.beta = b;
  res.se.resize(k);
  for (std::size_t j = 0; j < k; ++j) res.se[j] = std::sqrt((*cov)[j * k + j]);
  res.log_likelihood = ll;
  const double pbar = static_cast<double>(ones) / n;
  res.null_log_likelihood = ones * std::log(pbar) + (n - ones) * std::log1p(-pbar);
  res.pseudo_r2 = 1.0 - res.log_likelihood / res.null_log_likelihood;
  return res;
}

struct AnnouncementLogit {
  double beta0 = 0.0, beta1 = 0.0;
  double se0 = 0.0, se1 = 0.0;
  double pseudo_r2 = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// P(co-jump) = Lambda(beta0 + beta1 news). A regressor without contrast, or
/// a news/no-news cell whose outcomes are all equal, separates the data.
inline AnnouncementLogit announcement_logit(std::span<const int> cojump, std::span<const int> news) {
  require(cojump.size() == news.size(), "announcement_logit: length mismatch");
  std::array<std::array<int, 2>, 2> cells{};  // [news][y]
  for (std::size_t i = 0; i < news.size(); ++i) {
    require((news[i] == 0 || news[i] == 1) && (cojump[i] == 0 || cojump[i] == 1), "announcement_logit: binary inputs");
    ++cells[news[i]][cojump[i]];
  }
  if (cells[0][0] + cells[0][1] == 0 || cells[1][0] + cells[1][1] == 0)
    fail_numerical("Separation", "news indicator is constant");
  for (int g = 0; g < 2; ++g)
    if (cells[g][0] == 0 || cells[g][1] == 0)
      fail_numerical("Separation", fmt::format("outcome constant on {} days (complete separation)", g ? "news" : "non-news"));
  std::vector<double> x;
  x.reserve(2 * news.size());
  for (int v : news) {
    x.push_back(1.0);
    x.push_back(static_cast<double>(v));
  }
  const auto fit = logit_irls(x, 2, cojump);
  AnnouncementLogit out;
  out.beta0 = fit.beta[0];
  out.beta1 = fit.beta[1];
  out.se0 = fit.se[0];
  out.se1 = fit.se[1];
  out.pseudo_r2 = fit.pseudo_r2;
  out.iterations = fit.iterations;
  out.converged = fit.converged;
  return out;
}

// ---------------------------------------------------------------------------
// Announcement calendar and windows

struct Window {
  int start_minutes = 0;  // offsets from the event's wall-clock time
  int end_minutes = 0;
};

struct AnnouncementCalendar {
  std::string timezone = "UTC";
  std::map<Date, std::vector<TimeOfDay>> events;  // release times per date
  std::optional<TimeOfDay> default_time;          // applied on non-announcement days
  std::vector<Window> windows;

  void validate() const {
    if (windows.empty()) fail_config("BadCalendar", "announcement calendar needs at least one window");
    for (const auto& w : windows)
      if (w.end_minutes <= w.start_minutes)
        fail_config("BadCalendar", fmt::format("window [{}, {}) has no length", w.start_minutes, w.end_minutes));
  }

  bool is_announcement(Date d) const { return events.count(d) > 0; }

  /// Event times governing `d`: the day's releases, else the default time.
  std::vector<TimeOfDay> anchors(Date d) const {
    if (auto it = events.find(d); it != events.end()) return it->second;
    if (default_time) return {*default_time};
    return {};
  }
};

/// True when `t` lies in [event + start, event + end) for some anchor of `d`.
inline bool in_window(const AnnouncementCalendar& cal, Date d, TimeOfDay t) {
  for (const auto anchor : cal.anchors(d))
    for (const auto& w : cal.windows) {
      const int lo = anchor.seconds + 60 * w.start_minutes;
      const int hi = anchor.seconds + 60 * w.end_minutes;
      if (t.seconds >= lo && t.seconds < hi) return true;
    }
  return false;
}

/// 1 iff any co-jump event of the day falls inside a window. `event_tz` is
/// the zone of the event timestamps and must equal the calendar's.
inline int cojump_window_indicator(Date d, std::span<const CoJumpEvent> day_events,
                                   const std::string& event_tz, const AnnouncementCalendar& cal) {
  if (event_tz != cal.timezone)
    fail_config("TimezoneMismatch",
                fmt::format("event times are in '{}' but the calendar is in '{}'", event_tz, cal.timezone));
  for (const auto& e : day_events)
    if (in_window(cal, d, e.time)) return 1;
  return 0;
}

// ---------------------------------------------------------------------------
// Intraday histogram

struct HistogramBin {
  TimeOfDay start;
  int count = 0;
};

inline std::vector<HistogramBin> intraday_histogram(std::span<const TimeOfDay> times, TimeOfDay session_start,
                                                    TimeOfDay session_end, int bin_minutes) {
  const int length = session_end.seconds - session_start.seconds;
  if (bin_minutes <= 0 || length <= 0 || length % (60 * bin_minutes) != 0)
    fail_config("BadHistogram", fmt::format("bin width {} min must divide the session", bin_minutes));
  const int width = 60 * bin_minutes;
  std::vector<HistogramBin> bins(static_cast<std::size_t>(length / width));
  for (std::size_t b = 0; b < bins.size(); ++b) bins[b].start = TimeOfDay{session_start.seconds + static_cast<int>(b) * width};
  for (const auto t : times) {
    const int off = t.seconds - session_start.seconds;
    if (off < 0 || off >= length)
      fail_config("EventOutsideSession", "co-jump time " + market::format_time_of_day(t) + " is outside the session");
    ++bins[static_cast<std::size_t>(off / width)].count;
  }
  return bins;
}

// ---------------------------------------------------------------------------
// Level shifts and rotations

enum class ShiftRotation { None, UpShift, DownShift, Rotation };

inline const char* to_string(ShiftRotation s) {
  switch (s) {
    case ShiftRotation::None: return "None";
    case ShiftRotation::UpShift: return "UpShift";
    case ShiftRotation::DownShift: return "DownShift";
    case ShiftRotation::Rotation: return "Rotation";
  }
  return "unknown";
}

inline ShiftRotation classify_shift_rotation(std::span<const double> sizes) {
  require(sizes.size() >= 2, "classify_shift_rotation: at least two members");
  int up = 0, down = 0;
  for (double s : sizes) {
    if (s == 0.0 || !std::isfinite(s)) fail_numerical("NotACoJump", "every member of a co-jump tuple must jump");
    (s > 0 ? up : down)++;
  }
  if (down == 0) return ShiftRotation::UpShift;
  if (up == 0) return ShiftRotation::DownShift;
  return ShiftRotation::Rotation;
}

/// Label of a co-jump day: the label of its dominant event (largest total
/// absolute jump size); None without events.
inline ShiftRotation day_label(std::span<const CoJumpEvent> day_events) {
  const CoJumpEvent* best = nullptr;
  double best_size = -1.0;
  for (const auto& e : day_events) {
    double s = 0.0;
    for (double v : e.sizes) s += std::abs(v);
    if (s > best_size) {
      best_size = s;
      best = &e;
    }
  }
  return best ? classify_shift_rotation(best->sizes) : ShiftRotation::None;
}

struct LabelledDay {
  std::string tuple;  // "A - B - C"
  Date date;
  ShiftRotation label = ShiftRotation::None;
};

struct ShiftRotationRow {
  std::string tuple;
  bool announcement = false;
  int rotations = 0, up_shifts = 0, down_shifts = 0, days = 0;
  double rotation_pct = 0.0, up_pct = 0.0, down_pct = 0.0, days_pct = 0.0;
};

struct DayCounts {
  int announcement = 0;
  int other = 0;
};

/// Sample days split into announcement / non-announcement.
inline DayCounts day_counts(const std::set<Date>& sample_days, const AnnouncementCalendar& cal) {
  DayCounts c;
  for (const auto d : sample_days) (cal.is_announcement(d) ? c.announcement : c.other)++;
  return c;
}

/// Counts per tuple and day type; percentages relative to the number of
/// announcement / non-announcement sample days. Tuples keep `tuples` order.
inline std::vector<ShiftRotationRow> shift_rotation_table(std::span<const LabelledDay> labels,
                                                          std::span<const std::string> tuples,
                                                          const AnnouncementCalendar& cal, DayCounts denominators) {
  std::vector<ShiftRotationRow> rows;
  for (int ann = 1; ann >= 0; --ann)
    for (const auto& t : tuples) {
      ShiftRotationRow r;
      r.tuple = t;
      r.announcement = ann == 1;
      for (const auto& l : labels) {
        if (l.tuple != t || cal.is_announcement(l.date) != r.announcement || l.label == ShiftRotation::None) continue;
        ++r.days;
        if (l.label == ShiftRotation::Rotation) ++r.rotations;
        if (l.label == ShiftRotation::UpShift) ++r.up_shifts;
        if (l.label == ShiftRotation::DownShift) ++r.down_shifts;
      }
      const int denom = r.announcement ? denominators.announcement : denominators.other;
      auto pct = [denom](int k) { return denom > 0 ? 100.0 * k / denom : 0.0; };
      r.rotation_pct = pct(r.rotations);
      r.up_pct = pct(r.up_shifts);
      r.down_pct = pct(r.down_shifts);
      r.days_pct = pct(r.days);
      rows.push_back(r);
    }
  return rows;
}

}  // namespace cojump::events
