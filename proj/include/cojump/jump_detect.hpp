#pragma once

// Wavelet jump localization and co-jump variation.
//
// A return is a jump when the aligned level-1 coefficient of its cumulative
// path exceeds the day's universal threshold
//   xi = sqrt(2) * median|W1| * sqrt(2 ln N) / 0.6745
// (strict inequality). The flagged size is the raw return itself.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "cojump/error.hpp"
#include "cojump/modwt.hpp"

namespace cojump::jumps {

struct Threshold {
  double value = 0.0;
  bool degenerate = false;  // all coefficients zero: no usable scale estimate
};

inline double median_abs(std::span<const double> x) {
  std::vector<double> a(x.size());
  std::transform(x.begin(), x.end(), a.begin(), [](double v) { return std::abs(v); });
  const std::size_t n = a.size();
  const auto mid = a.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(a.begin(), mid, a.end());
  if (n % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(a.begin(), mid);
  return 0.5 * (lower + upper);
}

inline Threshold universal_threshold(std::span<const double> w1) {
  require(w1.size() >= 2, "universal_threshold: N >= 2");
  const double n = static_cast<double>(w1.size());
  const double mad = median_abs(w1);
  Threshold t;
  t.value = std::sqrt(2.0) * mad * std::sqrt(2.0 * std::log(n)) / 0.6745;
  t.degenerate = !(t.value > 0.0);
  return t;
}

struct JumpSeries {
  std::string instrument;
  std::vector<double> sizes;           // length N, zero where no jump
  std::vector<std::size_t> indices;    // sorted
  double threshold = 0.0;
  bool degenerate = false;

  bool empty() const { return indices.empty(); }
};

/// Flags index i iff |w1[i]| > xi; the jump size is returns[i].
inline JumpSeries detect_jumps(std::span<const double> returns, std::span<const double> w1, double xi) {
  require(returns.size() == w1.size(), "detect_jumps: length mismatch");
  JumpSeries js;
  js.threshold = xi;
  js.sizes.assign(returns.size(), 0.0);
  for (std::size_t i = 0; i < returns.size(); ++i) {
    if (std::abs(w1[i]) > xi && returns[i] != 0.0) {
      js.sizes[i] = returns[i];
      js.indices.push_back(i);
    }
  }
  return js;
}

struct DetectorConfig {
  wavelet::FilterPair filters = wavelet::FilterPair::haar();
  wavelet::Boundary boundary = wavelet::Boundary::reflecting;
};

/// Full single-series pass: aligned level-1 coefficients, day-local
/// threshold, detection. Degenerate-threshold days report no jumps.
inline JumpSeries detect_day(std::span<const double> returns, const DetectorConfig& config,
                             std::string instrument = {}) {
  const auto w1 = wavelet::level1_coefficients(returns, config.filters, config.boundary);
  const auto xi = universal_threshold(w1);
  JumpSeries js;
  if (xi.degenerate) {
    js.sizes.assign(returns.size(), 0.0);
    js.threshold = 0.0;
    js.degenerate = true;
  } else {
    js = detect_jumps(returns, w1, xi.value);
  }
  js.instrument = std::move(instrument);
  return js;
}

inline std::vector<double> adjust_returns(std::span<const double> returns, const JumpSeries& jumps) {
  require(returns.size() == jumps.sizes.size(), "adjust_returns: length mismatch");
  std::vector<double> out(returns.begin(), returns.end());
  for (std::size_t i : jumps.indices) out[i] = 0.0;  // r - r, exactly
  return out;
}

struct CoJumpEvent {
  std::size_t index = 0;
  double size_1 = 0.0;
  double size_2 = 0.0;
};

struct CoJumpEntry {
  double cj = 0.0;
  std::vector<CoJumpEvent> events;
};

inline CoJumpEntry cojump_variation(const JumpSeries& a, const JumpSeries& b) {
  require(a.sizes.size() == b.sizes.size(), "cojump_variation: grid mismatch");
  CoJumpEntry e;
  auto ia = a.indices.begin();
  auto ib = b.indices.begin();
  while (ia != a.indices.end() && ib != b.indices.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      const double x = a.sizes[*ia], y = b.sizes[*ib];
      e.events.push_back({*ia, x, y});
      e.cj += x * y;
      ++ia;
      ++ib;
    }
  }
  return e;
}

inline double realized_covariance(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), "realized_covariance: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

/// d x d co-jump variation matrix (row-major) over one day's jump series.
struct CoJumpMatrix {
  std::vector<std::string> instruments;
  std::vector<double> values;

  double operator()(std::size_t i, std::size_t j) const { return values[i * instruments.size() + j]; }
};

inline CoJumpMatrix cojump_matrix(std::span<const JumpSeries> series) {
  CoJumpMatrix m;
  const std::size_t d = series.size();
  m.values.assign(d * d, 0.0);
  for (const auto& s : series) m.instruments.push_back(s.instrument);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) {
      const double v = cojump_variation(series[i], series[j]).cj;
      m.values[i * d + j] = v;
      m.values[j * d + i] = v;
    }
  return m;
}

}  // namespace cojump::jumps
