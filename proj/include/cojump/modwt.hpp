#pragma once

// Maximal overlap discrete wavelet transform (pyramid algorithm).
//
// Level j filters the level j-1 scaling coefficients with the unit filters
// upsampled by 2^(j-1):
//   W[j][t] = sum_l h[l] * V[j-1][(t - 2^(j-1) l) mod M]
//   V[j][t] = sum_l g[l] * V[j-1][(t - 2^(j-1) l) mod M]
// with V[0] = x. M = N for circular filtering; for the reflecting boundary
// the series is first extended to x_0..x_{N-1}, x_{N-1}..x_0 (M = 2N).
//
// The full length-M coefficient vectors are kept. Energy and covariance
// sums over them, divided by M/N, decompose sum_t x_t^2 exactly for both
// boundaries; the W/V accessors expose the first N coefficients, which line
// up with the input.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "cojump/csv.hpp"
#include "cojump/error.hpp"

namespace cojump::wavelet {

enum class Boundary { circular, reflecting };

inline const char* to_string(Boundary b) { return b == Boundary::circular ? "circular" : "reflecting"; }

inline Boundary parse_boundary(std::string_view s) {
  if (s == "circular" || s == "periodic") return Boundary::circular;
  if (s == "reflecting" || s == "reflection") return Boundary::reflecting;
  fail_config("BadBoundary", fmt::format("unknown boundary '{}'", s));
}

/// Residuals of the MODWT filter-bank identities.
struct FilterIdentities {
  double wavelet_sum;       // sum h - 0
  double scaling_sum;       // sum g - 1
  double wavelet_energy;    // sum h^2 - 1/2
  double scaling_energy;    // sum g^2 - 1/2
  double even_shift;        // max_n!=0 |sum_l h_l h_{l+2n}|

  double worst() const {
    return std::max({std::abs(wavelet_sum), std::abs(scaling_sum), std::abs(wavelet_energy),
                     std::abs(scaling_energy), std::abs(even_shift)});
  }
};

inline FilterIdentities check_identities(std::span<const double> h, std::span<const double> g) {
  FilterIdentities r{};
  r.wavelet_sum = std::accumulate(h.begin(), h.end(), 0.0);
  r.scaling_sum = std::accumulate(g.begin(), g.end(), 0.0) - 1.0;
  r.wavelet_energy = std::inner_product(h.begin(), h.end(), h.begin(), 0.0) - 0.5;
  r.scaling_energy = std::inner_product(g.begin(), g.end(), g.begin(), 0.0) - 0.5;
  r.even_shift = 0.0;
  const std::size_t L = h.size();
  for (std::size_t n = 1; 2 * n < L; ++n) {
    double s = 0.0;
    for (std::size_t l = 0; l + 2 * n < L; ++l) s += h[l] * h[l + 2 * n];
    r.even_shift = std::max(r.even_shift, std::abs(s));
  }
  return r;
}

/// Index at which the level-j wavelet response to a unit step peaks in
/// magnitude; this is how far coefficients lag an isolated level shift.
inline int step_response_peak(std::span<const double> filter) {
  double acc = 0.0, best = -1.0;
  int arg = 0;
  for (std::size_t l = 0; l < filter.size(); ++l) {
    acc += filter[l];
    if (std::abs(acc) > best + 1e-15) {
      best = std::abs(acc);
      arg = static_cast<int>(l);
    }
  }
  return arg;
}

/// MODWT-scaled wavelet/scaling filter pair. Construction verifies the
/// filter-bank identities to 1e-12.
class FilterPair {
 public:
  /// Builds the pair from MODWT scaling coefficients; the wavelet filter is
  /// the quadrature mirror h_l = (-1)^l g_{L-1-l}.
  FilterPair(std::string name, std::vector<double> scaling) : name_(std::move(name)), g_(std::move(scaling)) {
    require(g_.size() >= 2 && g_.size() % 2 == 0, "FilterPair: even filter width >= 2");
    const std::size_t L = g_.size();
    h_.resize(L);
    for (std::size_t l = 0; l < L; ++l) h_[l] = (l % 2 == 0 ? 1.0 : -1.0) * g_[L - 1 - l];
    const auto id = check_identities(h_, g_);
    if (id.worst() > 1e-12)
      fail_numerical("BadFilter", fmt::format("filter {} violates MODWT identities (residual {})", name_, id.worst()));
    alignment_shift_ = step_response_peak(h_);
  }

  static FilterPair haar() { return FilterPair("haar", {0.5, 0.5}); }

  /// Extremal-phase Daubechies D(4): DWT scaling coefficients divided by sqrt(2).
  static FilterPair d4() {
    const double s3 = std::sqrt(3.0);
    return FilterPair("d4", {(1.0 + s3) / 8.0, (3.0 + s3) / 8.0, (3.0 - s3) / 8.0, (1.0 - s3) / 8.0});
  }

  static FilterPair by_name(std::string_view name) {
    if (name == "haar") return haar();
    if (name == "d4" || name == "D4") return d4();
    fail_config("BadFilter", fmt::format("unknown wavelet filter '{}'", name));
  }

  const std::string& name() const noexcept { return name_; }
  std::span<const double> wavelet() const noexcept { return h_; }
  std::span<const double> scaling() const noexcept { return g_; }
  std::size_t width() const noexcept { return h_.size(); }
  /// Level-1 step-response lag (0 for Haar, 2 for D(4)).
  int alignment_shift() const noexcept { return alignment_shift_; }

  /// L_j = 2^(j-1)(L-1)+1.
  std::size_t level_width(int level) const { return (std::size_t{1} << (level - 1)) * (width() - 1) + 1; }

 private:
  std::string name_;
  std::vector<double> g_;
  std::vector<double> h_;
  int alignment_shift_ = 0;
};

/// Level-j equivalent wavelet filter (width 2^(j-1)(L-1)+1).
inline std::vector<double> equivalent_wavelet_filter(std::span<const double> h, std::span<const double> g,
                                                     int level) {
  require(level >= 1, "equivalent_wavelet_filter: level >= 1");
  std::vector<double> scaling{1.0};
  auto convolve_upsampled = [](const std::vector<double>& a, std::span<const double> f, std::size_t stride) {
    std::vector<double> out(a.size() + stride * (f.size() - 1), 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t l = 0; l < f.size(); ++l) out[i + stride * l] += a[i] * f[l];
    return out;
  };
  for (int j = 1; j < level; ++j) scaling = convolve_upsampled(scaling, g, std::size_t{1} << (j - 1));
  return convolve_upsampled(scaling, h, std::size_t{1} << (level - 1));
}

struct WaveletDecomposition {
  int levels = 0;
  std::size_t length = 0;  // N
  Boundary boundary = Boundary::reflecting;
  std::vector<std::vector<double>> W_ext;  // levels x M
  std::vector<double> V_ext;               // M
  std::vector<int> alignment_shift;        // per level

  std::size_t extended_length() const { return V_ext.size(); }
  double extension_factor() const { return static_cast<double>(extended_length()) / static_cast<double>(length); }

  /// Wavelet coefficients at level j (1-based), first N entries.
  std::span<const double> W(int j) const { return std::span<const double>(W_ext.at(j - 1)).first(length); }
  std::span<const double> V() const { return std::span<const double>(V_ext).first(length); }

  /// Coefficients of scale j in 1..levels+1 over the full extended record;
  /// j = levels+1 is the scaling vector.
  std::span<const double> scale_ext(int j) const {
    return j == levels + 1 ? std::span<const double>(V_ext) : std::span<const double>(W_ext.at(j - 1));
  }

  double energy() const {
    double e = 0.0;
    for (int j = 1; j <= levels + 1; ++j) {
      auto c = scale_ext(j);
      e += std::inner_product(c.begin(), c.end(), c.begin(), 0.0);
    }
    return e / extension_factor();
  }
};

inline int max_levels(std::size_t n, const FilterPair& filters, Boundary boundary) {
  const std::size_t m = boundary == Boundary::reflecting ? 2 * n : n;
  int j = 0;
  while ((std::size_t{1} << (j + 1)) <= n && filters.level_width(j + 1) <= m) ++j;
  return j;
}

inline WaveletDecomposition modwt_forward(std::span<const double> x, const FilterPair& filters, int levels,
                                          Boundary boundary) {
  const std::size_t n = x.size();
  if (n < 2) fail_numerical("SeriesTooShort", "MODWT needs at least 2 observations");
  if (levels < 1 || (std::size_t{1} << levels) > n)
    fail_numerical("BadDepth", fmt::format("MODWT depth {} outside 1..floor(log2({}))", levels, n));
  const std::size_t m = boundary == Boundary::reflecting ? 2 * n : n;
  if (filters.level_width(levels) > m)
    fail_numerical("SeriesTooShort",
                   fmt::format("level-{} {} filter width {} exceeds {} points", levels, filters.name(),
                               filters.level_width(levels), m));

  WaveletDecomposition d;
  d.levels = levels;
  d.length = n;
  d.boundary = boundary;
  std::vector<double> v(m);
  std::copy(x.begin(), x.end(), v.begin());
  if (boundary == Boundary::reflecting) std::copy(x.rbegin(), x.rend(), v.begin() + static_cast<std::ptrdiff_t>(n));

  const auto h = filters.wavelet();
  const auto g = filters.scaling();
  const std::size_t L = filters.width();
  std::vector<double> next(m);
  d.W_ext.reserve(levels);
  for (int j = 1; j <= levels; ++j) {
    const std::size_t stride = std::size_t{1} << (j - 1);
    std::vector<double> w(m, 0.0);
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t l = 0; l < L; ++l) {
      const std::size_t shift = (stride * l) % m;
      const double hl = h[l], gl = g[l];
      // t - shift without wrap for t >= shift, wrapped otherwise.
      for (std::size_t t = 0; t < shift; ++t) {
        const double vt = v[t + m - shift];
        w[t] += hl * vt;
        next[t] += gl * vt;
      }
      for (std::size_t t = shift; t < m; ++t) {
        const double vt = v[t - shift];
        w[t] += hl * vt;
        next[t] += gl * vt;
      }
    }
    d.W_ext.push_back(std::move(w));
    d.alignment_shift.push_back(step_response_peak(equivalent_wavelet_filter(h, g, j)));
    v.swap(next);
  }
  d.V_ext = std::move(v);
  return d;
}

/// Level-1 wavelet coefficients of the cumulative path of `returns`
/// (P_0 = 0, P_t = r_0 + ... + r_{t-1}), advanced by the filter's alignment
/// shift so that entry k peaks when return k carries an isolated jump.
inline std::vector<double> level1_coefficients(std::span<const double> returns, const FilterPair& filters,
                                               Boundary boundary) {
  const std::size_t n = returns.size();
  if (n < filters.width()) fail_numerical("SeriesTooShort", "series shorter than the wavelet filter");
  std::vector<double> path(n + 1, 0.0);
  for (std::size_t t = 0; t < n; ++t) path[t + 1] = path[t] + returns[t];
  const auto d = modwt_forward(path, filters, 1, boundary);
  const auto& w = d.W_ext.front();
  const std::size_t m = w.size();
  std::vector<double> aligned(n);
  const std::size_t offset = 1 + static_cast<std::size_t>(filters.alignment_shift());
  for (std::size_t k = 0; k < n; ++k) aligned[k] = w[(k + offset) % m];
  return aligned;
}

/// Debug dump: level (1..J wavelet, J+1 scaling), index, value over the first N.
inline void write_coefficients(const std::filesystem::path& path, const WaveletDecomposition& d) {
  csv::Writer out(path);
  out.row({"level", "index", "value"});
  for (int j = 1; j <= d.levels + 1; ++j) {
    auto c = d.scale_ext(j).first(d.length);
    for (std::size_t t = 0; t < c.size(); ++t) out.row({std::to_string(j), std::to_string(t), csv::num(c[t])});
  }
  out.close();
}

}  // namespace cojump::wavelet
