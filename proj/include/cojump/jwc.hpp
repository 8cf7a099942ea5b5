#pragma once

// Jump wavelet covariance (JWC) estimator of integrated covariance.
//
//   IC(l1,l2) = sum_{j=1..J+1} c_N * [ IC_G(j) - (nbar_G / n_S) * IC_S(j) ]
//
// IC_G(j) averages, over the G offsets of a spacing-G grid, the scale-j
// wavelet covariance of the returns aggregated on that grid; IC_S(j) is the
// same quantity at the fast spacing S (S = 1 is the plain full-grid wavelet
// covariance). Scale J+1 is the scaling-coefficient term. nbar_G =
// (N-G+1)/G, n_S = (N-S+1)/S.
//
// Offset grids are {0, g, g+G, ..., N}: the partial blocks at both ends are
// kept so every sparse series spans the whole day.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "cojump/error.hpp"
#include "cojump/modwt.hpp"

namespace cojump::jwc {

enum class SlowSpacingRule {
  fixed_two,       // G = 2
  n_two_thirds,    // G = max(2, round(N^(2/3)))
};

struct JwcConfig {
  std::optional<double> c_n;          // nullopt: small-sample factor 1/(1 - nbar_G/n_S)
  int fast_spacing = 1;               // S
  std::optional<int> slow_spacing;    // G; nullopt: apply `slow_rule`
  SlowSpacingRule slow_rule = SlowSpacingRule::fixed_two;
  std::optional<int> levels;          // J^m; nullopt: 4 for N >= 256, else floor(log2 N) - 2
  wavelet::FilterPair filters = wavelet::FilterPair::d4();
  wavelet::Boundary boundary = wavelet::Boundary::reflecting;
};

/// Concrete parameters for a day of N returns.
struct ResolvedConfig {
  std::size_t n = 0;
  int slow = 2;
  int fast = 1;
  int levels = 1;
  double c_n = 1.0;
  double nbar_slow = 0.0;  // (N-G+1)/G
  double n_fast = 0.0;     // (N-S+1)/S
};

inline int default_levels(std::size_t n) {
  if (n >= 256) return 4;
  const int lg = static_cast<int>(std::floor(std::log2(static_cast<double>(n))));
  return std::max(1, lg - 2);
}

inline int slow_spacing(std::size_t n, const JwcConfig& cfg) {
  if (cfg.slow_spacing) return *cfg.slow_spacing;
  if (cfg.slow_rule == SlowSpacingRule::n_two_thirds)
    return std::max(2, static_cast<int>(std::lround(std::pow(static_cast<double>(n), 2.0 / 3.0))));
  return 2;
}

inline ResolvedConfig resolve(std::size_t n, const JwcConfig& cfg) {
  ResolvedConfig r;
  r.n = n;
  r.slow = slow_spacing(n, cfg);
  r.fast = cfg.fast_spacing;
  if (!(1 <= r.fast && r.fast < r.slow && static_cast<std::size_t>(r.slow) <= n))
    fail_config("BadJwcConfig", fmt::format("need 1 <= S < G <= N, got S={} G={} N={}", r.fast, r.slow, n));
  r.levels = cfg.levels.value_or(std::min(default_levels(n), wavelet::max_levels(n, cfg.filters, cfg.boundary)));
  if (r.levels < 1 || r.levels > wavelet::max_levels(n, cfg.filters, cfg.boundary))
    fail_config("BadJwcConfig", fmt::format("decomposition depth {} not supported for N={}", r.levels, n));
  const double nd = static_cast<double>(n);
  r.nbar_slow = (nd - r.slow + 1.0) / r.slow;
  r.n_fast = (nd - r.fast + 1.0) / r.fast;
  if (cfg.c_n) {
    r.c_n = *cfg.c_n;
  } else {
    r.c_n = 1.0 / (1.0 - r.nbar_slow / r.n_fast);
  }
  return r;
}

/// Returns aggregated on the offset grid {0, offset, offset+spacing, ..., N}.
inline std::vector<double> sparse_returns(std::span<const double> returns, int spacing, int offset) {
  require(spacing >= 1 && offset >= 0 && offset < spacing, "sparse_returns: 0 <= offset < spacing");
  const std::size_t n = returns.size();
  std::vector<std::size_t> cuts{0};
  for (std::size_t p = static_cast<std::size_t>(offset); p <= n; p += static_cast<std::size_t>(spacing))
    if (p != 0) cuts.push_back(p);
  if (cuts.back() != n) cuts.push_back(n);
  std::vector<double> out;
  out.reserve(cuts.size() - 1);
  for (std::size_t k = 1; k < cuts.size(); ++k) {
    double s = 0.0;
    for (std::size_t i = cuts[k - 1]; i < cuts[k]; ++i) s += returns[i];
    out.push_back(s);
  }
  return out;
}

/// Plain scale covariance of two aligned coefficient vectors.
inline double wavelet_rc_scale(std::span<const double> w1, std::span<const double> w2) {
  require(w1.size() == w2.size(), "wavelet_rc_scale: length mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < w1.size(); ++k) s += w1[k] * w2[k];
  return s;
}

/// Scale-j covariance between two decompositions of equal shape, over the
/// full extended record (see modwt.hpp). `nominal_levels` is the target
/// depth: j = nominal_levels+1 is the scaling term; scales deeper than a
/// capped decomposition contribute zero (its scaling term holds them).
inline double wavelet_rc_scale(const wavelet::WaveletDecomposition& a, const wavelet::WaveletDecomposition& b, int j,
                               int nominal_levels) {
  require(a.levels == b.levels && a.extended_length() == b.extended_length(), "wavelet_rc_scale: shape mismatch");
  require(j >= 1 && j <= nominal_levels + 1, "wavelet_rc_scale: scale out of range");
  std::span<const double> x, y;
  if (j == nominal_levels + 1) {
    x = a.V_ext;
    y = b.V_ext;
  } else if (j > a.levels) {
    return 0.0;
  } else {
    x = a.W_ext[j - 1];
    y = b.W_ext[j - 1];
  }
  return wavelet_rc_scale(x, y) / a.extension_factor();
}

inline double wavelet_rc_scale(const wavelet::WaveletDecomposition& a, const wavelet::WaveletDecomposition& b, int j) {
  return wavelet_rc_scale(a, b, j, a.levels);
}

/// Per-series transforms at the slow and fast spacings.
struct SeriesTransforms {
  int levels = 0;
  std::vector<wavelet::WaveletDecomposition> slow;  // one per offset
  std::vector<wavelet::WaveletDecomposition> fast;
};

inline std::vector<wavelet::WaveletDecomposition> transform_offsets(std::span<const double> returns, int spacing,
                                                                     int levels, const JwcConfig& cfg) {
  if (spacing < 1 || static_cast<std::size_t>(spacing) > returns.size())
    fail_numerical("SparseGridTooShort", fmt::format("spacing {} leaves fewer than 2 grid points", spacing));
  std::vector<wavelet::WaveletDecomposition> out;
  out.reserve(static_cast<std::size_t>(spacing));
  for (int g = 0; g < spacing; ++g) {
    auto sparse = spacing == 1 ? std::vector<double>(returns.begin(), returns.end())
                               : sparse_returns(returns, spacing, g);
    if (sparse.size() < 2)
      fail_numerical("SparseGridTooShort", fmt::format("spacing {} leaves fewer than 2 grid points", spacing));
    const int depth = std::min(levels, wavelet::max_levels(sparse.size(), cfg.filters, cfg.boundary));
    if (depth < 1)
      fail_numerical("SparseGridTooShort", fmt::format("spacing {} grid too short for {}", spacing, cfg.filters.name()));
    out.push_back(wavelet::modwt_forward(sparse, cfg.filters, depth, cfg.boundary));
  }
  return out;
}

inline SeriesTransforms transform_series(std::span<const double> returns, const ResolvedConfig& rc,
                                         const JwcConfig& cfg) {
  SeriesTransforms t;
  t.levels = rc.levels;
  t.slow = transform_offsets(returns, rc.slow, rc.levels, cfg);
  t.fast = transform_offsets(returns, rc.fast, rc.levels, cfg);
  return t;
}

inline double averaged_scale(const std::vector<wavelet::WaveletDecomposition>& a,
                             const std::vector<wavelet::WaveletDecomposition>& b, int j, int levels) {
  require(a.size() == b.size() && !a.empty(), "averaged_scale: offset count mismatch");
  double s = 0.0;
  for (std::size_t g = 0; g < a.size(); ++g) s += wavelet_rc_scale(a[g], b[g], j, levels);
  return s / static_cast<double>(a.size());
}

/// Subsampled scale-j covariance IC_G(j) of two return series.
inline double wavelet_rc_subsampled(std::span<const double> x, std::span<const double> y, int j, int spacing,
                                    int levels, const JwcConfig& cfg) {
  require(x.size() == y.size(), "wavelet_rc_subsampled: length mismatch");
  const auto a = transform_offsets(x, spacing, levels, cfg);
  const auto b = transform_offsets(y, spacing, levels, cfg);
  return averaged_scale(a, b, j, levels);
}

/// The bracket IC_G(j) - (nbar_G/n_S) IC_S(j) for arbitrary G, S >= 1.
inline double two_scale_bracket(std::span<const double> x, std::span<const double> y, int j, int slow, int fast,
                                int levels, const JwcConfig& cfg) {
  const double n = static_cast<double>(x.size());
  const double ratio = ((n - slow + 1.0) / slow) / ((n - fast + 1.0) / fast);
  return wavelet_rc_subsampled(x, y, j, slow, levels, cfg) - ratio * wavelet_rc_subsampled(x, y, j, fast, levels, cfg);
}

/// JWC entry for one pair from precomputed transforms.
inline double jwc_entry(const SeriesTransforms& a, const SeriesTransforms& b, const ResolvedConfig& rc) {
  const double ratio = rc.nbar_slow / rc.n_fast;
  double total = 0.0;
  for (int j = 1; j <= rc.levels + 1; ++j) {
    const double slow = averaged_scale(a.slow, b.slow, j, rc.levels);
    const double fast = averaged_scale(a.fast, b.fast, j, rc.levels);
    total += rc.c_n * (slow - ratio * fast);
  }
  return total;
}

inline double jwc_pair(std::span<const double> x, std::span<const double> y, const JwcConfig& cfg) {
  require(x.size() == y.size(), "jwc_pair: length mismatch");
  const auto rc = resolve(x.size(), cfg);
  return jwc_entry(transform_series(x, rc, cfg), transform_series(y, rc, cfg), rc);
}

struct IcMatrix {
  std::vector<std::string> instruments;
  std::vector<double> values;          // row-major d x d
  std::vector<bool> diagonal_floored;  // per instrument
  ResolvedConfig config;

  std::size_t dimension() const { return instruments.size(); }
  double operator()(std::size_t i, std::size_t j) const { return values[i * dimension() + j]; }
};

/// Integrated covariance matrix of jump-adjusted returns (one series per
/// instrument). Symmetric by construction; negative variances floored at 0.
inline IcMatrix jwc_integrated_covariance(std::span<const std::vector<double>> adjusted,
                                          std::span<const std::string> instruments, const JwcConfig& cfg) {
  require(adjusted.size() == instruments.size() && !adjusted.empty(), "jwc_integrated_covariance: one series per instrument");
  const std::size_t n = adjusted.front().size();
  for (const auto& s : adjusted) require(s.size() == n, "jwc_integrated_covariance: ragged panel");
  IcMatrix m;
  m.instruments.assign(instruments.begin(), instruments.end());
  m.config = resolve(n, cfg);
  std::vector<SeriesTransforms> t;
  t.reserve(adjusted.size());
  for (const auto& s : adjusted) t.push_back(transform_series(s, m.config, cfg));
  const std::size_t d = adjusted.size();
  m.values.assign(d * d, 0.0);
  m.diagonal_floored.assign(d, false);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) {
      double v = jwc_entry(t[i], t[j], m.config);
      if (i == j && v < 0.0) {
        v = 0.0;
        m.diagonal_floored[i] = true;
      }
      m.values[i * d + j] = v;
      m.values[j * d + i] = v;
    }
  return m;
}

struct Correlation {
  std::optional<double> value;  // nullopt when a variance is not positive
  bool clamped = false;
};

inline Correlation correlation_from(double var1, double cov, double var2) {
  Correlation c;
  if (!(var1 > 0.0) || !(var2 > 0.0)) return c;
  double r = cov / std::sqrt(var1 * var2);
  if (r > 1.0 || r < -1.0) {
    r = std::clamp(r, -1.0, 1.0);
    c.clamped = true;
  }
  c.value = r;
  return c;
}

/// Correlation matrix implied by an IC matrix, row-major.
inline std::vector<Correlation> continuous_correlation(const IcMatrix& ic) {
  const std::size_t d = ic.dimension();
  std::vector<Correlation> out(d * d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = correlation_from(ic(i, i), ic(i, j), ic(j, j));
  return out;
}

}  // namespace cojump::jwc
