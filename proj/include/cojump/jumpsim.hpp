#pragma once

// Correlated jump-diffusion simulator with i.i.d. observation noise.
//
// Latent return i of instrument l:  mu_l + sigma_l * w_i * sqrt(1/N) * eps_{i,l}
// with eps equicorrelated at rho (Cholesky factor), w the intraday pattern
// (mean w^2 = 1, so sigma_l^2 is the daily integrated variance). Jumps are
// added at fixed indices; observed prices add noise u_t, so observed returns
// carry u_{i+1} - u_i.
//
// Scenario file: one `key = value` per line, '#' comments. Keys:
//   instruments  comma list (required)
//   intervals    N
//   days, start_date (YYYY-MM-DD, weekends skipped), session_start, sampling_interval, timezone
//   mu, sigma, noise_sd   one value or one per instrument
//   rho          equicorrelation
//   pattern      flat | ushape
//   seed
//   jump         day, index, size_1, ..., size_d   (repeatable)

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "cojump/csv.hpp"
#include "cojump/error.hpp"
#include "cojump/market_data.hpp"
#include "cojump/rng.hpp"

namespace cojump::sim {

enum class Pattern { flat, ushape };

struct JumpSpec {
  int day = 0;
  std::size_t index = 0;
  std::vector<double> sizes;  // one per instrument, zero for no jump
};

struct SimScenario {
  std::vector<std::string> instruments{"A", "B"};
  std::size_t intervals = 540;
  int days = 1;
  market::Date start_date{2020, 1, 2};
  market::TimeOfDay session_start{7 * 3600};
  int sampling_interval = 60;
  std::string timezone = "UTC";
  std::vector<double> mu{0.0};
  std::vector<double> sigma{0.01};     // daily scale
  std::vector<double> noise_sd{0.0};
  double rho = 0.0;
  Pattern pattern = Pattern::flat;
  std::vector<JumpSpec> jumps;
  std::uint64_t seed = 0;

  std::size_t dimension() const { return instruments.size(); }

  /// Per-instrument value of a broadcastable parameter.
  static double at(const std::vector<double>& v, std::size_t l) { return v.size() == 1 ? v[0] : v.at(l); }

  void validate() const {
    const std::size_t d = dimension();
    if (d == 0) fail_config("BadScenario", "scenario needs at least one instrument");
    if (intervals < 2) fail_config("BadScenario", "N must be >= 2");
    if (days < 1) fail_config("BadScenario", "days must be >= 1");
    if (sampling_interval <= 0) fail_config("BadScenario", "sampling interval must be positive");
    for (const auto* v : {&mu, &sigma, &noise_sd})
      if (v->size() != 1 && v->size() != d)
        fail_config("BadScenario", "mu/sigma/noise_sd need one value or one per instrument");
    for (std::size_t l = 0; l < d; ++l) {
      if (!(at(sigma, l) >= 0.0) || !std::isfinite(at(sigma, l))) fail_config("BadScenario", "sigma must be finite, >= 0");
      if (!(at(noise_sd, l) >= 0.0) || !std::isfinite(at(noise_sd, l)))
        fail_config("BadScenario", "noise_sd must be finite, >= 0");
      if (!std::isfinite(at(mu, l))) fail_config("BadScenario", "mu must be finite");
    }
    if (!(std::abs(rho) <= 1.0)) fail_config("BadScenario", fmt::format("|rho| must be <= 1, got {}", rho));
    if (d > 1 && rho < -1.0 / static_cast<double>(d - 1))
      fail_config("BadScenario", fmt::format("rho {} is not a valid equicorrelation for {} instruments", rho, d));
    for (const auto& j : jumps) {
      if (j.day < 0 || j.day >= days || j.index >= intervals)
        fail_config("BadScenario", fmt::format("jump at day {} index {} outside the simulation", j.day, j.index));
      if (j.sizes.size() != d) fail_config("BadScenario", "jump needs one size per instrument");
      for (double s : j.sizes)
        if (!std::isfinite(s)) fail_config("BadScenario", "jump sizes must be finite");
    }
  }
};

struct SimDay {
  market::Date date;
  int day = 0;
  std::vector<std::vector<double>> observed;  // d x N
  std::vector<std::vector<double>> latent;    // continuous part, d x N
  std::vector<std::vector<double>> jumps;     // d x N
  std::vector<double> true_ic;                // d x d row-major
  std::vector<double> true_cj;                // d x d row-major
};

/// Intraday volatility weights with mean square 1.
inline std::vector<double> pattern_weights(Pattern p, std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (p == Pattern::flat) return w;
  double ms = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = (static_cast<double>(i) + 0.5) / static_cast<double>(n) * 2.0 - 1.0;
    w[i] = 1.0 + 1.5 * u * u;
    ms += w[i] * w[i];
  }
  ms /= static_cast<double>(n);
  for (double& v : w) v /= std::sqrt(ms);
  return w;
}

/// Lower Cholesky factor of the d x d equicorrelation matrix; tolerates the
/// semidefinite edge (rho = 1 or -1/(d-1)).
inline std::vector<double> equicorrelation_factor(std::size_t d, double rho) {
  std::vector<double> a(d * d), c(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) a[i * d + j] = i == j ? 1.0 : rho;
  for (std::size_t j = 0; j < d; ++j) {
    double s = a[j * d + j];
    for (std::size_t k = 0; k < j; ++k) s -= c[j * d + k] * c[j * d + k];
    const double diag = std::sqrt(std::max(0.0, s));
    c[j * d + j] = diag;
    for (std::size_t i = j + 1; i < d; ++i) {
      double t = a[i * d + j];
      for (std::size_t k = 0; k < j; ++k) t -= c[i * d + k] * c[j * d + k];
      c[i * d + j] = diag > 1e-12 ? t / diag : 0.0;
    }
  }
  return c;
}

/// Trading date of simulated day k: start_date advanced over weekdays.
inline market::Date sim_date(const market::Date& start, int k) {
  market::Date d = start;
  auto weekend = [](market::Date x) {
    const auto w = absl::GetWeekday(x);
    return w == absl::Weekday::saturday || w == absl::Weekday::sunday;
  };
  while (weekend(d)) ++d;
  for (int i = 0; i < k; ++i) {
    ++d;
    while (weekend(d)) ++d;
  }
  return d;
}

/// One day; day k draws from child stream k of the scenario seed.
inline SimDay simulate_day(const SimScenario& s, int k) {
  const std::size_t d = s.dimension(), n = s.intervals;
  const auto w = pattern_weights(s.pattern, n);
  const auto chol = equicorrelation_factor(d, s.rho);
  Rng rng(child_seed(s.seed, static_cast<std::uint64_t>(k)));
  SimDay day;
  day.day = k;
  day.date = sim_date(s.start_date, k);
  day.latent.assign(d, std::vector<double>(n));
  day.jumps.assign(d, std::vector<double>(n, 0.0));
  day.observed.assign(d, std::vector<double>(n));
  const double dt = 1.0 / static_cast<double>(n);
  std::vector<double> eta(d), eps(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& e : eta) e = rng.normal();
    for (std::size_t l = 0; l < d; ++l) {
      double v = 0.0;
      for (std::size_t m = 0; m <= l; ++m) v += chol[l * d + m] * eta[m];
      day.latent[l][i] = SimScenario::at(s.mu, l) + SimScenario::at(s.sigma, l) * w[i] * std::sqrt(dt) * v;
    }
  }
  for (const auto& j : s.jumps)
    if (j.day == k)
      for (std::size_t l = 0; l < d; ++l) day.jumps[l][j.index] += j.sizes[l];
  for (std::size_t l = 0; l < d; ++l) {
    const double sd = SimScenario::at(s.noise_sd, l);
    double prev = sd > 0.0 ? sd * rng.normal() : 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double next = sd > 0.0 ? sd * rng.normal() : 0.0;
      day.observed[l][i] = day.latent[l][i] + day.jumps[l][i] + (next - prev);
      prev = next;
    }
  }
  day.true_ic.assign(d * d, 0.0);
  day.true_cj.assign(d * d, 0.0);
  double wsum = 0.0;
  for (double v : w) wsum += v * v * dt;
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < d; ++b) {
      const double corr = a == b ? 1.0 : s.rho;
      day.true_ic[a * d + b] = corr * SimScenario::at(s.sigma, a) * SimScenario::at(s.sigma, b) * wsum;
      double cj = 0.0;
      for (std::size_t i = 0; i < n; ++i) cj += day.jumps[a][i] * day.jumps[b][i];
      day.true_cj[a * d + b] = cj;
    }
  return day;
}

inline std::vector<SimDay> simulate(const SimScenario& s) {
  s.validate();
  std::vector<SimDay> out;
  out.reserve(static_cast<std::size_t>(s.days));
  for (int k = 0; k < s.days; ++k) out.push_back(simulate_day(s, k));
  return out;
}

struct TrueDecomposition {
  std::vector<double> ic, cj, qv;  // d x d row-major
};

inline TrueDecomposition true_decomposition(const SimDay& day) {
  TrueDecomposition t{day.true_ic, day.true_cj, day.true_ic};
  for (std::size_t i = 0; i < t.qv.size(); ++i) t.qv[i] += t.cj[i];
  return t;
}

// ---------------------------------------------------------------------------
// Scenario files

inline std::vector<double> parse_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  for (const auto& f : csv::split(value)) {
    const auto v = csv::parse_double(f);
    if (!v) fail_config("BadScenario", fmt::format("'{}': cannot parse number '{}'", key, f));
    out.push_back(*v);
  }
  return out;
}

inline SimScenario parse_scenario_text(const std::string& text) {
  SimScenario s;
  std::size_t pos = 0;
  int line_no = 0;
  while (pos <= text.size()) {
    const std::size_t eol = std::min(text.find('\n', pos), text.size());
    std::string_view line = csv::trim(std::string_view(text).substr(pos, eol - pos));
    pos = eol + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail_config("BadScenario", fmt::format("line {}: expected key = value", line_no));
    const std::string key(csv::trim(line.substr(0, eq)));
    const std::string value(csv::trim(line.substr(eq + 1)));
    auto integer = [&](long lo) {
      const auto v = csv::parse_int(value);
      if (!v || *v < lo) fail_config("BadScenario", fmt::format("line {}: bad integer for '{}'", line_no, key));
      return *v;
    };
    if (key == "instruments") {
      s.instruments.clear();
      for (const auto& f : csv::split(value)) s.instruments.emplace_back(csv::trim(f));
    } else if (key == "intervals") {
      s.intervals = static_cast<std::size_t>(integer(0));
    } else if (key == "days") {
      s.days = static_cast<int>(integer(0));
    } else if (key == "start_date") {
      if (!absl::ParseCivilTime(value, &s.start_date)) fail_config("BadScenario", "bad start_date '" + value + "'");
    } else if (key == "session_start") {
      s.session_start = market::parse_time_of_day(value);
    } else if (key == "sampling_interval") {
      s.sampling_interval = static_cast<int>(integer(1));
    } else if (key == "timezone") {
      s.timezone = value;
    } else if (key == "mu") {
      s.mu = parse_list(key, value);
    } else if (key == "sigma") {
      s.sigma = parse_list(key, value);
    } else if (key == "noise_sd") {
      s.noise_sd = parse_list(key, value);
    } else if (key == "rho") {
      s.rho = parse_list(key, value).at(0);
    } else if (key == "pattern") {
      if (value == "flat") s.pattern = Pattern::flat;
      else if (value == "ushape") s.pattern = Pattern::ushape;
      else fail_config("BadScenario", "pattern must be flat or ushape");
    } else if (key == "seed") {
      s.seed = static_cast<std::uint64_t>(integer(0));
    } else if (key == "jump") {
      const auto v = parse_list(key, value);
      if (v.size() < 3) fail_config("BadScenario", fmt::format("line {}: jump = day, index, sizes...", line_no));
      JumpSpec j;
      j.day = static_cast<int>(v[0]);
      j.index = static_cast<std::size_t>(v[1]);
      j.sizes.assign(v.begin() + 2, v.end());
      s.jumps.push_back(std::move(j));
    } else {
      fail_config("BadScenario", fmt::format("line {}: unknown key '{}'", line_no, key));
    }
  }
  s.validate();
  return s;
}

inline SimScenario read_scenario(const std::filesystem::path& path) {
  return parse_scenario_text(csv::read_file(path));
}

/// Observed returns as a market-data panel (grid labels from the scenario's session).
inline market::ReturnPanel to_panel(const SimScenario& s, const SimDay& day) {
  market::ReturnPanel p;
  p.date = day.date;
  p.instruments = s.instruments;
  p.returns = day.observed;
  for (std::size_t i = 0; i <= s.intervals; ++i)
    p.grid_times.push_back(market::TimeOfDay{s.session_start.seconds + static_cast<int>(i) * s.sampling_interval});
  return p;
}

/// date, instrument_1, instrument_2, IC, CJ, QV for every ordered pair i <= j.
inline void write_truth(const std::filesystem::path& path, const SimScenario& s, std::span<const SimDay> days) {
  csv::Writer out(path);
  out.row({"date", "instrument_1", "instrument_2", "IC", "CJ", "QV"});
  const std::size_t d = s.dimension();
  for (const auto& day : days) {
    const auto t = true_decomposition(day);
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = a; b < d; ++b)
        out.row({market::format_date(day.date), s.instruments[a], s.instruments[b], csv::num(t.ic[a * d + b]),
                 csv::num(t.cj[a * d + b]), csv::num(t.qv[a * d + b])});
  }
  out.close();
}

}  // namespace cojump::sim
