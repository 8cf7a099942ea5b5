#pragma once

// Pipeline stages behind the command-line tool. Every stage reads and writes
// files under the output directory, so each can be rerun on its own:
//
//   ingest     ticks -> panels/panel_<date>.csv, drop_log.csv, backfill_log.csv
//   simulate   scenario -> panels/..., truth.csv
//   decompose  panels -> jumps.csv, ic_matrix.csv, tests.csv, decomposition.csv,
//              cojumps.csv, failed_days.csv
//   report     decomposition.csv + cojumps.csv -> table3..6, histogram, manifest.json

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "cojump/cojump_test.hpp"
#include "cojump/csv.hpp"
#include "cojump/error.hpp"
#include "cojump/event_analysis.hpp"
#include "cojump/jump_detect.hpp"
#include "cojump/jumpsim.hpp"
#include "cojump/jwc.hpp"
#include "cojump/market_data.hpp"
#include "cojump/parallel.hpp"
#include "cojump/rng.hpp"

namespace cojump::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

struct TickSource {
  fs::path path;
  market::TickSchema schema;
};

struct RunConfig {
  json raw;  // as loaded, after overrides
  fs::path base_dir;
  market::SessionSpec session;
  std::vector<std::string> instruments;
  std::vector<TickSource> ticks;
  market::TradingCalendar calendar;
  std::optional<events::AnnouncementCalendar> announcements;
  jwc::JwcConfig jwc;
  jumps::DetectorConfig detector;
  test::BootstrapConfig bootstrap;
  std::vector<std::vector<std::string>> pairs;
  std::vector<std::vector<std::string>> tuples;
  int histogram_bin_minutes = 30;
  std::optional<fs::path> scenario;
  fs::path output = "out";
  std::optional<fs::path> panels_dir;
  unsigned jobs = 1;

  fs::path panels() const { return panels_dir.value_or(output / "panels"); }

  /// Pairs followed by larger tuples, as tested groups.
  std::vector<std::vector<std::string>> groups() const {
    auto g = pairs;
    g.insert(g.end(), tuples.begin(), tuples.end());
    return g;
  }
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha;
  std::optional<int> replications;
  std::optional<unsigned> jobs;
  std::optional<fs::path> output;
};

inline std::string group_name(const std::vector<std::string>& members) {
  std::string s;
  for (std::size_t i = 0; i < members.size(); ++i) s += (i ? " - " : "") + members[i];
  return s;
}

namespace detail {

inline void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) fail_config("BadConfig", where + " must be an object");
  for (const auto& [k, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) fail_config("BadConfig", fmt::format("unknown key '{}' in {}", k, where));
  }
}

template <class T>
T get(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    fail_config("BadConfig", fmt::format("'{}' in {} has the wrong type", key, where));
  }
}

inline fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path q(p);
  return q.is_absolute() ? q : base / q;
}

inline market::TickSchema parse_schema(const json& j, market::TickSchema s) {
  check_keys(j, {"timestamp_column", "price_column", "volume_column", "instrument_column", "instrument",
                 "timestamp_format", "timezone", "delimiter"},
             "tick_schema");
  s.timestamp_column = get(j, "timestamp_column", s.timestamp_column, "tick_schema");
  s.price_column = get(j, "price_column", s.price_column, "tick_schema");
  s.volume_column = get(j, "volume_column", s.volume_column, "tick_schema");
  s.instrument_column = get(j, "instrument_column", s.instrument_column, "tick_schema");
  s.instrument = get(j, "instrument", s.instrument, "tick_schema");
  s.timestamp_format = get(j, "timestamp_format", s.timestamp_format, "tick_schema");
  s.timezone = get(j, "timezone", s.timezone, "tick_schema");
  const auto delim = get<std::string>(j, "delimiter", std::string(1, s.delimiter), "tick_schema");
  if (delim.size() != 1) fail_config("BadConfig", "tick_schema.delimiter must be one character");
  s.delimiter = delim[0];
  return s;
}

inline std::vector<std::vector<std::string>> parse_groups(const json& j, const char* key, std::size_t min_size) {
  std::vector<std::vector<std::string>> out;
  if (!j.contains(key)) return out;
  if (!j.at(key).is_array()) fail_config("BadConfig", fmt::format("'{}' must be a list of instrument lists", key));
  for (const auto& g : j.at(key)) {
    std::vector<std::string> members;
    try {
      members = g.get<std::vector<std::string>>();
    } catch (const json::exception&) {
      fail_config("BadConfig", fmt::format("'{}' entries must be lists of instrument names", key));
    }
    if (members.size() < min_size) fail_config("BadConfig", fmt::format("'{}' entries need >= {} members", key, min_size));
    out.push_back(std::move(members));
  }
  return out;
}

inline events::AnnouncementCalendar parse_announcements(const json& j, const fs::path& base) {
  check_keys(j, {"file", "events", "timezone", "default_time", "windows"}, "announcements");
  events::AnnouncementCalendar cal;
  cal.timezone = get<std::string>(j, "timezone", "UTC", "announcements");
  market::load_zone(cal.timezone);
  if (j.contains("default_time"))
    cal.default_time = market::parse_time_of_day(j.at("default_time").get<std::string>());
  auto add = [&](const std::string& date, const std::string& time) {
    cal.events[market::parse_date(date)].push_back(market::parse_time_of_day(time));
  };
  if (j.contains("file")) {
    const fs::path p = resolve(base, j.at("file").get<std::string>());
    if (!fs::exists(p)) fail_io("MissingFile", "announcement file not found: " + p.string(), p.string());
    const auto t = csv::read(p);
    const auto dc = t.require_column("date", p.string());
    const auto tc = t.require_column("time", p.string());
    for (const auto& row : t.rows) {
      if (row.size() <= std::max(dc, tc)) fail_io("BadCalendar", "ragged row in " + p.string(), p.string());
      add(row[dc], row[tc]);
    }
  }
  if (j.contains("events"))
    for (const auto& e : j.at("events")) add(e.at("date").get<std::string>(), e.at("time").get<std::string>());
  if (j.contains("windows")) {
    for (const auto& w : j.at("windows")) {
      if (!w.is_array() || w.size() != 2) fail_config("BadCalendar", "windows are [start_minutes, end_minutes] pairs");
      cal.windows.push_back({w[0].get<int>(), w[1].get<int>()});
    }
  } else {
    cal.windows.push_back({0, 30});
  }
  for (auto& [_, times] : cal.events) std::sort(times.begin(), times.end());
  cal.validate();
  return cal;
}

}  // namespace detail

inline RunConfig parse_config(json j, const fs::path& base_dir, const Overrides& ov = {}) {
  using detail::get;
  detail::check_keys(j, {"session", "instruments", "ticks", "tick_schema", "calendar", "announcements", "jwc",
                         "detector", "bootstrap", "pairs", "tuples", "histogram_bin_minutes", "scenario", "output",
                         "panels", "jobs"},
                     "config");
  if (ov.seed) j["bootstrap"]["seed"] = *ov.seed;
  if (ov.alpha) j["bootstrap"]["alpha"] = *ov.alpha;
  if (ov.replications) j["bootstrap"]["replications"] = *ov.replications;
  if (ov.jobs) j["jobs"] = *ov.jobs;
  if (ov.output) j["output"] = ov.output->string();

  RunConfig c;
  c.raw = j;
  c.base_dir = base_dir;

  if (j.contains("session")) {
    const auto& s = j.at("session");
    detail::check_keys(s, {"start", "end", "timezone", "sampling_interval"}, "session");
    if (s.contains("start")) c.session.start = market::parse_time_of_day(s.at("start").get<std::string>());
    if (s.contains("end")) c.session.end = market::parse_time_of_day(s.at("end").get<std::string>());
    c.session.timezone = get(s, "timezone", c.session.timezone, "session");
    c.session.sampling_interval = get(s, "sampling_interval", c.session.sampling_interval, "session");
  }
  c.session.validate();

  c.instruments = get<std::vector<std::string>>(j, "instruments", {}, "config");
  if (c.instruments.empty()) fail_config("BadConfig", "config needs a non-empty 'instruments' list");
  if (std::set<std::string>(c.instruments.begin(), c.instruments.end()).size() != c.instruments.size())
    fail_config("BadConfig", "duplicate instrument names");

  market::TickSchema schema;
  schema.timezone = c.session.timezone;
  if (j.contains("tick_schema")) schema = detail::parse_schema(j.at("tick_schema"), schema);
  if (j.contains("ticks")) {
    for (const auto& t : j.at("ticks")) {
      TickSource src;
      src.schema = schema;
      if (t.is_string()) {
        src.path = detail::resolve(base_dir, t.get<std::string>());
      } else {
        detail::check_keys(t, {"path", "instrument", "schema"}, "ticks entry");
        src.path = detail::resolve(base_dir, get<std::string>(t, "path", "", "ticks entry"));
        if (t.contains("schema")) src.schema = detail::parse_schema(t.at("schema"), src.schema);
        src.schema.instrument = get(t, "instrument", src.schema.instrument, "ticks entry");
      }
      c.ticks.push_back(std::move(src));
    }
  }

  if (j.contains("calendar")) {
    const auto& k = j.at("calendar");
    detail::check_keys(k, {"excluded_dates", "low_trade_threshold"}, "calendar");
    for (const auto& d : get<std::vector<std::string>>(k, "excluded_dates", {}, "calendar"))
      c.calendar.excluded_dates.insert(market::parse_date(d));
    c.calendar.low_trade_threshold = get(k, "low_trade_threshold", c.calendar.low_trade_threshold, "calendar");
  }
  if (j.contains("announcements")) c.announcements = detail::parse_announcements(j.at("announcements"), base_dir);

  if (j.contains("jwc")) {
    const auto& k = j.at("jwc");
    detail::check_keys(k, {"G", "S", "c_N", "levels", "filter", "boundary"}, "jwc");
    if (k.contains("G")) {
      if (k.at("G").is_string()) {
        const auto rule = k.at("G").get<std::string>();
        if (rule == "n23") c.jwc.slow_rule = jwc::SlowSpacingRule::n_two_thirds;
        else if (rule != "fixed2") fail_config("BadConfig", "jwc.G must be an integer, \"fixed2\" or \"n23\"");
      } else {
        c.jwc.slow_spacing = get<int>(k, "G", 2, "jwc");
      }
    }
    c.jwc.fast_spacing = get(k, "S", c.jwc.fast_spacing, "jwc");
    if (k.contains("c_N") && !(k.at("c_N").is_string() && k.at("c_N").get<std::string>() == "auto"))
      c.jwc.c_n = get<double>(k, "c_N", 1.0, "jwc");
    if (k.contains("levels")) c.jwc.levels = get<int>(k, "levels", 4, "jwc");
    if (k.contains("filter")) c.jwc.filters = wavelet::FilterPair::by_name(get<std::string>(k, "filter", "d4", "jwc"));
    if (k.contains("boundary")) c.jwc.boundary = wavelet::parse_boundary(get<std::string>(k, "boundary", "", "jwc"));
  }
  if (j.contains("detector")) {
    const auto& k = j.at("detector");
    detail::check_keys(k, {"filter", "boundary"}, "detector");
    if (k.contains("filter"))
      c.detector.filters = wavelet::FilterPair::by_name(get<std::string>(k, "filter", "haar", "detector"));
    if (k.contains("boundary"))
      c.detector.boundary = wavelet::parse_boundary(get<std::string>(k, "boundary", "", "detector"));
  }
  if (j.contains("bootstrap")) {
    const auto& k = j.at("bootstrap");
    detail::check_keys(k, {"replications", "alpha", "seed"}, "bootstrap");
    c.bootstrap.replications = get(k, "replications", c.bootstrap.replications, "bootstrap");
    c.bootstrap.alpha = get(k, "alpha", c.bootstrap.alpha, "bootstrap");
    c.bootstrap.seed = get<std::uint64_t>(k, "seed", 0, "bootstrap");
  }
  c.bootstrap.validate();

  c.pairs = detail::parse_groups(j, "pairs", 2);
  for (const auto& p : c.pairs)
    if (p.size() != 2) fail_config("BadConfig", "'pairs' entries need exactly 2 members");
  if (!j.contains("pairs"))
    for (std::size_t a = 0; a < c.instruments.size(); ++a)
      for (std::size_t b = a + 1; b < c.instruments.size(); ++b) c.pairs.push_back({c.instruments[a], c.instruments[b]});
  c.tuples = detail::parse_groups(j, "tuples", 3);
  const std::set<std::string> known(c.instruments.begin(), c.instruments.end());
  for (const auto& g : c.groups()) {
    if (std::set<std::string>(g.begin(), g.end()).size() != g.size())
      fail_config("BadConfig", "group " + group_name(g) + " repeats an instrument");
    for (const auto& m : g)
      if (!known.count(m)) fail_config("UnknownInstrument", fmt::format("'{}' in {} is not a declared instrument", m, group_name(g)));
  }

  c.histogram_bin_minutes = get(j, "histogram_bin_minutes", c.histogram_bin_minutes, "config");
  const int length = c.session.end.seconds - c.session.start.seconds;
  if (c.histogram_bin_minutes <= 0 || length % (60 * c.histogram_bin_minutes) != 0)
    fail_config("BadHistogram", "histogram_bin_minutes must divide the session length");
  if (j.contains("scenario")) c.scenario = detail::resolve(base_dir, get<std::string>(j, "scenario", "", "config"));
  c.output = detail::resolve(base_dir, get<std::string>(j, "output", "out", "config"));
  if (j.contains("panels")) c.panels_dir = detail::resolve(base_dir, get<std::string>(j, "panels", "", "config"));
  const int jobs = get<int>(j, "jobs", 1, "config");
  if (jobs < 1) fail_config("BadConfig", "jobs must be >= 1");
  c.jobs = static_cast<unsigned>(jobs);
  return c;
}

inline RunConfig load_config(const fs::path& path, const Overrides& ov = {}) {
  if (!fs::exists(path)) fail_io("MissingFile", "config not found: " + path.string(), path.string());
  json j;
  try {
    j = json::parse(csv::read_file(path));
  } catch (const json::parse_error& e) {
    fail_config("BadConfig", fmt::format("{}: {}", path.string(), e.what()));
  }
  return parse_config(std::move(j), path.parent_path(), ov);
}

// ---------------------------------------------------------------------------
// Hashing

inline std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    fail_numerical("HashFailure", "SHA-256 digest failed");
  std::string hex;
  for (unsigned i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
  return hex;
}

/// Canonical config text: sorted keys, no whitespace. Scheduling and
/// output-location keys are dropped so reruns elsewhere hash the same.
inline std::string canonical_config(const RunConfig& c) {
  json j = c.raw;
  for (const char* k : {"jobs", "output", "panels"}) j.erase(k);
  return j.dump();
}

// ---------------------------------------------------------------------------
// Formatting helpers

inline std::string num_or_na(double v) { return std::isfinite(v) ? csv::num(v) : "NA"; }

inline double parse_num_or_na(const std::string& s, const std::string& path) {
  if (s == "NA") return std::numeric_limits<double>::quiet_NaN();
  auto v = csv::parse_double(s);
  if (!v) fail_io("BadDecomposition", fmt::format("non-numeric field '{}' in {}", s, path), path);
  return *v;
}

inline std::string pct2(double v) { return fmt::format("{:.2f}", v); }

// ---------------------------------------------------------------------------
// ingest

struct IngestSummary {
  std::size_t panels = 0, dropped = 0, rejected_rows = 0;
};

inline IngestSummary cmd_ingest(const RunConfig& c) {
  if (c.ticks.empty()) fail_config("BadConfig", "ingest needs a 'ticks' list");
  std::map<std::string, market::TickSeries> series;
  std::vector<std::string> diagnostics;
  IngestSummary sum;
  for (const auto& src : c.ticks) {
    auto rep = market::parse_ticks(src.path, src.schema);
    sum.rejected_rows += rep.rejected_rows;
    diagnostics.insert(diagnostics.end(), rep.diagnostics.begin(), rep.diagnostics.end());
    for (auto& [name, s] : rep.series) {
      auto& dst = series[name];
      dst.instrument = name;
      dst.records.insert(dst.records.end(), s.records.begin(), s.records.end());
    }
  }
  for (auto& [_, s] : series)
    std::stable_sort(s.records.begin(), s.records.end(),
                     [](const market::TickRecord& a, const market::TickRecord& b) { return a.timestamp < b.timestamp; });
  const auto result = market::ingest(series, c.instruments, c.session, c.calendar);
  fs::create_directories(c.panels());
  for (const auto& p : result.panels) market::write_panel(c.panels() / market::panel_file_name(p.date), p);
  market::write_drop_log(c.output / "drop_log.csv", result.drops);
  market::write_backfill_log(c.output / "backfill_log.csv", result.backfills);
  csv::Writer diag(c.output / "parse_diagnostics.csv");
  diag.row({"diagnostic"});
  for (const auto& d : diagnostics) diag.row({"\"" + d + "\""});
  diag.close();
  sum.panels = result.panels.size();
  sum.dropped = result.drops.size();
  return sum;
}

// ---------------------------------------------------------------------------
// simulate

inline std::size_t cmd_simulate(const RunConfig& c) {
  if (!c.scenario) fail_config("BadConfig", "simulate needs a 'scenario' path");
  if (!fs::exists(*c.scenario)) fail_io("MissingFile", "scenario not found: " + c.scenario->string(), c.scenario->string());
  const auto s = sim::read_scenario(*c.scenario);
  const auto days = sim::simulate(s);
  fs::create_directories(c.panels());
  for (const auto& d : days) market::write_panel(c.panels() / market::panel_file_name(d.date), sim::to_panel(s, d));
  sim::write_truth(c.output / "truth.csv", s, days);
  return days.size();
}

// ---------------------------------------------------------------------------
// decompose

struct PairResult {
  std::string pair;
  std::size_t a = 0, b = 0;  // instrument positions in the panel
  double qv = 0.0, ic_jwc = 0.0, cj_raw = 0.0;
  double corr_qv = std::numeric_limits<double>::quiet_NaN();
  double corr_ic = std::numeric_limits<double>::quiet_NaN();
  test::TestOutcome outcome;
  test::IcStar ic_star;
  std::vector<jumps::CoJumpEvent> events;
};

struct GroupDay {
  std::string group;
  bool cojump = false;
  std::vector<events::CoJumpEvent> events;
};

struct DayResult {
  market::Date date;
  std::vector<std::string> instruments;
  std::vector<jumps::JumpSeries> jump_series;
  jwc::IcMatrix ic;
  std::vector<std::vector<double>> qv;  // realized covariance of raw returns
  std::vector<double> cj;               // co-jump variation, d x d
  std::vector<PairResult> pairs;
  std::vector<GroupDay> groups;
  std::vector<market::TimeOfDay> grid_times;
  bool failed = false;
  std::string error_code, error_message;
};

/// Pairs needed by the configured groups, in first-use order.
inline std::vector<std::pair<std::string, std::string>> tested_pairs(const RunConfig& c) {
  std::vector<std::pair<std::string, std::string>> out;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& g : c.groups())
    for (std::size_t i = 0; i < g.size(); ++i)
      for (std::size_t j = i + 1; j < g.size(); ++j)
        if (seen.insert({g[i], g[j]}).second && !seen.count({g[j], g[i]})) out.push_back({g[i], g[j]});
  return out;
}

inline std::uint64_t pair_day_seed(std::uint64_t master, const std::string& date, const std::string& pair) {
  return child_seed(master, fnv1a(date + "|" + pair));
}

inline DayResult decompose_day(const RunConfig& c, const market::ReturnPanel& panel) {
  DayResult r;
  r.date = panel.date;
  r.instruments = c.instruments;
  r.grid_times = panel.grid_times;
  const std::string date = market::format_date(panel.date);
  std::vector<std::vector<double>> raw;
  for (const auto& name : c.instruments) {
    auto it = std::find(panel.instruments.begin(), panel.instruments.end(), name);
    if (it == panel.instruments.end()) fail_io("BadPanel", fmt::format("panel {} lacks instrument {}", date, name));
    raw.push_back(panel.returns[static_cast<std::size_t>(it - panel.instruments.begin())]);
  }
  const std::size_t d = raw.size();
  std::vector<std::vector<double>> adjusted;
  for (std::size_t k = 0; k < d; ++k) {
    r.jump_series.push_back(jumps::detect_day(raw[k], c.detector, c.instruments[k]));
    adjusted.push_back(jumps::adjust_returns(raw[k], r.jump_series.back()));
  }
  r.ic = jwc::jwc_integrated_covariance(adjusted, c.instruments, c.jwc);
  r.qv.assign(d, std::vector<double>(d));
  r.cj.assign(d * d, 0.0);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < d; ++b) {
      r.qv[a][b] = jumps::realized_covariance(raw[a], raw[b]);
      r.cj[a * d + b] = jumps::cojump_variation(r.jump_series[a], r.jump_series[b]).cj;
    }

  auto index_of = [&](const std::string& n) {
    return static_cast<std::size_t>(std::find(c.instruments.begin(), c.instruments.end(), n) - c.instruments.begin());
  };
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> pair_at;
  for (const auto& [x, y] : tested_pairs(c)) {
    PairResult p;
    p.a = index_of(x);
    p.b = index_of(y);
    p.pair = group_name({x, y});
    p.qv = r.qv[p.a][p.b];
    p.ic_jwc = r.ic(p.a, p.b);
    const auto entry = jumps::cojump_variation(r.jump_series[p.a], r.jump_series[p.b]);
    p.cj_raw = entry.cj;
    p.events = entry.events;
    const auto cq = jwc::correlation_from(r.qv[p.a][p.a], p.qv, r.qv[p.b][p.b]);
    if (cq.value) p.corr_qv = *cq.value;
    const auto ci = jwc::correlation_from(r.ic(p.a, p.a), p.ic_jwc, r.ic(p.b, p.b));
    if (ci.value) p.corr_ic = *ci.value;

    test::PairDay day;
    day.date = date;
    day.pair = {x, y};
    day.n = panel.intervals();
    day.qv = p.qv;
    day.ic11 = r.ic(p.a, p.a);
    day.ic12 = p.ic_jwc;
    day.ic22 = r.ic(p.b, p.b);
    day.cojump_intersection = !entry.events.empty();
    auto boot = c.bootstrap;
    boot.seed = pair_day_seed(c.bootstrap.seed, date, p.pair);
    boot.jobs = 1;
    p.outcome = test::bootstrap_statistic(day, boot, c.jwc);
    p.ic_star = test::select_ic_star(p.outcome, p.qv, p.ic_jwc);
    pair_at[{p.a, p.b}] = r.pairs.size();
    r.pairs.push_back(std::move(p));
  }

  for (const auto& g : c.groups()) {
    GroupDay gd;
    gd.group = group_name(g);
    std::vector<std::size_t> idx;
    for (const auto& m : g) idx.push_back(index_of(m));
    bool all_cojump = true;
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = i + 1; j < idx.size(); ++j) {
        auto it = pair_at.find({idx[i], idx[j]});
        if (it == pair_at.end()) it = pair_at.find({idx[j], idx[i]});
        all_cojump = all_cojump && r.pairs[it->second].outcome.classification == test::Classification::co_jump;
      }
    if (all_cojump) {
      std::vector<std::size_t> common = r.jump_series[idx[0]].indices;
      for (std::size_t k = 1; k < idx.size(); ++k) {
        std::vector<std::size_t> next;
        const auto& other = r.jump_series[idx[k]].indices;
        std::set_intersection(common.begin(), common.end(), other.begin(), other.end(), std::back_inserter(next));
        common.swap(next);
      }
      for (std::size_t t : common) {
        events::CoJumpEvent e;
        e.index = t;
        e.time = panel.grid_times[t];
        for (std::size_t k : idx) e.sizes.push_back(r.jump_series[k].sizes[t]);
        gd.events.push_back(std::move(e));
      }
      gd.cojump = !gd.events.empty();
    }
    r.groups.push_back(std::move(gd));
  }
  return r;
}

inline std::vector<fs::path> panel_files(const fs::path& dir) {
  std::vector<fs::path> files;
  if (!fs::exists(dir)) fail_io("MissingFile", "panel directory not found: " + dir.string(), dir.string());
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (e.is_regular_file() && name.rfind("panel_", 0) == 0 && e.path().extension() == ".csv") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

inline std::string sizes_field(const std::vector<double>& sizes) {
  std::string s;
  for (std::size_t i = 0; i < sizes.size(); ++i) s += (i ? ";" : "") + csv::num(sizes[i]);
  return s;
}

struct DecomposeSummary {
  std::size_t days = 0, failed = 0;
};

inline DecomposeSummary cmd_decompose(const RunConfig& c) {
  const auto files = panel_files(c.panels());
  std::vector<DayResult> results(files.size());
  parallel_for(files.size(), c.jobs, [&](std::size_t i) {
    try {
      const auto panel = market::read_panel(files[i], c.session.sampling_interval);
      results[i] = decompose_day(c, panel);
    } catch (const Error& e) {
      results[i].failed = true;
      results[i].error_code = e.code();
      results[i].error_message = e.what();
    } catch (const std::exception& e) {
      results[i].failed = true;
      results[i].error_code = "Unexpected";
      results[i].error_message = e.what();
    }
    if (results[i].failed) {
      const auto stem = files[i].stem().string();
      results[i].date = market::Date();
      results[i].instruments = {stem.substr(6)};
    }
  });

  csv::Writer jumps_out(c.output / "jumps.csv");
  jumps_out.row({"date", "instrument", "index", "grid_time", "size"});
  csv::Writer thresholds(c.output / "jump_thresholds.csv");
  thresholds.row({"date", "instrument", "threshold", "jumps", "degenerate"});
  csv::Writer ic_out(c.output / "ic_matrix.csv");
  ic_out.row({"date", "instrument_1", "instrument_2", "IC", "QV", "CJ", "floored"});
  csv::Writer tests_out(c.output / "tests.csv");
  tests_out.row({"date", "pair", "Z", "p", "rejected", "classification", "B", "alpha", "seed", "mean_z_star",
                 "var_z_star", "rho_hat"});
  csv::Writer dec_out(c.output / "decomposition.csv");
  dec_out.row({"date", "pair", "QV", "IC", "IC_jwc", "CJ", "Z", "p", "classification", "corr_qv", "corr_ic",
                "ic_star_flag"});
  csv::Writer cj_out(c.output / "cojumps.csv");
  cj_out.row({"date", "group", "index", "grid_time", "sizes"});
  csv::Writer failed_out(c.output / "failed_days.csv");
  failed_out.row({"panel", "code", "message"});

  DecomposeSummary sum;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    if (r.failed) {
      ++sum.failed;
      std::string msg = r.error_message;
      std::replace(msg.begin(), msg.end(), '"', '\'');
      failed_out.row({files[i].filename().string(), r.error_code, "\"" + msg + "\""});
      continue;
    }
    ++sum.days;
    const std::string date = market::format_date(r.date);
    const std::size_t d = r.instruments.size();
    for (const auto& js : r.jump_series) {
      thresholds.row({date, js.instrument, csv::num(js.threshold), std::to_string(js.indices.size()),
                      js.degenerate ? "1" : "0"});
      for (std::size_t t : js.indices)
        jumps_out.row({date, js.instrument, std::to_string(t), market::format_time_of_day(r.grid_times[t]),
                       csv::num(js.sizes[t])});
    }
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = a; b < d; ++b)
        ic_out.row({date, r.instruments[a], r.instruments[b], csv::num(r.ic(a, b)), csv::num(r.qv[a][b]),
                    csv::num(r.cj[a * d + b]), a == b && r.ic.diagonal_floored[a] ? "1" : "0"});
    for (const auto& p : r.pairs) {
      const auto& o = p.outcome;
      const bool inconclusive = o.classification == test::Classification::inconclusive;
      tests_out.row({date, p.pair, inconclusive ? "NA" : csv::num(o.z), inconclusive ? "NA" : csv::num(o.p_value),
                     o.rejected ? "1" : "0", test::to_string(o.classification), std::to_string(o.replications),
                     csv::num(o.alpha), std::to_string(o.seed), num_or_na(o.mean_z_star), num_or_na(o.var_z_star),
                     csv::num(o.rho_hat)});
      const double cj = o.classification == test::Classification::co_jump ? p.cj_raw : 0.0;
      dec_out.row({date, p.pair, csv::num(p.qv), csv::num(p.ic_star.value), csv::num(p.ic_jwc), csv::num(cj),
                   inconclusive ? "NA" : csv::num(o.z), inconclusive ? "NA" : csv::num(o.p_value),
                   test::to_string(o.classification), num_or_na(p.corr_qv), num_or_na(p.corr_ic),
                   p.ic_star.flagged ? "1" : "0"});
    }
    for (const auto& g : r.groups)
      for (const auto& e : g.events)
        cj_out.row({date, g.group, std::to_string(e.index), market::format_time_of_day(e.time), sizes_field(e.sizes)});
  }
  for (auto* w : {&jumps_out, &thresholds, &ic_out, &tests_out, &dec_out, &cj_out, &failed_out}) w->close();
  return sum;
}

// ---------------------------------------------------------------------------
// report

struct DecompositionFiles {
  std::vector<events::DayDecomposition> days;
  std::map<std::pair<std::string, market::Date>, std::vector<events::CoJumpEvent>> group_events;
};

inline DecompositionFiles read_decomposition(const fs::path& dir) {
  DecompositionFiles out;
  const fs::path dec = dir / "decomposition.csv", cj = dir / "cojumps.csv";
  for (const auto& p : {dec, cj})
    if (!fs::exists(p)) fail_io("MissingFile", "decomposition output not found: " + p.string(), p.string());
  const auto t = csv::read(dec);
  const std::string dp = dec.string();
  const auto c_date = t.require_column("date", dp), c_pair = t.require_column("pair", dp),
             c_qv = t.require_column("QV", dp), c_ic = t.require_column("IC", dp),
             c_jwc = t.require_column("IC_jwc", dp), c_cj = t.require_column("CJ", dp),
             c_cls = t.require_column("classification", dp), c_cq = t.require_column("corr_qv", dp),
             c_ci = t.require_column("corr_ic", dp);
  for (const auto& row : t.rows) {
    if (row.size() != t.header.size()) fail_io("BadDecomposition", "ragged row in " + dp, dp);
    events::DayDecomposition d;
    d.date = market::parse_date(row[c_date]);
    d.pair = row[c_pair];
    d.qv = parse_num_or_na(row[c_qv], dp);
    d.ic = parse_num_or_na(row[c_ic], dp);
    d.ic_jwc = parse_num_or_na(row[c_jwc], dp);
    d.cj = parse_num_or_na(row[c_cj], dp);
    d.corr_qv = parse_num_or_na(row[c_cq], dp);
    d.corr_ic = parse_num_or_na(row[c_ci], dp);
    const auto& cls = row[c_cls];
    using test::Classification;
    if (cls == "co_jump") d.classification = Classification::co_jump;
    else if (cls == "disjoint_only") d.classification = Classification::disjoint_only;
    else if (cls == "no_discontinuity") d.classification = Classification::no_discontinuity;
    else if (cls == "inconclusive") d.classification = Classification::inconclusive;
    else fail_io("BadDecomposition", "unknown classification '" + cls + "' in " + dp, dp);
    out.days.push_back(std::move(d));
  }
  const auto e = csv::read(cj);
  const std::string ep = cj.string();
  const auto e_date = e.require_column("date", ep), e_group = e.require_column("group", ep),
             e_index = e.require_column("index", ep), e_time = e.require_column("grid_time", ep),
             e_sizes = e.require_column("sizes", ep);
  for (const auto& row : e.rows) {
    if (row.size() != e.header.size()) fail_io("BadDecomposition", "ragged row in " + ep, ep);
    events::CoJumpEvent ev;
    const auto idx = csv::parse_int(row[e_index]);
    if (!idx || *idx < 0) fail_io("BadDecomposition", "bad index in " + ep, ep);
    ev.index = static_cast<std::size_t>(*idx);
    ev.time = market::parse_time_of_day(row[e_time]);
    for (const auto& f : csv::split(row[e_sizes], ';')) ev.sizes.push_back(parse_num_or_na(f, ep));
    out.group_events[{row[e_group], market::parse_date(row[e_date])}].push_back(std::move(ev));
  }
  return out;
}

struct ReportSummary {
  std::size_t days = 0;
  std::string config_sha256;
};

inline ReportSummary cmd_report(const RunConfig& c) {
  const auto data = read_decomposition(c.output);
  const auto& days = data.days;
  const fs::path out = c.output;
  events::AnnouncementCalendar cal;
  if (c.announcements) cal = *c.announcements;
  cal.timezone = c.announcements ? c.announcements->timezone : c.session.timezone;
  if (cal.windows.empty()) cal.windows.push_back({0, 30});

  std::set<market::Date> sample_days;
  std::map<std::string, std::set<market::Date>> pair_days;
  for (const auto& d : days) {
    sample_days.insert(d.date);
    pair_days[d.pair].insert(d.date);
  }
  const auto pairs = c.pairs;
  const auto groups = c.groups();

  // Table 3
  {
    csv::Writer w(out / "table3.csv");
    w.row({"pair", "days_cj", "qv", "pct_cj_qv"});
    if (!days.empty()) {
      const auto rows = events::cj_qv_summary(days);
      for (const auto& p : pairs) {
        const auto name = group_name(p);
        auto it = std::find_if(rows.begin(), rows.end(), [&](const events::CjQvRow& r) { return r.pair == name; });
        if (it == rows.end()) continue;
        w.row({it->pair, std::to_string(it->days_cj), csv::num(it->qv), csv::num(it->pct_cj_qv)});
      }
    }
    w.close();
  }

  // Table 4 and the Wald detail
  {
    csv::Writer t4(out / "table4.csv");
    t4.row({"pair", "alpha", "beta", "r2"});
    csv::Writer wd(out / "correlation_wald.csv");
    wd.row({"pair", "n", "alpha", "beta", "r2", "wald", "wald_p", "status"});
    for (const auto& p : pairs) {
      const auto name = group_name(p);
      std::vector<double> cq, ci;
      for (const auto& d : days)
        if (d.pair == name && std::isfinite(d.corr_qv) && std::isfinite(d.corr_ic)) {
          cq.push_back(d.corr_qv);
          ci.push_back(d.corr_ic);
        }
      if (cq.empty()) continue;
      try {
        const auto r = events::correlation_impact_regression(cq, ci);
        t4.row({name, csv::num(r.alpha), csv::num(r.beta), num_or_na(r.r2)});
        wd.row({name, std::to_string(r.n), csv::num(r.alpha), csv::num(r.beta), num_or_na(r.r2), num_or_na(r.wald),
                csv::num(r.wald_p), "ok"});
      } catch (const Error& e) {
        t4.row({name, "NA", "NA", "NA"});
        wd.row({name, std::to_string(cq.size()), "NA", "NA", "NA", "NA", "NA", e.code()});
      }
    }
    t4.close();
    wd.close();
  }

  // Sample days per group: days on which every constituent pair was decomposed.
  auto group_days = [&](const std::vector<std::string>& g) {
    std::set<market::Date> ds = sample_days;
    for (std::size_t i = 0; i < g.size(); ++i)
      for (std::size_t j = i + 1; j < g.size(); ++j) {
        auto it = pair_days.find(group_name({g[i], g[j]}));
        if (it == pair_days.end()) it = pair_days.find(group_name({g[j], g[i]}));
        std::set<market::Date> keep;
        if (it != pair_days.end())
          std::set_intersection(ds.begin(), ds.end(), it->second.begin(), it->second.end(),
                                std::inserter(keep, keep.end()));
        ds.swap(keep);
      }
    return ds;
  };
  auto events_of = [&](const std::string& g, market::Date d) -> std::span<const events::CoJumpEvent> {
    auto it = data.group_events.find({g, d});
    if (it == data.group_events.end()) return {};
    return it->second;
  };

  // Table 5 and the logit detail
  {
    csv::Writer t5(out / "table5.csv");
    t5.row({"group", "beta0", "beta1", "r2"});
    csv::Writer ld(out / "logit_detail.csv");
    ld.row({"group", "n", "news_days", "cojump_days", "beta0", "se0", "beta1", "se1", "pseudo_r2", "iterations",
            "converged", "status"});
    for (const auto& g : groups) {
      const auto name = group_name(g);
      const auto ds = group_days(g);
      if (ds.empty()) continue;
      std::vector<int> y, news;
      for (const auto d : ds) {
        y.push_back(events::cojump_window_indicator(d, events_of(name, d), c.session.timezone, cal));
        news.push_back(cal.is_announcement(d) ? 1 : 0);
      }
      const int n_news = static_cast<int>(std::count(news.begin(), news.end(), 1));
      const int n_cj = static_cast<int>(std::count(y.begin(), y.end(), 1));
      try {
        const auto f = events::announcement_logit(y, news);
        t5.row({name, csv::num(f.beta0), csv::num(f.beta1), csv::num(f.pseudo_r2)});
        ld.row({name, std::to_string(y.size()), std::to_string(n_news), std::to_string(n_cj), csv::num(f.beta0),
                csv::num(f.se0), csv::num(f.beta1), csv::num(f.se1), csv::num(f.pseudo_r2),
                std::to_string(f.iterations), f.converged ? "1" : "0", "ok"});
      } catch (const Error& e) {
        t5.row({name, "NA", "NA", "NA"});
        ld.row({name, std::to_string(y.size()), std::to_string(n_news), std::to_string(n_cj), "NA", "NA", "NA", "NA",
                "NA", "0", "0", e.code()});
      }
    }
    t5.close();
    ld.close();
  }

  // Table 6
  {
    std::vector<events::LabelledDay> labels;
    std::vector<std::string> names;
    for (const auto& g : groups) {
      const auto name = group_name(g);
      names.push_back(name);
      for (const auto d : group_days(g)) {
        const auto evs = events_of(name, d);
        if (!evs.empty()) labels.push_back({name, d, events::day_label(evs)});
      }
    }
    const auto counts = events::day_counts(sample_days, cal);
    const auto rows = events::shift_rotation_table(labels, names, cal, counts);
    csv::Writer t6(out / "table6.csv");
    t6.row({"group", "day_type", "R_n", "R_pct", "upLS_n", "upLS_pct", "downLS_n", "downLS_pct", "days_n", "days_pct"});
    for (const auto& r : rows)
      t6.row({r.tuple, r.announcement ? "announcement" : "non_announcement", std::to_string(r.rotations),
              pct2(r.rotation_pct), std::to_string(r.up_shifts), pct2(r.up_pct), std::to_string(r.down_shifts),
              pct2(r.down_pct), std::to_string(r.days), pct2(r.days_pct)});
    t6.close();
    csv::Writer dn(out / "table6_denominators.csv");
    dn.row({"day_type", "days"});
    dn.row({"announcement", std::to_string(counts.announcement)});
    dn.row({"non_announcement", std::to_string(counts.other)});
    dn.close();
  }

  // Intraday histogram of co-jump events per group
  {
    csv::Writer h(out / "histogram.csv");
    h.row({"group", "bin_start", "count"});
    for (const auto& g : groups) {
      const auto name = group_name(g);
      std::vector<market::TimeOfDay> times;
      for (const auto& [key, evs] : data.group_events)
        if (key.first == name)
          for (const auto& e : evs) times.push_back(e.time);
      for (const auto& b : events::intraday_histogram(times, c.session.start, c.session.end, c.histogram_bin_minutes))
        h.row({name, market::format_time_of_day(b.start), std::to_string(b.count)});
    }
    h.close();
  }

  // Manifest
  ReportSummary sum;
  sum.days = sample_days.size();
  sum.config_sha256 = sha256_hex(canonical_config(c));
  json m;
  m["config"] = json::parse(canonical_config(c));
  m["config_sha256"] = sum.config_sha256;
  m["seed"] = c.bootstrap.seed;
  json inputs = json::object();
  for (const char* f : {"decomposition.csv", "cojumps.csv"}) inputs[f] = sha256_hex(csv::read_file(out / f));
  if (fs::exists(c.panels()))
    for (const auto& p : panel_files(c.panels()))
      inputs["panels/" + p.filename().string()] = sha256_hex(csv::read_file(p));
  m["inputs"] = inputs;
  json outputs = json::object();
  for (const char* f : {"table3.csv", "table4.csv", "correlation_wald.csv", "table5.csv", "logit_detail.csv",
                        "table6.csv", "table6_denominators.csv", "histogram.csv"})
    outputs[f] = sha256_hex(csv::read_file(out / f));
  m["outputs"] = outputs;
  {
    std::ofstream f(out / "manifest.json", std::ios::binary | std::ios::trunc);
    if (!f) fail_io("Unwritable", "cannot write manifest", (out / "manifest.json").string());
    f << m.dump(2) << '\n';
  }
  return sum;
}

}  // namespace cojump::pipeline
