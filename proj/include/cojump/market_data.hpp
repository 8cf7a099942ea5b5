#pragma once

// Tick ingestion, last-tick grid sampling and return-panel construction.
//
// Instants are absl::Time (UTC). Session windows, trading dates and grid
// labels are wall-clock values in the session's IANA time zone; the zone is
// always supplied explicitly and never guessed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <absl/time/civil_time.h>
#include <absl/time/time.h>
#include <fmt/format.h>

#include "cojump/csv.hpp"
#include "cojump/error.hpp"

namespace cojump::market {

using Date = absl::CivilDay;

inline std::string format_date(Date d) { return absl::FormatCivilTime(d); }

inline Date parse_date(std::string_view text) {
  Date d;
  const std::string_view t = csv::trim(text);
  if (!absl::ParseCivilTime(absl::string_view(t.data(), t.size()), &d))
    fail_io("BadDate", fmt::format("cannot parse date '{}'", text));
  return d;
}

/// Wall-clock time of day in seconds since local midnight.
struct TimeOfDay {
  int seconds = 0;
  friend auto operator<=>(const TimeOfDay&, const TimeOfDay&) = default;
};

inline TimeOfDay parse_time_of_day(std::string_view text) {
  text = csv::trim(text);
  int h = 0, m = 0, s = 0;
  char c1 = 0, c2 = 0;
  const std::string buf(text);
  const int n = std::sscanf(buf.c_str(), "%d%c%d%c%d", &h, &c1, &m, &c2, &s);
  if (n < 3 || c1 != ':' || (n == 5 && c2 != ':') || n == 4 || h < 0 || h > 24 || m < 0 || m > 59 ||
      s < 0 || s > 59)
    fail_config("BadTime", fmt::format("cannot parse time of day '{}'", text));
  return TimeOfDay{h * 3600 + m * 60 + s};
}

inline std::string format_time_of_day(TimeOfDay t) {
  return fmt::format("{:02d}:{:02d}:{:02d}", t.seconds / 3600, (t.seconds / 60) % 60, t.seconds % 60);
}

inline absl::TimeZone load_zone(const std::string& name) {
  absl::TimeZone tz;
  if (!absl::LoadTimeZone(name, &tz)) fail_config("BadTimeZone", "unknown time zone '" + name + "'");
  return tz;
}

struct TickRecord {
  absl::Time timestamp;
  double price = 0.0;
  std::int64_t volume = 0;
  std::string instrument;
};

struct TickSeries {
  std::string instrument;
  std::vector<TickRecord> records;  // sorted by timestamp
};

/// Column mapping for tick CSV files. Timestamps are read in `timezone`.
struct TickSchema {
  std::string timestamp_column = "timestamp";
  std::string price_column = "price";
  std::string volume_column = "volume";   // empty: volume not present
  std::string instrument_column;          // empty: single-instrument file
  std::string instrument;                 // instrument id for single-instrument files
  std::string timestamp_format = "%Y-%m-%d %H:%M:%E*S";
  std::string timezone = "UTC";
  char delimiter = ',';
};

struct ParseReport {
  std::map<std::string, TickSeries> series;
  std::size_t total_rows = 0;
  std::size_t parsed_rows = 0;
  std::size_t rejected_rows = 0;
  std::vector<std::string> diagnostics;  // one per rejected row
};

inline ParseReport parse_ticks(const std::filesystem::path& path, const TickSchema& schema) {
  if (!std::filesystem::exists(path)) fail_io("MissingFile", "tick file not found: " + path.string(), path.string());
  const csv::Table table = csv::read(path, schema.delimiter);
  const std::string p = path.string();
  if (table.header.empty()) fail_io("ZeroValidRows", "no rows in " + p, p);

  const auto ts_col = table.require_column(schema.timestamp_column, p);
  const auto px_col = table.require_column(schema.price_column, p);
  std::optional<std::size_t> vol_col;
  if (!schema.volume_column.empty()) vol_col = table.require_column(schema.volume_column, p);
  std::optional<std::size_t> inst_col;
  if (!schema.instrument_column.empty()) inst_col = table.require_column(schema.instrument_column, p);
  if (!inst_col && schema.instrument.empty())
    fail_config("NoInstrument", "schema names neither an instrument column nor an instrument id");

  const absl::TimeZone tz = load_zone(schema.timezone);
  ParseReport report;
  report.total_rows = table.rows.size();
  std::size_t line = 1;
  for (const auto& row : table.rows) {
    ++line;
    auto reject = [&](const std::string& why) {
      ++report.rejected_rows;
      report.diagnostics.push_back(fmt::format("{}: row {}: {}", p, line, why));
    };
    const std::size_t need = std::max({ts_col, px_col, vol_col.value_or(0), inst_col.value_or(0)});
    if (row.size() <= need) {
      reject("too few fields");
      continue;
    }
    absl::Time t;
    std::string err;
    if (!absl::ParseTime(schema.timestamp_format, row[ts_col], tz, &t, &err)) {
      reject("bad timestamp '" + row[ts_col] + "'");
      continue;
    }
    auto price = csv::parse_double(row[px_col]);
    if (!price || !std::isfinite(*price)) {
      reject("bad price '" + row[px_col] + "'");
      continue;
    }
    if (*price <= 0.0) {
      reject("non-positive price " + row[px_col]);
      continue;
    }
    std::int64_t volume = 0;
    if (vol_col) {
      auto v = csv::parse_int(row[*vol_col]);
      if (!v || *v < 0) {
        reject("bad volume '" + row[*vol_col] + "'");
        continue;
      }
      volume = *v;
    }
    std::string inst = inst_col ? row[*inst_col] : schema.instrument;
    if (inst.empty()) {
      reject("empty instrument");
      continue;
    }
    auto& s = report.series[inst];
    s.instrument = inst;
    s.records.push_back(TickRecord{t, *price, volume, std::move(inst)});
    ++report.parsed_rows;
  }
  if (report.parsed_rows == 0) fail_io("ZeroValidRows", "no valid tick rows in " + p, p);
  for (auto& [_, s] : report.series)
    std::stable_sort(s.records.begin(), s.records.end(),
                     [](const TickRecord& a, const TickRecord& b) { return a.timestamp < b.timestamp; });
  return report;
}

struct SessionSpec {
  TimeOfDay start{7 * 3600};
  TimeOfDay end{16 * 3600};
  std::string timezone = "UTC";
  int sampling_interval = 60;  // seconds

  int intervals() const { return (end.seconds - start.seconds) / sampling_interval; }

  void validate() const {
    if (!(start < end)) fail_config("BadSession", "session start must precede session end");
    if (sampling_interval <= 0) fail_config("BadSession", "sampling interval must be positive");
    if ((end.seconds - start.seconds) % sampling_interval != 0)
      fail_config("BadSession", "sampling interval must divide the session length");
    load_zone(timezone);
  }

  /// Wall-clock label of grid point i (0..N).
  TimeOfDay grid_time(int i) const { return TimeOfDay{start.seconds + i * sampling_interval}; }
};

struct TradingCalendar {
  std::set<Date> excluded_dates;
  double low_trade_threshold = 0.60;
};

/// Last-tick prices of one instrument on one trading date.
struct DayGrid {
  Date date;
  std::string instrument;
  std::vector<double> prices;   // N+1 grid prices
  int backfilled = 0;           // leading grid points filled with the first trade
  double bin_coverage = 0.0;    // fraction of 5-minute session bins holding a trade
  bool usable = false;
  std::string reason;           // why unusable
};

inline absl::Time to_instant(Date date, TimeOfDay t, const absl::TimeZone& tz) {
  return absl::FromCivil(absl::CivilSecond(date) + t.seconds, tz);
}

/// Samples the last trade at or before each grid point of the session on
/// `date`. Trades earlier on the same local date count; grid points before
/// the first trade are back-filled with that trade's price and counted.
inline DayGrid sample_last_tick(const TickSeries& ticks, const SessionSpec& spec, Date date) {
  const absl::TimeZone tz = load_zone(spec.timezone);
  const int n = spec.intervals();
  DayGrid grid;
  grid.date = date;
  grid.instrument = ticks.instrument;

  const absl::Time day_begin = absl::FromCivil(absl::CivilSecond(date), tz);
  const absl::Time session_begin = to_instant(date, spec.start, tz);
  const absl::Time session_end = to_instant(date, spec.end, tz);
  const auto& recs = ticks.records;
  auto by_time = [](const TickRecord& r, absl::Time t) { return r.timestamp < t; };
  const auto first = std::lower_bound(recs.begin(), recs.end(), day_begin, by_time);
  const auto last = std::upper_bound(recs.begin(), recs.end(), session_end,
                                     [](absl::Time t, const TickRecord& r) { return t < r.timestamp; });
  const bool traded_in_session =
      std::any_of(first, last, [&](const TickRecord& r) { return r.timestamp >= session_begin; });
  if (first == last || !traded_in_session) {
    grid.reason = "no trades during session";
    return grid;
  }

  grid.prices.resize(static_cast<std::size_t>(n) + 1);
  auto it = first;
  std::optional<double> current;
  for (int i = 0; i <= n; ++i) {
    const absl::Time t = to_instant(date, spec.grid_time(i), tz);
    while (it != last && it->timestamp <= t) current = (it++)->price;
    if (current) {
      grid.prices[i] = *current;
    } else {
      grid.prices[i] = first->price;
      ++grid.backfilled;
    }
  }

  // Activity on 5-minute bins (lo, hi] regardless of the sampling interval.
  constexpr int kBin = 300;
  const int length = spec.end.seconds - spec.start.seconds;
  const int bins = (length + kBin - 1) / kBin;
  std::vector<bool> hit(bins, false);
  for (auto r = first; r != last; ++r) {
    if (r->timestamp <= session_begin) continue;
    const double offset = absl::ToDoubleSeconds(r->timestamp - session_begin);
    const int b = std::min(bins - 1, static_cast<int>(std::ceil(offset / kBin)) - 1);
    hit[std::max(0, b)] = true;
  }
  grid.bin_coverage = bins ? static_cast<double>(std::count(hit.begin(), hit.end(), true)) / bins : 0.0;
  grid.usable = true;
  return grid;
}

struct ReturnPanel {
  Date date;
  std::vector<std::string> instruments;
  std::vector<std::vector<double>> returns;  // d x N log returns
  std::vector<TimeOfDay> grid_times;         // N+1 wall-clock grid points

  std::size_t intervals() const { return returns.empty() ? 0 : returns.front().size(); }
  std::size_t dimension() const { return instruments.size(); }
};

struct DropRecord {
  Date date;
  std::string reason;
};

struct BackfillRecord {
  Date date;
  std::string instrument;
  int points = 0;
};

struct PanelOutcome {
  std::optional<ReturnPanel> panel;
  std::string drop_reason;
};

inline std::vector<double> log_returns(std::span<const double> prices) {
  std::vector<double> r;
  if (prices.size() < 2) return r;
  r.reserve(prices.size() - 1);
  for (std::size_t i = 1; i < prices.size(); ++i) r.push_back(std::log(prices[i]) - std::log(prices[i - 1]));
  return r;
}

/// Combines one date's per-instrument grids (in instrument order; nullopt
/// marks a missing instrument) into a return panel, applying the calendar.
inline PanelOutcome build_panel(Date date, std::span<const std::optional<DayGrid>> grids,
                                std::span<const std::string> instruments, const SessionSpec& spec,
                                const TradingCalendar& calendar) {
  require(grids.size() == instruments.size(), "build_panel: one grid per instrument");
  PanelOutcome out;
  if (calendar.excluded_dates.count(date)) {
    out.drop_reason = "excluded date";
    return out;
  }
  for (std::size_t k = 0; k < grids.size(); ++k) {
    if (!grids[k]) {
      out.drop_reason = "missing instrument " + instruments[k];
      return out;
    }
    if (!grids[k]->usable) {
      out.drop_reason = instruments[k] + ": " + grids[k]->reason;
      return out;
    }
  }
  const bool low_everywhere = std::all_of(grids.begin(), grids.end(), [&](const std::optional<DayGrid>& g) {
    return g->bin_coverage < calendar.low_trade_threshold;
  });
  if (low_everywhere && !grids.empty()) {
    out.drop_reason = fmt::format("low trading activity (below {} of 5-minute bins)", calendar.low_trade_threshold);
    return out;
  }
  ReturnPanel panel;
  panel.date = date;
  panel.instruments.assign(instruments.begin(), instruments.end());
  for (const auto& g : grids) {
    auto r = log_returns(g->prices);
    if (static_cast<int>(r.size()) != spec.intervals()) {
      out.drop_reason = "incomplete grid for " + g->instrument;
      return out;
    }
    panel.returns.push_back(std::move(r));
  }
  for (int i = 0; i <= spec.intervals(); ++i) panel.grid_times.push_back(spec.grid_time(i));
  out.panel = std::move(panel);
  return out;
}

struct IngestResult {
  std::vector<ReturnPanel> panels;
  std::vector<DropRecord> drops;
  std::vector<BackfillRecord> backfills;
};

/// Local trading dates on which `series` has any trade.
inline std::set<Date> trading_dates(const TickSeries& series, const absl::TimeZone& tz) {
  std::set<Date> dates;
  for (const auto& r : series.records) dates.insert(Date(absl::ToCivilSecond(r.timestamp, tz)));
  return dates;
}

inline IngestResult ingest(const std::map<std::string, TickSeries>& ticks, std::span<const std::string> instruments,
                           const SessionSpec& spec, const TradingCalendar& calendar) {
  spec.validate();
  const absl::TimeZone tz = load_zone(spec.timezone);
  std::set<Date> dates;
  for (const auto& [_, s] : ticks) {
    auto d = trading_dates(s, tz);
    dates.insert(d.begin(), d.end());
  }
  IngestResult result;
  for (Date date : dates) {
    std::vector<std::optional<DayGrid>> grids;
    for (const auto& inst : instruments) {
      auto it = ticks.find(inst);
      if (it == ticks.end()) {
        grids.emplace_back();
        continue;
      }
      const auto& recs = it->second.records;
      const absl::Time b = absl::FromCivil(absl::CivilSecond(date), tz);
      const absl::Time e = absl::FromCivil(absl::CivilSecond(date + 1), tz);
      const bool any = std::any_of(recs.begin(), recs.end(),
                                   [&](const TickRecord& r) { return r.timestamp >= b && r.timestamp < e; });
      if (!any) {
        grids.emplace_back();
        continue;
      }
      grids.push_back(sample_last_tick(it->second, spec, date));
    }
    auto outcome = build_panel(date, grids, instruments, spec, calendar);
    if (outcome.panel) {
      for (const auto& g : grids)
        if (g->backfilled > 0) result.backfills.push_back({date, g->instrument, g->backfilled});
      result.panels.push_back(std::move(*outcome.panel));
    } else {
      result.drops.push_back({date, outcome.drop_reason});
    }
  }
  return result;
}

// Panel files: one CSV per day, columns date, grid_time, <instrument...>.
// Each row is one return interval labelled by its left grid point.

inline std::string panel_file_name(Date d) { return "panel_" + format_date(d) + ".csv"; }

inline void write_panel(const std::filesystem::path& path, const ReturnPanel& panel) {
  csv::Writer w(path);
  std::vector<std::string> header{"date", "grid_time"};
  header.insert(header.end(), panel.instruments.begin(), panel.instruments.end());
  w.row(header);
  const std::string date = format_date(panel.date);
  for (std::size_t i = 0; i < panel.intervals(); ++i) {
    std::vector<std::string> row{date, format_time_of_day(panel.grid_times[i])};
    for (const auto& r : panel.returns) row.push_back(csv::num(r[i]));
    w.row(row);
  }
  w.close();
}

inline ReturnPanel read_panel(const std::filesystem::path& path, int sampling_interval) {
  const auto table = csv::read(path);
  const std::string p = path.string();
  if (table.header.size() < 3 || table.header[0] != "date" || table.header[1] != "grid_time")
    fail_io("BadPanel", "panel header must be date,grid_time,<instruments> in " + p, p);
  if (table.rows.empty()) fail_io("BadPanel", "empty panel " + p, p);
  ReturnPanel panel;
  panel.instruments.assign(table.header.begin() + 2, table.header.end());
  panel.returns.assign(panel.instruments.size(), {});
  panel.date = parse_date(table.rows.front()[0]);
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) fail_io("BadPanel", "ragged row in " + p, p);
    panel.grid_times.push_back(parse_time_of_day(row[1]));
    for (std::size_t k = 0; k < panel.instruments.size(); ++k) {
      auto v = csv::parse_double(row[k + 2]);
      if (!v || !std::isfinite(*v)) fail_io("BadPanel", "non-numeric return in " + p, p);
      panel.returns[k].push_back(*v);
    }
  }
  panel.grid_times.push_back(TimeOfDay{panel.grid_times.back().seconds + sampling_interval});
  return panel;
}

inline void write_drop_log(const std::filesystem::path& path, std::span<const DropRecord> drops) {
  csv::Writer w(path);
  w.row({"date", "reason"});
  for (const auto& d : drops) w.row({format_date(d.date), "\"" + d.reason + "\""});
  w.close();
}

inline void write_backfill_log(const std::filesystem::path& path, std::span<const BackfillRecord> recs) {
  csv::Writer w(path);
  w.row({"date", "instrument", "backfilled_points"});
  for (const auto& r : recs) w.row({format_date(r.date), r.instrument, std::to_string(r.points)});
  w.close();
}

}  // namespace cojump::market
