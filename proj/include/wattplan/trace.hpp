#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "wattplan/errors.hpp"

namespace wattplan {

/// One timestamped per-device power measurement.
struct Reading {
  std::int64_t timestamp = 0;  // seconds since epoch, UTC
  std::string device_id;
  double power = 0.0;  // watts, >= 0

  bool operator==(const Reading&) const = default;
};

// ---------------------------------------------------------------------------
// UTC calendar decomposition (no locale, no tzdata)
// ---------------------------------------------------------------------------

struct CivilTime {
  int year = 1970;
  int month = 1;  // 1..12
  int day = 1;
  int hour = 0;  // 0..23
};

// Days-to-civil conversion, valid far beyond any meter trace.
inline CivilTime civil_from_timestamp(std::int64_t ts) {
  std::int64_t days = ts / 86400;
  std::int64_t rem = ts % 86400;
  if (rem < 0) {
    rem += 86400;
    days -= 1;
  }
  std::int64_t z = days + 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const std::int64_t doe = z - era * 146097;
  const std::int64_t yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = yoe + era * 400;
  const std::int64_t doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const std::int64_t mp = (5 * doy + 2) / 153;
  const std::int64_t d = doy - (153 * mp + 2) / 5 + 1;
  const std::int64_t m = mp < 10 ? mp + 3 : mp - 9;
  CivilTime out;
  out.year = static_cast<int>(y + (m <= 2 ? 1 : 0));
  out.month = static_cast<int>(m);
  out.day = static_cast<int>(d);
  out.hour = static_cast<int>(rem / 3600);
  return out;
}

// ---------------------------------------------------------------------------
// CSV parsing
// ---------------------------------------------------------------------------

/// Column bindings for the trace CSV. Columns may be named (requires a
/// header row) or given as 0-based indices.
struct SchemaConfig {
  std::string timestamp_col = "timestamp";
  std::string device_col = "device_id";
  std::string power_col = "power";
  bool strict = false;  // abort on malformed rows instead of skipping
};

struct ParseReport {
  std::size_t rows_total = 0;   // data rows seen (header excluded)
  std::size_t rows_parsed = 0;  // readings produced
  std::size_t rows_skipped = 0;
};

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline bool parse_i64(std::string_view s, std::int64_t& out) {
  s = trim(s);
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

inline bool parse_f64(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size() && std::isfinite(out);
}

// Resolves a schema column spec to an index. A spec that parses as an
// integer is positional; otherwise it is looked up in the header. Without a
// header the canonical names map to the documented column order.
inline std::size_t resolve_column(const std::string& spec, const std::vector<std::string_view>& header,
                                  bool have_header) {
  std::int64_t idx = 0;
  if (parse_i64(spec, idx)) {
    if (idx < 0) fail(Errc::config, "column index must be non-negative: " + spec);
    return static_cast<std::size_t>(idx);
  }
  if (!have_header) {
    if (spec == "timestamp") return 0;
    if (spec == "device_id") return 1;
    if (spec == "power") return 2;
    fail(Errc::config, "named column '" + spec + "' requires a header row");
  }
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (trim(header[i]) == spec) return i;
  }
  fail(Errc::config, "column '" + spec + "' not found in header");
}

}  // namespace detail

/// Parses a trace stream. Structurally malformed rows are skipped and
/// counted (or abort in strict mode); negative power and unparseable
/// timestamps are always hard errors.
inline std::vector<Reading> parse_trace(std::istream& in, const SchemaConfig& schema, ParseReport* report = nullptr) {
  std::vector<Reading> readings;
  ParseReport local;
  std::string line;
  std::size_t line_no = 0;
  bool first_content_line = true;
  std::size_t ts_col = 0, dev_col = 1, pow_col = 2;

  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = detail::trim(line);
    if (view.empty()) continue;

    auto fields = detail::split_csv_line(view);
    if (first_content_line) {
      first_content_line = false;
      // Header auto-detection: if the timestamp field of the first row does
      // not parse as an integer, the row is a header.
      std::int64_t probe = 0;
      bool numeric_first = false;
      for (const auto& f : fields) {
        if (detail::parse_i64(f, probe)) {
          numeric_first = true;
          break;
        }
      }
      bool looks_like_header = !numeric_first;
      ts_col = detail::resolve_column(schema.timestamp_col, fields, looks_like_header);
      dev_col = detail::resolve_column(schema.device_col, fields, looks_like_header);
      pow_col = detail::resolve_column(schema.power_col, fields, looks_like_header);
      if (looks_like_header) continue;
    }

    ++local.rows_total;
    const std::size_t need = std::max({ts_col, dev_col, pow_col}) + 1;
    if (fields.size() < need) {
      if (schema.strict) fail(Errc::parse, "malformed row at line " + std::to_string(line_no));
      ++local.rows_skipped;
      continue;
    }

    Reading r;
    if (!detail::parse_i64(fields[ts_col], r.timestamp))
      fail(Errc::bad_timestamp, "unparseable timestamp at line " + std::to_string(line_no));
    if (!detail::parse_f64(fields[pow_col], r.power))
      fail(Errc::parse, "unparseable power at line " + std::to_string(line_no));
    if (r.power < 0.0)
      fail(Errc::negative_power, "negative power at line " + std::to_string(line_no));
    r.device_id = std::string(detail::trim(fields[dev_col]));
    if (r.device_id.empty()) {
      if (schema.strict) fail(Errc::parse, "empty device id at line " + std::to_string(line_no));
      ++local.rows_skipped;
      continue;
    }
    readings.push_back(std::move(r));
    ++local.rows_parsed;
  }
  if (report) *report = local;
  return readings;
}

// Shortest decimal form that round-trips the exact double.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

inline void write_trace_csv(std::ostream& out, std::span<const Reading> readings, bool header = true) {
  if (header) out << "timestamp,device_id,power\n";
  for (const Reading& r : readings) {
    out << r.timestamp << ',' << r.device_id << ',' << format_double(r.power) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Feature extraction
// ---------------------------------------------------------------------------

struct MinMax {
  double lo = 0.0;
  double hi = 0.0;

  void expand(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  // Degenerate ranges normalize to 0; live values clamp into [0,1].
  double norm(double v) const {
    if (hi <= lo) return 0.0;
    return std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
  }
  double denorm(double n) const { return lo + n * (hi - lo); }
};

/// Per-feature training-set extrema for min-max scaling.
struct NormStats {
  MinMax hour, month, year, power;
};

constexpr int kFeatureDim = 4;

/// Calendar + power features of one reading, raw and normalized.
struct FeatureVector {
  double hour = 0, month = 0, year = 0, power = 0;
  double hour_n = 0, month_n = 0, year_n = 0, power_n = 0;

  std::vector<double> normalized() const { return {hour_n, month_n, year_n, power_n}; }
};

inline NormStats compute_norm_stats(std::span<const Reading> readings) {
  if (readings.empty()) fail(Errc::empty_trace, "compute_norm_stats: empty trace");
  NormStats stats;
  bool first = true;
  for (const Reading& r : readings) {
    const CivilTime ct = civil_from_timestamp(r.timestamp);
    if (first) {
      stats.hour = {double(ct.hour), double(ct.hour)};
      stats.month = {double(ct.month), double(ct.month)};
      stats.year = {double(ct.year), double(ct.year)};
      stats.power = {r.power, r.power};
      first = false;
      continue;
    }
    stats.hour.expand(ct.hour);
    stats.month.expand(ct.month);
    stats.year.expand(ct.year);
    stats.power.expand(r.power);
  }
  return stats;
}

inline FeatureVector extract_features(const Reading& reading, const NormStats& stats) {
  const CivilTime ct = civil_from_timestamp(reading.timestamp);
  FeatureVector f;
  f.hour = ct.hour;
  f.month = ct.month;
  f.year = ct.year;
  f.power = reading.power;
  f.hour_n = stats.hour.norm(f.hour);
  f.month_n = stats.month.norm(f.month);
  f.year_n = stats.year.norm(f.year);
  f.power_n = stats.power.norm(f.power);
  return f;
}

// ---------------------------------------------------------------------------
// Frame alignment and splitting
// ---------------------------------------------------------------------------

/// Synchronized all-device view at one timestamp; values are
/// last-observation-carried-forward per device.
struct AlignedFrame {
  std::int64_t timestamp = 0;
  std::vector<double> power;  // one slot per registry device

  bool operator==(const AlignedFrame&) const = default;
};

inline std::map<std::string, std::vector<Reading>> group_by_device(std::span<const Reading> readings) {
  std::map<std::string, std::vector<Reading>> out;
  for (const Reading& r : readings) out[r.device_id].push_back(r);
  return out;
}

inline std::vector<std::string> device_registry(std::span<const Reading> readings) {
  std::vector<std::string> ids;
  for (const Reading& r : readings) ids.push_back(r.device_id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

inline std::vector<AlignedFrame> align_frames(const std::map<std::string, std::vector<Reading>>& per_device,
                                              std::span<const std::string> registry) {
  std::vector<const std::vector<Reading>*> streams;
  streams.reserve(registry.size());
  for (const std::string& dev : registry) {
    auto it = per_device.find(dev);
    if (it == per_device.end() || it->second.empty())
      fail(Errc::device_never_seen, "device has no readings: " + dev);
    for (std::size_t i = 1; i < it->second.size(); ++i) {
      if (it->second[i].timestamp < it->second[i - 1].timestamp)
        fail(Errc::parse, "device stream out of order: " + dev);
    }
    streams.push_back(&it->second);
  }

  std::vector<std::int64_t> stamps;
  for (const auto* s : streams)
    for (const Reading& r : *s) stamps.push_back(r.timestamp);
  std::sort(stamps.begin(), stamps.end());
  stamps.erase(std::unique(stamps.begin(), stamps.end()), stamps.end());

  std::vector<AlignedFrame> frames(stamps.size());
  std::vector<std::size_t> cursor(streams.size(), 0);
  for (std::size_t t = 0; t < stamps.size(); ++t) {
    frames[t].timestamp = stamps[t];
    frames[t].power.resize(streams.size());
    for (std::size_t d = 0; d < streams.size(); ++d) {
      const auto& stream = *streams[d];
      std::size_t& c = cursor[d];
      while (c + 1 < stream.size() && stream[c + 1].timestamp <= stamps[t]) ++c;
      // c sits on the last reading at or before this stamp; before the
      // device's first reading it stays at 0, carrying the first value back.
      frames[t].power[d] = stream[c].power;
    }
  }
  return frames;
}

/// Chronological split; the prefix of round(fraction * N) frames is train.
inline std::pair<std::span<const AlignedFrame>, std::span<const AlignedFrame>> split_train_test(
    std::span<const AlignedFrame> frames, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    fail(Errc::config, "train_fraction must lie in (0,1)");
  const auto n = static_cast<std::size_t>(
      std::llround(train_fraction * static_cast<double>(frames.size())));
  const std::size_t cut = std::min(n, frames.size());
  return {frames.subspan(0, cut), frames.subspan(cut)};
}

}  // namespace wattplan
