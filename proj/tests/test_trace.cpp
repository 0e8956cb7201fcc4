#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "wattplan/rng.hpp"
#include "wattplan/trace.hpp"

using namespace wattplan;

namespace {
std::vector<Reading> parse_text(const std::string& text, const SchemaConfig& schema = {},
                                ParseReport* report = nullptr) {
  std::istringstream in(text);
  return parse_trace(in, schema, report);
}
}  // namespace

TEST_CASE("parse_trace maps well-formed rows") {
  auto readings = parse_text("1451606400,refrigerator,120.5\n");
  REQUIRE(readings.size() == 1);
  CHECK(readings[0].timestamp == 1451606400);
  CHECK(readings[0].device_id == "refrigerator");
  CHECK(readings[0].power == 120.5);
}

TEST_CASE("parse_trace rejects negative power") {
  REQUIRE_THROWS_MATCHES(parse_text("1451606400,refrigerator,-3\n"), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.code() == Errc::negative_power;
                         }));
}

TEST_CASE("parse_trace on empty input") {
  ParseReport report;
  auto readings = parse_text("", {}, &report);
  CHECK(readings.empty());
  CHECK(report.rows_total == 0);
  CHECK(report.rows_parsed == 0);
}

TEST_CASE("parse_trace skips malformed rows and counts them") {
  ParseReport report;
  auto readings = parse_text("100,a,1\nbroken\n200,a,2\n", {}, &report);
  REQUIRE(readings.size() == 2);
  CHECK(report.rows_total == 3);
  CHECK(report.rows_skipped == 1);
}

TEST_CASE("parse_trace strict mode aborts on malformed rows") {
  SchemaConfig schema;
  schema.strict = true;
  REQUIRE_THROWS_AS(parse_text("100,a,1\nbroken\n", schema), Error);
}

TEST_CASE("parse_trace rejects unparseable timestamps") {
  REQUIRE_THROWS_MATCHES(parse_text("yesterday,a,1\nmore,b,2\n", {},  nullptr), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.code() == Errc::bad_timestamp;
                         }));
}

TEST_CASE("parse_trace resolves named columns from a header") {
  SchemaConfig schema;
  schema.timestamp_col = "ts";
  schema.device_col = "dev";
  schema.power_col = "watts";
  auto readings = parse_text("dev,watts,ts\nfridge,42.0,100\n", schema);
  REQUIRE(readings.size() == 1);
  CHECK(readings[0].timestamp == 100);
  CHECK(readings[0].device_id == "fridge");
  CHECK(readings[0].power == 42.0);
}

TEST_CASE("parse_trace accepts index-based columns without header") {
  SchemaConfig schema;
  schema.timestamp_col = "2";
  schema.device_col = "0";
  schema.power_col = "1";
  auto readings = parse_text("fridge,42.0,100\n", schema);
  REQUIRE(readings.size() == 1);
  CHECK(readings[0].device_id == "fridge");
}

TEST_CASE("trace CSV round-trips") {
  std::vector<Reading> readings;
  Rng rng(7);
  std::int64_t ts = 1451606400;
  for (int i = 0; i < 200; ++i) {
    ts += 15;
    readings.push_back({ts, i % 2 ? "a" : "b", rng.uniform01() * 350.0});
  }
  std::ostringstream out;
  write_trace_csv(out, readings);
  auto again = parse_text(out.str());
  CHECK(again == readings);
}

TEST_CASE("compute_norm_stats singleton has min == max") {
  std::vector<Reading> one{{1451606400, "a", 55.0}};
  auto stats = compute_norm_stats(one);
  CHECK(stats.power.lo == stats.power.hi);
  CHECK(stats.hour.lo == stats.hour.hi);
}

TEST_CASE("compute_norm_stats finds power extrema") {
  std::vector<Reading> rs{{100, "a", 0.0}, {200, "a", 200.0}};
  auto stats = compute_norm_stats(rs);
  CHECK(stats.power.lo == 0.0);
  CHECK(stats.power.hi == 200.0);
}

TEST_CASE("compute_norm_stats spans calendar months") {
  // 2016-01-15 and 2016-03-15.
  std::vector<Reading> rs{{1452816000, "a", 1.0}, {1458000000, "a", 1.0}};
  auto stats = compute_norm_stats(rs);
  CHECK(stats.month.lo == 1.0);
  CHECK(stats.month.hi == 3.0);
}

TEST_CASE("compute_norm_stats rejects empty input") {
  REQUIRE_THROWS_MATCHES(compute_norm_stats({}), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.code() == Errc::empty_trace;
                         }));
}

TEST_CASE("extract_features decomposes calendar fields in UTC") {
  // 2016-03-15T14:00:00Z
  Reading r{1458050400, "a", 10.0};
  auto stats = compute_norm_stats(std::vector<Reading>{{1451606400, "a", 0.0}, r});
  auto f = extract_features(r, stats);
  CHECK(f.hour == 14.0);
  CHECK(f.month == 3.0);
  CHECK(f.year == 2016.0);
}

TEST_CASE("extract_features normalizes boundary and clamps overflow") {
  std::vector<Reading> rs{{100, "a", 10.0}, {200, "a", 110.0}};
  auto stats = compute_norm_stats(rs);
  CHECK(extract_features({300, "a", 110.0}, stats).power_n == 1.0);
  CHECK(extract_features({300, "a", 500.0}, stats).power_n == 1.0);
  CHECK(extract_features({300, "a", 10.0}, stats).power_n == 0.0);
}

TEST_CASE("normalized features stay in unit range") {
  Rng rng(11);
  std::vector<Reading> rs;
  std::int64_t ts = 1400000000;
  for (int i = 0; i < 500; ++i) {
    ts += static_cast<std::int64_t>(rng.uniform_below(100000));
    rs.push_back({ts, "a", rng.uniform01() * 900.0});
  }
  auto stats = compute_norm_stats(std::span<const Reading>(rs).subspan(0, 250));
  for (const auto& r : rs) {
    auto f = extract_features(r, stats);
    for (double v : f.normalized()) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("align_frames with identical sampling needs no fill") {
  std::map<std::string, std::vector<Reading>> per_device{
      {"a", {{10, "a", 1.0}, {20, "a", 2.0}}},
      {"b", {{10, "b", 5.0}, {20, "b", 6.0}}},
  };
  std::vector<std::string> registry{"a", "b"};
  auto frames = align_frames(per_device, registry);
  REQUIRE(frames.size() == 2);
  CHECK(frames[0].power == std::vector<double>{1.0, 5.0});
  CHECK(frames[1].power == std::vector<double>{2.0, 6.0});
}

TEST_CASE("align_frames carries the previous value forward") {
  std::map<std::string, std::vector<Reading>> per_device{
      {"a", {{10, "a", 1.0}, {20, "a", 2.0}}},
      {"b", {{10, "b", 5.0}}},
  };
  std::vector<std::string> registry{"a", "b"};
  auto frames = align_frames(per_device, registry);
  REQUIRE(frames.size() == 2);
  CHECK(frames[1].power == std::vector<double>{2.0, 5.0});
}

TEST_CASE("align_frames passes a single device through verbatim") {
  std::map<std::string, std::vector<Reading>> per_device{
      {"a", {{10, "a", 1.0}, {25, "a", 2.0}, {40, "a", 0.5}}},
  };
  std::vector<std::string> registry{"a"};
  auto frames = align_frames(per_device, registry);
  REQUIRE(frames.size() == 3);
  CHECK(frames[2].timestamp == 40);
  CHECK(frames[2].power == std::vector<double>{0.5});
}

TEST_CASE("align_frames rejects devices with no readings") {
  std::map<std::string, std::vector<Reading>> per_device{{"a", {{10, "a", 1.0}}}};
  std::vector<std::string> registry{"a", "ghost"};
  REQUIRE_THROWS_MATCHES(align_frames(per_device, registry), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.code() == Errc::device_never_seen;
                         }));
}

TEST_CASE("align_frames matches a brute-force last-observation scan") {
  Rng rng(3);
  std::map<std::string, std::vector<Reading>> per_device;
  std::vector<std::string> registry{"a", "b", "c"};
  for (const auto& dev : registry) {
    std::int64_t ts = 1000;
    for (int i = 0; i < 60; ++i) {
      ts += 1 + static_cast<std::int64_t>(rng.uniform_below(30));
      per_device[dev].push_back({ts, dev, std::floor(rng.uniform01() * 100.0)});
    }
  }
  auto frames = align_frames(per_device, registry);

  // Strictly increasing timestamps covering the union.
  std::size_t union_size = 0;
  {
    std::vector<std::int64_t> all;
    for (const auto& [dev, rs] : per_device)
      for (const auto& r : rs) all.push_back(r.timestamp);
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    union_size = all.size();
  }
  REQUIRE(frames.size() == union_size);
  for (std::size_t t = 1; t < frames.size(); ++t)
    REQUIRE(frames[t].timestamp > frames[t - 1].timestamp);

  for (const auto& frame : frames) {
    for (std::size_t d = 0; d < registry.size(); ++d) {
      const auto& stream = per_device[registry[d]];
      double expect = stream.front().power;
      for (const auto& r : stream)
        if (r.timestamp <= frame.timestamp) expect = r.power;
      REQUIRE(frame.power[d] == expect);
    }
  }
}

TEST_CASE("split_train_test cuts the chronological prefix") {
  std::vector<AlignedFrame> frames(10);
  for (int i = 0; i < 10; ++i) frames[i].timestamp = i;
  auto [train, test] = split_train_test(frames, 0.5);
  CHECK(train.size() == 5);
  CHECK(test.size() == 5);
  CHECK(train.front().timestamp == 0);
  CHECK(test.front().timestamp == 5);
}

TEST_CASE("split_train_test applies round() to the cut") {
  std::vector<AlignedFrame> frames(3'000'000 / 1000);  // scaled: 3000 frames
  auto [train, test] = split_train_test(frames, 2.0 / 3.0);
  CHECK(train.size() == 2000);
  CHECK(test.size() == 1000);
}

TEST_CASE("split_train_test rejects out-of-range fractions") {
  std::vector<AlignedFrame> frames(10);
  CHECK_THROWS_AS(split_train_test(frames, 1.0), Error);
  CHECK_THROWS_AS(split_train_test(frames, 0.0), Error);
  CHECK_THROWS_AS(split_train_test(frames, -0.2), Error);
}
