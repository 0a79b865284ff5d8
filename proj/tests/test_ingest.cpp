#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "rw/ingest.hpp"

using namespace rw;
using namespace rw::ingest;

namespace {

RawLaneRecord lane_record(Timestamp ts, int lane, std::optional<long> count,
                          std::optional<double> speed, std::optional<double> occ) {
    RawLaneRecord r;
    r.timestamp = ts;
    r.sensor_id = "S1";
    r.direction = 0;
    r.lane = lane;
    r.vehicle_count = count;
    r.avg_speed_kmh = speed;
    r.occupancy = occ;
    return r;
}

DirectionalSample sample_at(Timestamp ts, Quality q = Quality::Ok) {
    DirectionalSample s;
    s.timestamp = ts;
    s.sensor_id = "S1";
    s.direction = 0;
    s.quality = q;
    s.valid_lanes = q == Quality::Missing ? 0 : 4;
    return s;
}

}  // namespace

TEST_CASE("parse_line decodes a fully populated reading") {
    RawLaneRecord r;
    ParseError err;
    REQUIRE(parse_line("2015-01-01T00:02:00Z,S1,1,2,12,95.50,0.0830", 5, r, err));
    Timestamp expect = 0;
    REQUIRE(parse_iso8601("2015-01-01T00:02:00Z", expect));
    CHECK(r.timestamp == expect);
    CHECK(r.sensor_id == "S1");
    CHECK(r.direction == 1);
    CHECK(r.lane == 2);
    CHECK(r.vehicle_count == 12);
    CHECK(r.avg_speed_kmh == doctest::Approx(95.5));
    CHECK(r.occupancy == doctest::Approx(0.083));
}

TEST_CASE("parse_line treats empty fields and NULL as missing") {
    RawLaneRecord r;
    ParseError err;
    REQUIRE(parse_line("2015-01-01T00:02:00Z,S1,0,0,NULL,95.50,", 1, r, err));
    CHECK_FALSE(r.vehicle_count.has_value());
    CHECK(r.avg_speed_kmh == doctest::Approx(95.5));
    CHECK_FALSE(r.occupancy.has_value());
}

TEST_CASE("parse_line reports malformed input with the line number") {
    RawLaneRecord r;
    ParseError err;
    SUBCASE("garbage") {
        CHECK_FALSE(parse_line("this is not a reading", 42, r, err));
        CHECK(err.line_no == 42);
        CHECK_FALSE(err.reason.empty());
    }
    SUBCASE("too many fields") {
        CHECK_FALSE(parse_line("2015-01-01T00:02:00Z,S1,0,0,1,2,3,4", 3, r, err));
        CHECK(err.line_no == 3);
    }
    SUBCASE("bad timestamp") {
        CHECK_FALSE(parse_line("2015-13-01T00:02:00Z,S1,0,0,1,2,0.1", 9, r, err));
    }
    SUBCASE("direction out of domain") {
        CHECK_FALSE(parse_line("2015-01-01T00:02:00Z,S1,2,0,1,2,0.1", 9, r, err));
    }
    SUBCASE("non-numeric measurement") {
        CHECK_FALSE(parse_line("2015-01-01T00:02:00Z,S1,0,0,twelve,2,0.1", 9, r, err));
    }
}

TEST_CASE("validate snaps near-grid timestamps and rejects far ones") {
    ValidationLimits limits;
    CleanLaneRecord clean;
    bool dead = false;

    SUBCASE("one second late snaps back") {
        // 08:06:01 UTC -> 08:06:00
        RawLaneRecord r = lane_record(1420099561, 0, 10, 80.0, 0.1);
        REQUIRE(validate(r, limits, clean, dead) == RejectReason::None);
        CHECK(clean.timestamp == 1420099560);
        CHECK(clean.timestamp % kSlotSeconds == 0);
    }
    SUBCASE("59 seconds off still snaps (rounding up)") {
        RawLaneRecord r = lane_record(1420099560 + 61, 0, 10, 80.0, 0.1);
        REQUIRE(validate(r, limits, clean, dead) == RejectReason::None);
        CHECK(clean.timestamp == 1420099560 + kSlotSeconds);
    }
    SUBCASE("beyond tolerance rejects") {
        ValidationLimits tight = limits;
        tight.snap_tolerance_s = 5;
        RawLaneRecord r = lane_record(1420099560 + 30, 0, 10, 80.0, 0.1);
        CHECK(validate(r, tight, clean, dead) == RejectReason::OffGridTimestamp);
    }
}

TEST_CASE("validate range checks and the dead-lane triple") {
    ValidationLimits limits;
    CleanLaneRecord clean;
    bool dead = false;
    const Timestamp ts = 1420099560;

    CHECK(validate(lane_record(ts, 0, 10, 80.0, 1.2), limits, clean, dead) ==
          RejectReason::OutOfRangeOccupancy);
    CHECK(validate(lane_record(ts, 0, 10, -1.0, 0.2), limits, clean, dead) ==
          RejectReason::OutOfRangeSpeed);
    CHECK(validate(lane_record(ts, 0, 10, 260.0, 0.2), limits, clean, dead) ==
          RejectReason::OutOfRangeSpeed);
    CHECK(validate(lane_record(ts, 0, 2000, 80.0, 0.2), limits, clean, dead) ==
          RejectReason::OutOfRangeCount);

    // (0, 0, 0) is physically implausible: an empty road has no speed reading.
    REQUIRE(validate(lane_record(ts, 0, 0, 0.0, 0.0), limits, clean, dead) == RejectReason::None);
    CHECK(dead);
    CHECK_FALSE(clean.vehicle_count.has_value());
    CHECK_FALSE(clean.avg_speed_kmh.has_value());
    CHECK_FALSE(clean.occupancy.has_value());

    // A zero count alone (with a plausible speed) is legitimate.
    REQUIRE(validate(lane_record(ts, 0, 0, 80.0, 0.0), limits, clean, dead) == RejectReason::None);
    CHECK_FALSE(dead);
    CHECK(clean.vehicle_count == 0);
}

TEST_CASE("aggregate averages per field over present lanes") {
    const Timestamp ts = 1420099560;
    SUBCASE("all lanes complete") {
        std::vector<CleanLaneRecord> lanes = {
            lane_record(ts, 0, 10, 80.0, 0.10),
            lane_record(ts, 1, 20, 90.0, 0.20),
            lane_record(ts, 2, 30, 100.0, 0.30),
            lane_record(ts, 3, 40, 110.0, 0.40),
        };
        const DirectionalSample s = aggregate(lanes, 4);
        CHECK(s.mean_count == doctest::Approx(25.0));
        CHECK(s.mean_speed_kmh == doctest::Approx(95.0));
        CHECK(s.mean_occupancy == doctest::Approx(0.25));
        CHECK(s.valid_lanes == 4);
        CHECK(s.quality == Quality::Ok);
    }
    SUBCASE("a lane missing one field is partial, but its other fields count") {
        std::vector<CleanLaneRecord> lanes = {
            lane_record(ts, 0, 10, 80.0, 0.10),
            lane_record(ts, 1, 20, std::nullopt, 0.30),
        };
        const DirectionalSample s = aggregate(lanes, 2);
        CHECK(s.mean_count == doctest::Approx(15.0));    // both counts present
        CHECK(s.mean_speed_kmh == doctest::Approx(80.0));  // only lane 0
        CHECK(s.mean_occupancy == doctest::Approx(0.20));
        CHECK(s.valid_lanes == 1);
        CHECK(s.quality == Quality::Partial);
    }
    SUBCASE("no complete lane yields a missing sample") {
        std::vector<CleanLaneRecord> lanes = {
            lane_record(ts, 0, std::nullopt, std::nullopt, std::nullopt),
            lane_record(ts, 1, 5, std::nullopt, std::nullopt),
        };
        const DirectionalSample s = aggregate(lanes, 2);
        CHECK(s.quality == Quality::Missing);
        CHECK(s.valid_lanes == 0);
    }
    SUBCASE("fewer lanes than configured is partial even when all are complete") {
        std::vector<CleanLaneRecord> lanes = {lane_record(ts, 0, 10, 80.0, 0.10)};
        CHECK(aggregate(lanes, 4).quality == Quality::Partial);
    }
    SUBCASE("mixed keys throw") {
        std::vector<CleanLaneRecord> lanes = {lane_record(ts, 0, 10, 80.0, 0.10),
                                              lane_record(ts + kSlotSeconds, 1, 10, 80.0, 0.10)};
        CHECK_THROWS_AS(aggregate(lanes, 4), std::invalid_argument);
        CHECK_THROWS_AS(aggregate(std::vector<CleanLaneRecord>{}, 4), std::invalid_argument);
    }
}

TEST_CASE("regularize fills gaps, drops duplicates, keeps the first") {
    const Timestamp t0 = 1420099560;
    std::vector<DirectionalSample> series = {sample_at(t0), sample_at(t0 + 240),
                                             sample_at(t0 + 240, Quality::Partial),
                                             sample_at(t0 + 480)};
    const auto result = regularize(series, t0, t0 + 600);
    REQUIRE(result.series.size() == 5);
    CHECK(result.duplicates == 1);
    CHECK(result.series[0].quality == Quality::Ok);
    CHECK(result.series[1].quality == Quality::Missing);  // t0+120 was absent
    CHECK(result.series[2].quality == Quality::Ok);       // first of the duplicates wins
    CHECK(result.series[3].quality == Quality::Missing);
    CHECK(result.series[4].quality == Quality::Ok);
    for (std::size_t i = 0; i < result.series.size(); ++i) {
        CHECK(result.series[i].timestamp == t0 + static_cast<Timestamp>(i) * kSlotSeconds);
    }
}

TEST_CASE("regularize is idempotent on an already regular series") {
    const Timestamp t0 = 1420099560;
    std::vector<DirectionalSample> series;
    for (int i = 0; i < 10; ++i) series.push_back(sample_at(t0 + i * kSlotSeconds));
    const auto once = regularize(series, t0, t0 + 10 * kSlotSeconds);
    const auto twice = regularize(once.series, t0, t0 + 10 * kSlotSeconds);
    REQUIRE(once.series.size() == twice.series.size());
    CHECK(twice.duplicates == 0);
    for (std::size_t i = 0; i < once.series.size(); ++i) {
        CHECK(once.series[i].timestamp == twice.series[i].timestamp);
        CHECK(once.series[i].quality == twice.series[i].quality);
    }
}

TEST_CASE("regularize rejects unsorted input") {
    const Timestamp t0 = 1420099560;
    std::vector<DirectionalSample> series = {sample_at(t0 + 240), sample_at(t0)};
    CHECK_THROWS_AS(regularize(series, t0, t0 + 480), std::invalid_argument);
}

TEST_CASE("conservation: every parsed record is accepted, rejected or deduplicated") {
    // A small hand-rolled batch pushed through parse -> validate, counting fates.
    const std::vector<std::string> lines = {
        "2015-01-01T00:02:00Z,S1,0,0,10,90.0,0.10",
        "2015-01-01T00:02:00Z,S1,0,1,NULL,90.0,0.10",
        "2015-01-01T00:02:01Z,S1,0,2,10,90.0,0.10",   // snaps
        "2015-01-01T00:02:00Z,S1,0,3,10,90.0,1.50",   // bad occupancy
        "garbage",                                     // parse failure
        "2015-01-01T00:03:30Z,S1,0,0,10,90.0,0.10",   // 30 s early for 00:04, snaps forward
        "2015-01-01T00:02:00Z,S1,0,0,0,0.0,0.0",      // dead lane triple
    };
    ValidationLimits limits;
    std::size_t accepted = 0, rejected = 0, dead = 0;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        RawLaneRecord raw;
        ParseError err;
        if (!parse_line(lines[i], i + 1, raw, err)) {
            ++rejected;
            continue;
        }
        CleanLaneRecord clean;
        bool dead_lane = false;
        if (validate(raw, limits, clean, dead_lane) != RejectReason::None) {
            ++rejected;
            continue;
        }
        ++accepted;
        if (dead_lane) ++dead;
    }
    CHECK(accepted + rejected == lines.size());
    CHECK(accepted == 5);
    CHECK(rejected == 2);
    CHECK(dead == 1);
}
