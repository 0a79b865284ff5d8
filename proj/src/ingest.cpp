#include "rw/ingest.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rw::ingest {

namespace {

bool next_field(std::string_view line, std::size_t& pos, std::string_view& out) {
    if (pos > line.size()) return false;
    const std::size_t comma = line.find(',', pos);
    if (comma == std::string_view::npos) {
        out = line.substr(pos);
        pos = line.size() + 1;
    } else {
        out = line.substr(pos, comma - pos);
        pos = comma + 1;
    }
    return true;
}

bool is_missing(std::string_view f) { return f.empty() || f == "NULL"; }

bool parse_long(std::string_view f, long& out) {
    const char* first = f.data();
    const char* last = f.data() + f.size();
    auto [p, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && p == last;
}

bool parse_double(std::string_view f, double& out) {
    const char* first = f.data();
    const char* last = f.data() + f.size();
    auto [p, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && p == last;
}

}  // namespace

bool parse_line(std::string_view line, std::size_t line_no, RawLaneRecord& out, ParseError& err) {
    auto fail = [&](const char* reason) {
        err.line_no = line_no;
        err.reason = reason;
        return false;
    };
    std::string_view f[7];
    std::size_t pos = 0;
    for (int i = 0; i < 7; ++i) {
        if (!next_field(line, pos, f[i])) return fail("expected 7 comma-separated fields");
    }
    if (pos <= line.size()) return fail("expected 7 comma-separated fields");
    if (!parse_iso8601(f[0], out.timestamp)) return fail("unparseable timestamp");
    if (f[1].empty()) return fail("empty sensor id");
    out.sensor_id.assign(f[1]);
    long dir = 0;
    if (!parse_long(f[2], dir) || (dir != 0 && dir != 1)) return fail("direction must be 0 or 1");
    out.direction = static_cast<int>(dir);
    long lane = 0;
    if (!parse_long(f[3], lane) || lane < 0) return fail("lane must be a non-negative integer");
    out.lane = static_cast<int>(lane);
    if (is_missing(f[4])) {
        out.vehicle_count.reset();
    } else {
        long v = 0;
        if (!parse_long(f[4], v)) return fail("non-numeric count");
        out.vehicle_count = v;
    }
    if (is_missing(f[5])) {
        out.avg_speed_kmh.reset();
    } else {
        double v = 0;
        if (!parse_double(f[5], v)) return fail("non-numeric speed");
        out.avg_speed_kmh = v;
    }
    if (is_missing(f[6])) {
        out.occupancy.reset();
    } else {
        double v = 0;
        if (!parse_double(f[6], v)) return fail("non-numeric occupancy");
        out.occupancy = v;
    }
    return true;
}

const char* reject_reason_name(RejectReason r) {
    switch (r) {
        case RejectReason::None: return "none";
        case RejectReason::ParseFailure: return "parse";
        case RejectReason::OutOfRangeOccupancy: return "out-of-range occupancy";
        case RejectReason::OutOfRangeSpeed: return "out-of-range speed";
        case RejectReason::OutOfRangeCount: return "out-of-range count";
        case RejectReason::OffGridTimestamp: return "off-grid timestamp";
    }
    return "?";
}

RejectReason validate(const RawLaneRecord& raw, const ValidationLimits& limits,
                      CleanLaneRecord& clean, bool& dead_lane) {
    dead_lane = false;
    const Timestamp snapped =
        ((raw.timestamp + kSlotSeconds / 2) / kSlotSeconds) * kSlotSeconds;
    if (std::llabs(raw.timestamp - snapped) > limits.snap_tolerance_s)
        return RejectReason::OffGridTimestamp;
    if (raw.occupancy && (*raw.occupancy < 0.0 || *raw.occupancy > 1.0))
        return RejectReason::OutOfRangeOccupancy;
    if (raw.avg_speed_kmh && (*raw.avg_speed_kmh < 0.0 || *raw.avg_speed_kmh > limits.max_speed_kmh))
        return RejectReason::OutOfRangeSpeed;
    if (raw.vehicle_count && (*raw.vehicle_count < 0 || *raw.vehicle_count > limits.max_count))
        return RejectReason::OutOfRangeCount;
    clean = raw;
    clean.timestamp = snapped;
    if (clean.vehicle_count && clean.avg_speed_kmh && clean.occupancy &&
        *clean.vehicle_count == 0 && *clean.avg_speed_kmh == 0.0 && *clean.occupancy == 0.0) {
        // An empty road would report a missing speed, not 0; treat as sensor fault.
        clean.vehicle_count.reset();
        clean.avg_speed_kmh.reset();
        clean.occupancy.reset();
        dead_lane = true;
    }
    return RejectReason::None;
}

DirectionalSample aggregate(std::span<const CleanLaneRecord> records, int configured_lanes) {
    if (records.empty()) throw std::invalid_argument("aggregate: empty record set");
    DirectionalSample out;
    out.timestamp = records[0].timestamp;
    out.sensor_id = records[0].sensor_id;
    out.direction = records[0].direction;
    double sum_count = 0, sum_speed = 0, sum_occ = 0;
    int n_count = 0, n_speed = 0, n_occ = 0;
    for (const CleanLaneRecord& r : records) {
        if (r.timestamp != out.timestamp || r.sensor_id != out.sensor_id ||
            r.direction != out.direction) {
            throw std::invalid_argument("aggregate: records do not share one (sensor, direction, timestamp) key");
        }
        if (r.vehicle_count) { sum_count += static_cast<double>(*r.vehicle_count); ++n_count; }
        if (r.avg_speed_kmh) { sum_speed += *r.avg_speed_kmh; ++n_speed; }
        if (r.occupancy) { sum_occ += *r.occupancy; ++n_occ; }
        if (r.vehicle_count && r.avg_speed_kmh && r.occupancy) ++out.valid_lanes;
    }
    if (out.valid_lanes == 0) {
        out.quality = Quality::Missing;
        return out;
    }
    out.mean_count = sum_count / n_count;
    out.mean_speed_kmh = sum_speed / n_speed;
    out.mean_occupancy = sum_occ / n_occ;
    out.quality = out.valid_lanes >= configured_lanes ? Quality::Ok : Quality::Partial;
    return out;
}

RegularizeResult regularize(std::span<const DirectionalSample> series, Timestamp range_start,
                            Timestamp range_end) {
    RegularizeResult out;
    std::size_t i = 0;
    Timestamp prev = std::numeric_limits<Timestamp>::min();
    for (const DirectionalSample& s : series) {
        if (s.timestamp < prev) throw std::invalid_argument("regularize: input not sorted by timestamp");
        prev = s.timestamp;
    }
    for (Timestamp ts = range_start; ts < range_end; ts += kSlotSeconds) {
        while (i < series.size() && series[i].timestamp < ts) ++i;
        if (i < series.size() && series[i].timestamp == ts) {
            out.series.push_back(series[i]);
            ++i;
            while (i < series.size() && series[i].timestamp == ts) {
                ++out.duplicates;
                ++i;
            }
        } else {
            DirectionalSample gap;
            gap.timestamp = ts;
            if (!series.empty()) {
                gap.sensor_id = series[0].sensor_id;
                gap.direction = series[0].direction;
            }
            gap.quality = Quality::Missing;
            out.series.push_back(std::move(gap));
        }
    }
    return out;
}

}  // namespace rw::ingest
