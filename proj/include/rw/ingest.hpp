#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rw/records.hpp"

namespace rw::ingest {

struct ParseError {
    std::size_t line_no = 0;
    std::string reason;
};

// Decodes one line of the sensor-reading format:
//   timestamp,sensor_id,direction,lane,count,speed_kmh,occupancy
// Empty measurement fields or the literal NULL token become missing.
// Returns false and fills err on malformed input.
bool parse_line(std::string_view line, std::size_t line_no, RawLaneRecord& out, ParseError& err);

enum class RejectReason {
    None,
    ParseFailure,
    OutOfRangeOccupancy,
    OutOfRangeSpeed,
    OutOfRangeCount,
    OffGridTimestamp,
};

const char* reject_reason_name(RejectReason r);

struct ValidationLimits {
    double max_speed_kmh = 250.0;
    long max_count = 1000;
    int snap_tolerance_s = 60;  // half the cadence
};

// Snaps the timestamp to the 2-minute grid (within tolerance), range-checks
// present fields, and reclassifies the all-zero triple as all-missing
// (dead-lane suspect, flagged via dead_lane). Returns None on acceptance.
RejectReason validate(const RawLaneRecord& raw, const ValidationLimits& limits,
                      CleanLaneRecord& clean, bool& dead_lane);

// Arithmetic mean per field over the lanes where that field is present.
// A lane counts toward valid_lanes only when all three fields are present;
// valid_lanes == 0 yields quality Missing with measurements unset.
// Throws std::invalid_argument on key mismatch or empty input.
DirectionalSample aggregate(std::span<const CleanLaneRecord> records, int configured_lanes);

struct RegularizeResult {
    std::vector<DirectionalSample> series;
    std::size_t duplicates = 0;
};

// One entry per 2-minute slot in [range_start, range_end): gaps become
// quality=Missing placeholders, duplicate timestamps keep the first
// occurrence. Throws std::invalid_argument on unsorted input.
RegularizeResult regularize(std::span<const DirectionalSample> series, Timestamp range_start,
                            Timestamp range_end);

}  // namespace rw::ingest
