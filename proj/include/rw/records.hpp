#pragma once

#include <array>
#include <optional>
#include <string>

#include "rw/time_util.hpp"

namespace rw {

// One per-lane sensor reading on the 2-minute grid. A record timestamped t
// summarizes the window [t, t + 2 min). Measurements may be missing.
struct RawLaneRecord {
    Timestamp timestamp = 0;
    std::string sensor_id;
    int direction = 0;  // 0 or 1
    int lane = 0;
    std::optional<long> vehicle_count;      // cars per 2 minutes
    std::optional<double> avg_speed_kmh;
    std::optional<double> occupancy;        // fraction of the window occupied
};

// Same shape as RawLaneRecord, but timestamp is snapped to the grid and all
// present fields are within domain.
using CleanLaneRecord = RawLaneRecord;

enum class Quality { Ok, Partial, Missing };

const char* quality_name(Quality q);

// Lane-averaged reading per (sensor, direction, timestamp). The measurement
// fields are meaningful only when quality != Missing.
struct DirectionalSample {
    Timestamp timestamp = 0;
    std::string sensor_id;
    int direction = 0;
    double mean_count = 0.0;
    double mean_speed_kmh = 0.0;
    double mean_occupancy = 0.0;
    int valid_lanes = 0;  // lanes with all three measurements present
    Quality quality = Quality::Missing;
};

// Feature slots, in file and model order.
enum FeatureIndex {
    kFeatDVelocity = 0,
    kFeatDOccupancy = 1,
    kFeatDCapacityUsage = 2,
    kFeatWeekday = 3,
    kFeatRush = 4,
};
constexpr int kFeatureCount = 5;

// The five model inputs for one consecutive pair of directional samples,
// stamped with the later reading's timestamp.
struct FeatureVector {
    Timestamp t_end = 0;
    std::string sensor_id;
    int direction = 0;
    std::array<double, kFeatureCount> x{};
    int label = -1;  // -1 until labeled
};

}  // namespace rw
