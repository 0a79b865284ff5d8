#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "rw/records.hpp"

namespace rw::simgen {

// Daily flow shape shared by all sensors. Flow is cars per lane per 2-minute
// slot; speed is derived from the flow level through a monotone slowdown.
struct DiurnalProfile {
    double peak_flow = 40.0;
    double night_flow = 4.0;
    double weekend_attenuation = 0.6;          // weekend flow = attenuation * weekday flow
    double speed_congestion_drop = 0.45;       // fraction of free-flow speed lost at full congestion
    double occupancy_scale = 1.3;              // occupancy = count / (speed * scale), clamped to [0,1]
};

struct FaultRates {
    double drop = 0.002;         // whole record lost
    double missing_field = 0.005;  // one measurement replaced by missing
    double obstruction = 0.001;  // all three measurements forced to 0
};

struct SimConfig {
    int sensor_count = 7;
    int lanes_per_direction = 4;
    Timestamp start_ts = 0;  // defaulted to 2015-01-01 by default_sim_config()
    Timestamp end_ts = 0;    // exclusive; defaulted to 2016-01-01
    double free_flow_speed_kmh = 110.0;
    double speed_cap_kmh = 125.0;
    DiurnalProfile profile;
    int incident_count = 72;
    double incident_duration_min_lo = 12.0;
    double incident_duration_min_hi = 14.0;
    double incident_speed_drop_lo = 0.2;
    double incident_speed_drop_hi = 0.35;
    FaultRates faults;
    double noise_sigma = 0.02;  // log-normal jitter on count and speed
    int utc_offset_min = 180;   // local clock used for the diurnal shape
    std::uint64_t seed = 42;
};

SimConfig default_sim_config();

// Throws std::invalid_argument naming the offending parameter.
void validate_config(const SimConfig& cfg);

enum class IncidentKind { SeriousAccident, MinorAccident, RoadWork, HandicappedVehicle };

const char* incident_kind_name(IncidentKind k);
const char* incident_kind_description(IncidentKind k);

struct IncidentScript {
    std::string event_id;
    Timestamp start_time = 0;  // second resolution, on no particular grid
    std::string sensor_id;
    int direction = 0;
    IncidentKind kind = IncidentKind::MinorAccident;
    double duration_min = 0.0;
    double speed_drop_factor = 0.0;  // in (0,1); speed multiplier at onset
};

struct FlowPoint {
    double count = 0.0;
    double speed_kmh = 0.0;
    double occupancy = 0.0;
};

// Expected per-lane (count, speed, occupancy) for a minute of the local day.
FlowPoint diurnal_flow(int minute_of_day, bool is_weekday, const SimConfig& cfg);

// Ramp from speed_drop_factor at onset back to 1 linearly over the duration.
// Occupancy is raised toward 0.9 and count reduced by the same factor.
// Outside [0, duration) the baseline is returned unchanged.
FlowPoint apply_incident(const FlowPoint& baseline, const IncidentScript& incident,
                         double minutes_since_start);

// Applies the configured faults in place. Returns false when the record is
// dropped entirely. Engine draws, in fixed order: drop, obstruction,
// field-missing, field-selector (always consumed).
bool corrupt(RawLaneRecord& record, const FaultRates& rates, std::mt19937_64& rng);

// Incident schedule for the configured range: exactly incident_count events,
// non-overlapping per (sensor, direction), sorted by start time.
std::vector<IncidentScript> schedule_incidents(const SimConfig& cfg);

using RecordSink = std::function<void(const RawLaneRecord&)>;

// Emits one record per (sensor, direction, lane) per 2-minute slot, minus
// dropped records, in (timestamp, sensor, direction, lane) order. Pure in
// (cfg.seed, cfg): identical configs give identical streams.
std::vector<IncidentScript> simulate(const SimConfig& cfg, const RecordSink& sink);

}  // namespace rw::simgen
