#include "rw/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "rw/rng.hpp"

namespace rw::simgen {

SimConfig default_sim_config() {
    SimConfig cfg;
    parse_date("2015-01-01", cfg.start_ts);
    parse_date("2016-01-01", cfg.end_ts);
    return cfg;
}

void validate_config(const SimConfig& cfg) {
    auto fail = [](const char* what) { throw std::invalid_argument(std::string("sim config: ") + what); };
    if (cfg.sensor_count <= 0) fail("sensor_count must be positive");
    if (cfg.lanes_per_direction <= 0) fail("lanes_per_direction must be positive");
    if (cfg.end_ts <= cfg.start_ts) fail("end_date must be after start_date");
    if (cfg.free_flow_speed_kmh <= 0) fail("free_flow_speed_kmh must be positive");
    if (cfg.speed_cap_kmh < cfg.free_flow_speed_kmh) fail("speed_cap_kmh must be >= free_flow_speed_kmh");
    if (cfg.profile.peak_flow <= 0 || cfg.profile.night_flow < 0) fail("flow levels must be non-negative");
    if (cfg.profile.night_flow >= cfg.profile.peak_flow) fail("night_flow must be below peak_flow");
    if (cfg.profile.weekend_attenuation < 0 || cfg.profile.weekend_attenuation > 1)
        fail("weekend_attenuation must be in [0,1]");
    if (cfg.profile.occupancy_scale <= 0) fail("occupancy_scale must be positive");
    if (cfg.incident_count < 0) fail("incident_count must be non-negative");
    if (cfg.incident_duration_min_lo <= 0 || cfg.incident_duration_min_hi < cfg.incident_duration_min_lo)
        fail("incident duration range invalid");
    if (cfg.incident_speed_drop_lo <= 0 || cfg.incident_speed_drop_hi >= 1 ||
        cfg.incident_speed_drop_hi < cfg.incident_speed_drop_lo)
        fail("incident speed-drop range must lie inside (0,1)");
    for (double r : {cfg.faults.drop, cfg.faults.missing_field, cfg.faults.obstruction}) {
        if (r < 0 || r > 1) fail("fault rates must be probabilities in [0,1]");
    }
    if (cfg.noise_sigma < 0) fail("noise_sigma must be non-negative");
}

const char* incident_kind_name(IncidentKind k) {
    switch (k) {
        case IncidentKind::SeriousAccident: return "serious-accident";
        case IncidentKind::MinorAccident: return "minor-accident";
        case IncidentKind::RoadWork: return "road-work";
        case IncidentKind::HandicappedVehicle: return "handicapped-vehicle";
    }
    return "?";
}

const char* incident_kind_description(IncidentKind k) {
    switch (k) {
        case IncidentKind::SeriousAccident: return "multi-vehicle collision blocking lanes";
        case IncidentKind::MinorAccident: return "minor collision on the shoulder";
        case IncidentKind::RoadWork: return "unplanned lane maintenance";
        case IncidentKind::HandicappedVehicle: return "stopped vehicle on the roadway";
    }
    return "?";
}

namespace {

// Weekday congestion level over the local day, piecewise linear in minutes.
constexpr double kCongestionKnots[][2] = {
    {0, 0.02},    {300, 0.02},  {330, 0.08}, {420, 1.00},  {570, 1.00},
    {660, 0.35},  {960, 0.35},  {1020, 0.85}, {1140, 0.85}, {1230, 0.40},
    {1380, 0.03}, {1440, 0.02},
};

double congestion_level(double minute) {
    constexpr int n = static_cast<int>(sizeof(kCongestionKnots) / sizeof(kCongestionKnots[0]));
    for (int i = 1; i < n; ++i) {
        if (minute <= kCongestionKnots[i][0]) {
            const double m0 = kCongestionKnots[i - 1][0], v0 = kCongestionKnots[i - 1][1];
            const double m1 = kCongestionKnots[i][0], v1 = kCongestionKnots[i][1];
            return v0 + (v1 - v0) * (minute - m0) / (m1 - m0);
        }
    }
    return kCongestionKnots[n - 1][1];
}

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

}  // namespace

FlowPoint diurnal_flow(int minute_of_day, bool is_weekday, const SimConfig& cfg) {
    if (minute_of_day < 0 || minute_of_day >= 1440)
        throw std::invalid_argument("diurnal_flow: minute_of_day out of range");
    const DiurnalProfile& p = cfg.profile;
    const double c = congestion_level(static_cast<double>(minute_of_day));
    double flow = p.night_flow + (p.peak_flow - p.night_flow) * c;
    if (!is_weekday) flow *= p.weekend_attenuation;
    const double u = clamp01((flow - p.night_flow) / (p.peak_flow - p.night_flow));
    const double speed = std::min(cfg.speed_cap_kmh, cfg.free_flow_speed_kmh * (1.0 - p.speed_congestion_drop * u));
    FlowPoint out;
    out.count = flow;
    out.speed_kmh = speed;
    out.occupancy = clamp01(flow / (speed * p.occupancy_scale));
    return out;
}

FlowPoint apply_incident(const FlowPoint& baseline, const IncidentScript& incident,
                         double minutes_since_start) {
    if (minutes_since_start < 0 || minutes_since_start >= incident.duration_min) return baseline;
    const double f = incident.speed_drop_factor +
                     (1.0 - incident.speed_drop_factor) * (minutes_since_start / incident.duration_min);
    FlowPoint out;
    out.speed_kmh = baseline.speed_kmh * f;
    out.count = baseline.count * f;
    out.occupancy = baseline.occupancy + (0.9 - baseline.occupancy) * (1.0 - f);
    return out;
}

bool corrupt(RawLaneRecord& record, const FaultRates& rates, std::mt19937_64& rng) {
    const double u_drop = uniform01(rng);
    const double u_obstruct = uniform01(rng);
    const double u_missing = uniform01(rng);
    const double u_field = uniform01(rng);
    if (u_drop < rates.drop) return false;
    if (u_obstruct < rates.obstruction) {
        record.vehicle_count = 0;
        record.avg_speed_kmh = 0.0;
        record.occupancy = 0.0;
        return true;
    }
    if (u_missing < rates.missing_field) {
        const int field = std::min(2, static_cast<int>(u_field * 3.0));
        if (field == 0) record.vehicle_count.reset();
        else if (field == 1) record.avg_speed_kmh.reset();
        else record.occupancy.reset();
    }
    return true;
}

namespace {

std::string sensor_name(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "S%d", index + 1);
    return buf;
}

}  // namespace

std::vector<IncidentScript> schedule_incidents(const SimConfig& cfg) {
    validate_config(cfg);
    std::mt19937_64 rng(mix_seed(cfg.seed, 0x65766e74ULL));  // event stream
    std::vector<IncidentScript> events;
    events.reserve(cfg.incident_count);
    const double range_s = static_cast<double>(cfg.end_ts - cfg.start_ts);
    int attempts = 0;
    while (static_cast<int>(events.size()) < cfg.incident_count) {
        if (++attempts > 100000)
            throw std::runtime_error("schedule_incidents: unable to place non-overlapping incidents");
        IncidentScript ev;
        ev.duration_min = cfg.incident_duration_min_lo +
                          uniform01(rng) * (cfg.incident_duration_min_hi - cfg.incident_duration_min_lo);
        ev.speed_drop_factor = cfg.incident_speed_drop_lo +
                               uniform01(rng) * (cfg.incident_speed_drop_hi - cfg.incident_speed_drop_lo);
        const int sensor = std::min(cfg.sensor_count - 1,
                                    static_cast<int>(uniform01(rng) * cfg.sensor_count));
        ev.sensor_id = sensor_name(sensor);
        ev.direction = uniform01(rng) < 0.5 ? 0 : 1;
        ev.kind = static_cast<IncidentKind>(std::min(3, static_cast<int>(uniform01(rng) * 4.0)));
        const double span = range_s - ev.duration_min * 60.0 - kSlotSeconds;
        if (span <= 0) throw std::runtime_error("schedule_incidents: range too short for incidents");
        ev.start_time = cfg.start_ts + static_cast<Timestamp>(uniform01(rng) * span);
        const Timestamp ev_end = ev.start_time + static_cast<Timestamp>(ev.duration_min * 60.0);
        bool overlaps = false;
        for (const IncidentScript& other : events) {
            if (other.sensor_id != ev.sensor_id || other.direction != ev.direction) continue;
            const Timestamp other_end = other.start_time + static_cast<Timestamp>(other.duration_min * 60.0);
            if (ev.start_time < other_end && other.start_time < ev_end) {
                overlaps = true;
                break;
            }
        }
        if (!overlaps) events.push_back(std::move(ev));
    }
    std::sort(events.begin(), events.end(), [](const IncidentScript& a, const IncidentScript& b) {
        if (a.start_time != b.start_time) return a.start_time < b.start_time;
        if (a.sensor_id != b.sensor_id) return a.sensor_id < b.sensor_id;
        return a.direction < b.direction;
    });
    for (std::size_t i = 0; i < events.size(); ++i) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "EV%04zu", i + 1);
        events[i].event_id = buf;
    }
    return events;
}

std::vector<IncidentScript> simulate(const SimConfig& cfg, const RecordSink& sink) {
    validate_config(cfg);
    const std::vector<IncidentScript> events = schedule_incidents(cfg);

    struct KeyState {
        std::string sensor_id;
        int direction;
        std::mt19937_64 rng;
        std::vector<const IncidentScript*> incidents;  // sorted by start
        std::size_t cursor = 0;
    };
    std::vector<KeyState> keys;
    keys.reserve(static_cast<std::size_t>(cfg.sensor_count) * 2);
    for (int s = 0; s < cfg.sensor_count; ++s) {
        for (int d = 0; d < 2; ++d) {
            KeyState ks;
            ks.sensor_id = sensor_name(s);
            ks.direction = d;
            ks.rng.seed(mix_seed(cfg.seed, static_cast<std::uint64_t>(s) + 1,
                                 static_cast<std::uint64_t>(d) + 1));
            for (const IncidentScript& ev : events) {
                if (ev.sensor_id == ks.sensor_id && ev.direction == d) ks.incidents.push_back(&ev);
            }
            keys.push_back(std::move(ks));
        }
    }

    RawLaneRecord rec;
    for (Timestamp ts = cfg.start_ts; ts < cfg.end_ts; ts += kSlotSeconds) {
        const Timestamp local = ts + static_cast<Timestamp>(cfg.utc_offset_min) * 60;
        const int minute = static_cast<int>((local % 86400 + 86400) % 86400 / 60);
        const int wd = weekday_index(local >= 0 ? local / 86400 : (local - 86399) / 86400);
        const FlowPoint base = diurnal_flow(minute, wd < 5, cfg);
        for (KeyState& ks : keys) {
            FlowPoint point = base;
            // A slot is perturbed when its window [ts, ts+2min) intersects the
            // incident's active interval; the ramp is evaluated at the window start.
            while (ks.cursor < ks.incidents.size()) {
                const IncidentScript& ev = *ks.incidents[ks.cursor];
                if (ev.start_time + static_cast<Timestamp>(ev.duration_min * 60.0) <= ts) {
                    ++ks.cursor;
                    continue;
                }
                if (ts + kSlotSeconds > ev.start_time) {
                    const double elapsed_min =
                        std::max(0.0, static_cast<double>(ts - ev.start_time) / 60.0);
                    point = apply_incident(base, ev, elapsed_min);
                }
                break;
            }
            for (int lane = 0; lane < cfg.lanes_per_direction; ++lane) {
                const double jc = std::exp(cfg.noise_sigma * gaussian(ks.rng));
                const double js = std::exp(cfg.noise_sigma * gaussian(ks.rng));
                const long count = std::max(0L, std::lround(point.count * jc));
                const double speed = std::min(cfg.speed_cap_kmh, point.speed_kmh * js);
                const double occ = clamp01(point.occupancy * jc / js);
                rec.timestamp = ts;
                rec.sensor_id = ks.sensor_id;
                rec.direction = ks.direction;
                rec.lane = lane;
                rec.vehicle_count = count;
                rec.avg_speed_kmh = speed;
                rec.occupancy = occ;
                if (corrupt(rec, cfg.faults, ks.rng)) sink(rec);
            }
        }
    }
    return events;
}

}  // namespace rw::simgen
