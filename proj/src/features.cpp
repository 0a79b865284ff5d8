#include "rw/features.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rw::features {

double capacity(const DirectionalSample& sample) {
    if (sample.quality == Quality::Missing)
        throw std::invalid_argument("capacity: sample has quality missing");
    return sample.mean_count * sample.mean_speed_kmh;
}

double capacity_bound(std::span<const double> capacities, const Key& key) {
    if (capacities.size() < 100) {
        throw std::runtime_error("capacity_bound: fewer than 100 samples for sensor " + key.first +
                                 " direction " + std::to_string(key.second));
    }
    std::vector<double> sorted(capacities.begin(), capacities.end());
    std::sort(sorted.begin(), sorted.end());
    // Nearest-rank percentile: ceil(0.99 * n), 1-based.
    const std::size_t rank =
        static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(sorted.size())));
    return sorted[rank - 1];
}

namespace {

// (minute, score) knots; linear between them.
constexpr double kRushKnots[][2] = {
    {0, 0.0},    {300, 0.0},  {420, 1.0},  {570, 1.0},  {690, 0.3},
    {960, 0.3},  {1020, 1.0}, {1170, 1.0}, {1380, 0.0}, {1440, 0.0},
};

}  // namespace

double rush_hour_score(double local_minutes) {
    if (local_minutes < 0 || local_minutes >= 1440)
        throw std::invalid_argument("rush_hour_score: minutes out of [0, 1440)");
    constexpr int n = static_cast<int>(sizeof(kRushKnots) / sizeof(kRushKnots[0]));
    for (int i = 1; i < n; ++i) {
        if (local_minutes <= kRushKnots[i][0]) {
            const double m0 = kRushKnots[i - 1][0], v0 = kRushKnots[i - 1][1];
            const double m1 = kRushKnots[i][0], v1 = kRushKnots[i][1];
            return v0 + (v1 - v0) * (local_minutes - m0) / (m1 - m0);
        }
    }
    return 0.0;
}

int weekday_flag(std::int64_t local_days) {
    return weekday_index(local_days) < 5 ? 1 : 0;
}

std::optional<FeatureVector> make_vector(const DirectionalSample& s_t,
                                         const DirectionalSample& s_t1, double bound,
                                         int utc_offset_min) {
    if (s_t.sensor_id != s_t1.sensor_id || s_t.direction != s_t1.direction)
        throw std::invalid_argument("make_vector: samples do not share a (sensor, direction) key");
    if (s_t1.timestamp != s_t.timestamp + kSlotSeconds)
        throw std::invalid_argument("make_vector: samples are not consecutive grid slots");
    if (bound <= 0) throw std::invalid_argument("make_vector: capacity bound must be positive");
    if (s_t.quality == Quality::Missing || s_t1.quality == Quality::Missing) return std::nullopt;

    FeatureVector v;
    v.t_end = s_t1.timestamp;
    v.sensor_id = s_t1.sensor_id;
    v.direction = s_t1.direction;
    v.x[kFeatDVelocity] = s_t1.mean_speed_kmh - s_t.mean_speed_kmh;
    v.x[kFeatDOccupancy] = s_t1.mean_occupancy - s_t.mean_occupancy;
    const double dcap = (capacity(s_t1) - capacity(s_t)) / bound;
    v.x[kFeatDCapacityUsage] = std::clamp(dcap, -1.0, 1.0);
    const Timestamp local = v.t_end + static_cast<Timestamp>(utc_offset_min) * 60;
    const std::int64_t days = local >= 0 ? local / 86400 : (local - 86399) / 86400;
    const double minutes = static_cast<double>(local - days * 86400) / 60.0;
    v.x[kFeatWeekday] = weekday_flag(days);
    v.x[kFeatRush] = rush_hour_score(minutes);
    return v;
}

void label_vectors(std::vector<FeatureVector>& vectors,
                   std::span<const simgen::IncidentScript> events, int window_min) {
    std::map<Key, std::vector<Timestamp>> starts;
    for (const simgen::IncidentScript& ev : events) {
        starts[{ev.sensor_id, ev.direction}].push_back(ev.start_time);
    }
    for (auto& [key, times] : starts) std::sort(times.begin(), times.end());
    const Timestamp window_s = static_cast<Timestamp>(window_min) * 60;
    for (FeatureVector& v : vectors) {
        v.label = 0;
        auto it = starts.find({v.sensor_id, v.direction});
        if (it == starts.end()) continue;
        // Label 1 iff some event start t_e satisfies t_end in [t_e - 2min, t_e + W].
        const std::vector<Timestamp>& times = it->second;
        auto lo = std::lower_bound(times.begin(), times.end(), v.t_end - window_s);
        if (lo != times.end() && *lo <= v.t_end + kSlotSeconds) v.label = 1;
    }
}

ScalerParams fit_scaler(std::span<const FeatureVector> train) {
    if (train.size() < 2) throw std::invalid_argument("fit_scaler: need at least 2 vectors");
    ScalerParams p;
    const double n = static_cast<double>(train.size());
    for (int f = 0; f < 3; ++f) {
        double sum = 0;
        for (const FeatureVector& v : train) sum += v.x[f];
        const double mean = sum / n;
        double ss = 0;
        for (const FeatureVector& v : train) {
            const double d = v.x[f] - mean;
            ss += d * d;
        }
        double sd = std::sqrt(ss / n);
        if (sd < 1e-9) sd = 1.0;
        p.mean[f] = mean;
        p.stddev[f] = sd;
    }
    return p;
}

std::array<double, kFeatureCount> apply_scaler(const ScalerParams& params,
                                               const std::array<double, kFeatureCount>& x) {
    std::array<double, kFeatureCount> out = x;
    for (int f = 0; f < 3; ++f) out[f] = (x[f] - params.mean[f]) / params.stddev[f];
    return out;
}

}  // namespace rw::features
