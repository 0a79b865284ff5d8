#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rw/records.hpp"
#include "rw/simgen.hpp"

namespace rw::features {

using Key = std::pair<std::string, int>;  // (sensor_id, direction)

// Per-(sensor, direction) road-capacity normalizer, cars*km/h per slot.
using CapacityBounds = std::map<Key, double>;

// cars * km/h for one slot. Throws on quality Missing.
double capacity(const DirectionalSample& sample);

// Nearest-rank 99th percentile of slot capacities. Throws (naming the key)
// when a key has fewer than 100 non-missing samples.
double capacity_bound(std::span<const double> capacities, const Key& key);

// Piecewise-linear time-of-day factor: 0 late night, 1 at peak commute.
// Input is minutes past local midnight in [0, 1440).
double rush_hour_score(double local_minutes);

// 1 for Monday-Friday, 0 for Saturday-Sunday.
int weekday_flag(std::int64_t local_days);

// Differential vector for two consecutive slots of one key, unlabeled.
// Returns nullopt when either sample has quality Missing. Throws when the
// samples do not share a key or are not consecutive grid slots.
std::optional<FeatureVector> make_vector(const DirectionalSample& s_t,
                                         const DirectionalSample& s_t1, double bound,
                                         int utc_offset_min);

// Label 1 iff an event with the vector's key starts at t_e with
// t_end in [t_e - 2 min, t_e + window_min].
void label_vectors(std::vector<FeatureVector>& vectors,
                   std::span<const simgen::IncidentScript> events, int window_min);

struct ScalerParams {
    std::array<double, 3> mean{};           // d_velocity, d_occupancy, d_capacity_usage
    std::array<double, 3> stddev{{1, 1, 1}};
};

// Mean and (population) standard deviation of the three differential
// features; stddev below 1e-9 clamps to 1. Throws on fewer than 2 vectors.
ScalerParams fit_scaler(std::span<const FeatureVector> train);

// Standardizes the differential features; weekday and rush pass through.
std::array<double, kFeatureCount> apply_scaler(const ScalerParams& params,
                                               const std::array<double, kFeatureCount>& x);

}  // namespace rw::features
