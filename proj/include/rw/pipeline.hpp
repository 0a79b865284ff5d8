#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "rw/eval.hpp"
#include "rw/features.hpp"
#include "rw/ingest.hpp"
#include "rw/models.hpp"
#include "rw/records.hpp"
#include "rw/simgen.hpp"

namespace rw::pipeline {

// ---------------------------------------------------------------------------
// File formats (headers included; missing measurement = empty field)
// ---------------------------------------------------------------------------

extern const char* const kReadingsHeader;   // timestamp,sensor_id,direction,lane,count,speed_kmh,occupancy
extern const char* const kEventsHeader;     // event_id,timestamp,sensor_id,direction,kind,description
extern const char* const kSamplesHeader;    // timestamp,sensor_id,direction,mean_count,mean_speed_kmh,mean_occupancy,valid_lanes,quality
extern const char* const kVectorsHeader;    // t_end,sensor_id,direction,d_velocity,d_occupancy,d_capacity_usage,weekday,rush,label
extern const char* const kBoundsHeader;     // sensor_id,direction,capacity_bound
extern const char* const kReportHeader;     // model,loss,tp,fn,fp,tn,tpr,tnr,ppv,npv,accuracy,alarms_per_day

void append_reading_line(const RawLaneRecord& r, std::string& buf);

// Writes readings.csv and events.csv; byte-identical for identical configs.
std::vector<simgen::IncidentScript> run_simulate(const simgen::SimConfig& cfg,
                                                 const std::string& readings_path,
                                                 const std::string& events_path);

void write_events(std::span<const simgen::IncidentScript> events, std::ostream& out);
std::vector<simgen::IncidentScript> load_events(const std::string& path);

// ---------------------------------------------------------------------------
// Ingest: raw readings -> directional samples, single pass, O(keys) memory
// ---------------------------------------------------------------------------

struct IngestOptions {
    int lanes_per_direction = 4;
    ingest::ValidationLimits limits;
};

struct IngestSummary {
    std::uint64_t lines = 0;    // including the header
    std::uint64_t records = 0;  // data lines
    std::uint64_t accepted = 0;
    std::uint64_t rejected_parse = 0;
    std::uint64_t rejected_occupancy = 0;
    std::uint64_t rejected_speed = 0;
    std::uint64_t rejected_count = 0;
    std::uint64_t rejected_off_grid = 0;
    std::uint64_t deduplicated = 0;
    std::uint64_t dead_lane_reclassified = 0;
    std::uint64_t samples_emitted = 0;

    std::uint64_t rejected_total() const {
        return rejected_parse + rejected_occupancy + rejected_speed + rejected_count +
               rejected_off_grid;
    }
    std::string to_text() const;
};

// Requires the input ordered by timestamp (throws otherwise). Gaps become
// quality=missing placeholder rows; duplicate (key, slot, lane) records keep
// the first occurrence. Every key's output covers the full observed range.
IngestSummary run_ingest(std::istream& in, std::ostream& out, const IngestOptions& opts);

bool parse_sample_line(std::string_view line, DirectionalSample& out);

// ---------------------------------------------------------------------------
// Featurize: samples + events -> labeled vectors + capacity bounds
// ---------------------------------------------------------------------------

struct FeaturizeOptions {
    int utc_offset_min = 180;
    int window_min = 10;
};

struct FeaturizeStats {
    std::uint64_t vectors = 0;
    std::uint64_t skipped_pairs = 0;  // pairs with a missing side
};

// Two passes over the samples file: bounds first, then vectors.
// events_path may be empty (all labels 0).
FeaturizeStats run_featurize(const std::string& samples_path, const std::string& events_path,
                             const std::string& vectors_out, const std::string& bounds_out,
                             const FeaturizeOptions& opts);

std::vector<FeatureVector> load_vectors(const std::string& path);
features::CapacityBounds load_bounds(const std::string& path);
void write_bounds(const features::CapacityBounds& bounds, std::ostream& out);

// ---------------------------------------------------------------------------
// Scoring and reports
// ---------------------------------------------------------------------------

std::vector<double> score_all(const models::Model& model, std::span<const FeatureVector> vectors);

void write_report_csv(std::ostream& out, const std::string& model_name,
                      std::span<const eval::SweepRow> rows);

// ---------------------------------------------------------------------------
// Streaming detection
// ---------------------------------------------------------------------------

struct DetectOptions {
    double loss = 0.0;
    int utc_offset_min = 180;
    IngestOptions ingest;
};

struct DetectStats {
    std::uint64_t alerts = 0;
    std::uint64_t vectors_scored = 0;
    std::uint64_t out_of_order = 0;
    std::uint64_t keys_without_bounds = 0;
};

// Replays a readings stream, closing each 2-minute slot on record arrival,
// and emits one alert line per positive decision:
//   timestamp,sensor_id,direction,model_kind,score,loss,1
// State is per (sensor, direction) key only.
DetectStats run_detect(const models::Model& model, const features::CapacityBounds& bounds,
                       std::istream& in, std::ostream& alerts_out, const DetectOptions& opts);

}  // namespace rw::pipeline
