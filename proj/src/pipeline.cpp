#include "rw/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace rw::pipeline {

const char* const kReadingsHeader = "timestamp,sensor_id,direction,lane,count,speed_kmh,occupancy";
const char* const kEventsHeader = "event_id,timestamp,sensor_id,direction,kind,description";
const char* const kSamplesHeader =
    "timestamp,sensor_id,direction,mean_count,mean_speed_kmh,mean_occupancy,valid_lanes,quality";
const char* const kVectorsHeader =
    "t_end,sensor_id,direction,d_velocity,d_occupancy,d_capacity_usage,weekday,rush,label";
const char* const kBoundsHeader = "sensor_id,direction,capacity_bound";
const char* const kReportHeader = "model,loss,tp,fn,fp,tn,tpr,tnr,ppv,npv,accuracy,alarms_per_day";

namespace {

void append_int(std::string& buf, long long v) {
    char tmp[24];
    auto [p, ec] = std::to_chars(tmp, tmp + sizeof(tmp), v);
    buf.append(tmp, p);
}

// Shortest representation that parses back to the same double.
void append_double(std::string& buf, double v) {
    char tmp[32];
    auto [p, ec] = std::to_chars(tmp, tmp + sizeof(tmp), v);
    buf.append(tmp, p);
}

void append_fixed(std::string& buf, double v, int decimals) {
    char tmp[48];
    auto [p, ec] = std::to_chars(tmp, tmp + sizeof(tmp), v, std::chars_format::fixed, decimals);
    buf.append(tmp, p);
}

struct LineReader {
    std::istream& in;
    std::string line;
    std::size_t line_no = 0;

    explicit LineReader(std::istream& s) : in(s) {}
    bool next() {
        if (!std::getline(in, line)) return false;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        ++line_no;
        return true;
    }
};

class BufferedWriter {
public:
    explicit BufferedWriter(std::ostream& out) : out_(out) { buf_.reserve(1 << 20); }
    ~BufferedWriter() { flush(); }
    std::string& buf() { return buf_; }
    void maybe_flush() {
        if (buf_.size() > (1 << 20) - 1024) flush();
    }
    void flush() {
        out_.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
        buf_.clear();
    }

private:
    std::ostream& out_;
    std::string buf_;
};

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    return in;
}

bool split_fields(std::string_view line, std::string_view* out, int n) {
    std::size_t pos = 0;
    for (int i = 0; i < n; ++i) {
        if (pos > line.size()) return false;
        const std::size_t comma = line.find(',', pos);
        if (comma == std::string_view::npos) {
            out[i] = line.substr(pos);
            pos = line.size() + 1;
        } else {
            out[i] = line.substr(pos, comma - pos);
            pos = comma + 1;
        }
    }
    return pos > line.size();
}

bool parse_double_field(std::string_view f, double& v) {
    auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
    return ec == std::errc() && p == f.data() + f.size();
}

bool parse_int_field(std::string_view f, long long& v) {
    auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
    return ec == std::errc() && p == f.data() + f.size();
}

}  // namespace

void append_reading_line(const RawLaneRecord& r, std::string& buf) {
    char ts[20];
    format_iso8601(r.timestamp, ts);
    buf.append(ts, 20);
    buf += ',';
    buf += r.sensor_id;
    buf += ',';
    append_int(buf, r.direction);
    buf += ',';
    append_int(buf, r.lane);
    buf += ',';
    if (r.vehicle_count) append_int(buf, *r.vehicle_count);
    buf += ',';
    if (r.avg_speed_kmh) append_fixed(buf, *r.avg_speed_kmh, 2);
    buf += ',';
    if (r.occupancy) append_fixed(buf, *r.occupancy, 4);
    buf += '\n';
}

void write_events(std::span<const simgen::IncidentScript> events, std::ostream& out) {
    out << kEventsHeader << '\n';
    for (const simgen::IncidentScript& ev : events) {
        out << ev.event_id << ',' << format_iso8601(ev.start_time) << ',' << ev.sensor_id << ','
            << ev.direction << ',' << simgen::incident_kind_name(ev.kind) << ','
            << simgen::incident_kind_description(ev.kind) << '\n';
    }
}

std::vector<simgen::IncidentScript> run_simulate(const simgen::SimConfig& cfg,
                                                 const std::string& readings_path,
                                                 const std::string& events_path) {
    std::ofstream readings = open_out(readings_path);
    BufferedWriter writer(readings);
    writer.buf() += kReadingsHeader;
    writer.buf() += '\n';
    const auto events = simgen::simulate(cfg, [&](const RawLaneRecord& r) {
        append_reading_line(r, writer.buf());
        writer.maybe_flush();
    });
    writer.flush();
    if (!readings) throw std::runtime_error("write failure: " + readings_path);
    std::ofstream ev_out = open_out(events_path);
    write_events(events, ev_out);
    if (!ev_out) throw std::runtime_error("write failure: " + events_path);
    return events;
}

std::vector<simgen::IncidentScript> load_events(const std::string& path) {
    std::ifstream in = open_in(path);
    LineReader reader(in);
    if (!reader.next() || reader.line != kEventsHeader)
        throw std::runtime_error(path + ": missing events header");
    std::vector<simgen::IncidentScript> events;
    while (reader.next()) {
        if (reader.line.empty()) continue;
        std::string_view f[6];
        if (!split_fields(reader.line, f, 6))
            throw std::runtime_error(path + ": line " + std::to_string(reader.line_no) +
                                     ": expected 6 fields");
        simgen::IncidentScript ev;
        ev.event_id.assign(f[0]);
        if (!parse_iso8601(f[1], ev.start_time))
            throw std::runtime_error(path + ": line " + std::to_string(reader.line_no) +
                                     ": bad timestamp");
        ev.sensor_id.assign(f[2]);
        long long dir = 0;
        if (!parse_int_field(f[3], dir) || (dir != 0 && dir != 1))
            throw std::runtime_error(path + ": line " + std::to_string(reader.line_no) +
                                     ": bad direction");
        ev.direction = static_cast<int>(dir);
        for (int k = 0; k < 4; ++k) {
            if (f[4] == simgen::incident_kind_name(static_cast<simgen::IncidentKind>(k)))
                ev.kind = static_cast<simgen::IncidentKind>(k);
        }
        events.push_back(std::move(ev));
    }
    return events;
}

// ---------------------------------------------------------------------------
// Ingest
// ---------------------------------------------------------------------------

std::string IngestSummary::to_text() const {
    std::ostringstream out;
    out << "# cleaning summary\n"
        << "lines " << lines << '\n'
        << "records " << records << '\n'
        << "accepted " << accepted << '\n'
        << "rejected_parse " << rejected_parse << '\n'
        << "rejected_occupancy " << rejected_occupancy << '\n'
        << "rejected_speed " << rejected_speed << '\n'
        << "rejected_count " << rejected_count << '\n'
        << "rejected_off_grid " << rejected_off_grid << '\n'
        << "deduplicated " << deduplicated << '\n'
        << "dead_lane_reclassified " << dead_lane_reclassified << '\n'
        << "samples_emitted " << samples_emitted << '\n';
    return out.str();
}

namespace {

using features::Key;

void append_sample_line(const DirectionalSample& s, std::string& buf) {
    char ts[20];
    format_iso8601(s.timestamp, ts);
    buf.append(ts, 20);
    buf += ',';
    buf += s.sensor_id;
    buf += ',';
    append_int(buf, s.direction);
    buf += ',';
    if (s.quality != Quality::Missing) {
        append_double(buf, s.mean_count);
        buf += ',';
        append_double(buf, s.mean_speed_kmh);
        buf += ',';
        append_double(buf, s.mean_occupancy);
    } else {
        buf += ",,";
    }
    buf += ',';
    append_int(buf, s.valid_lanes);
    buf += ',';
    buf += quality_name(s.quality);
    buf += '\n';
}

}  // namespace

IngestSummary run_ingest(std::istream& in, std::ostream& out, const IngestOptions& opts) {
    IngestSummary sum;
    LineReader reader(in);
    if (!reader.next() || reader.line != kReadingsHeader)
        throw std::runtime_error("ingest: first line is not the readings header");
    sum.lines = 1;

    BufferedWriter writer(out);
    writer.buf() += kSamplesHeader;
    writer.buf() += '\n';

    std::map<Key, std::vector<CleanLaneRecord>> buckets;
    std::map<Key, Timestamp> last_emitted;
    Timestamp current_ts = -1;
    Timestamp global_start = -1;

    auto emit_missing = [&](const Key& key, Timestamp ts) {
        DirectionalSample gap;
        gap.timestamp = ts;
        gap.sensor_id = key.first;
        gap.direction = key.second;
        gap.quality = Quality::Missing;
        append_sample_line(gap, writer.buf());
        ++sum.samples_emitted;
    };

    auto flush_slot = [&](Timestamp ts) {
        for (auto& [key, recs] : buckets) {
            // Keep the first record per lane.
            std::vector<CleanLaneRecord> unique;
            unique.reserve(recs.size());
            for (CleanLaneRecord& r : recs) {
                bool dup = false;
                for (const CleanLaneRecord& u : unique) {
                    if (u.lane == r.lane) {
                        dup = true;
                        break;
                    }
                }
                if (dup) {
                    ++sum.deduplicated;
                    --sum.accepted;
                } else {
                    unique.push_back(std::move(r));
                }
            }
            const DirectionalSample sample = ingest::aggregate(unique, opts.lanes_per_direction);
            auto [it, inserted] = last_emitted.try_emplace(key, global_start - kSlotSeconds);
            for (Timestamp g = it->second + kSlotSeconds; g < ts; g += kSlotSeconds)
                emit_missing(key, g);
            append_sample_line(sample, writer.buf());
            ++sum.samples_emitted;
            it->second = ts;
            writer.maybe_flush();
        }
        buckets.clear();
    };

    RawLaneRecord raw;
    ingest::ParseError perr;
    while (reader.next()) {
        ++sum.lines;
        if (reader.line.empty()) continue;
        ++sum.records;
        if (!ingest::parse_line(reader.line, reader.line_no, raw, perr)) {
            ++sum.rejected_parse;
            continue;
        }
        CleanLaneRecord clean;
        bool dead = false;
        switch (ingest::validate(raw, opts.limits, clean, dead)) {
            case ingest::RejectReason::OutOfRangeOccupancy: ++sum.rejected_occupancy; continue;
            case ingest::RejectReason::OutOfRangeSpeed: ++sum.rejected_speed; continue;
            case ingest::RejectReason::OutOfRangeCount: ++sum.rejected_count; continue;
            case ingest::RejectReason::OffGridTimestamp: ++sum.rejected_off_grid; continue;
            default: break;
        }
        ++sum.accepted;
        if (dead) ++sum.dead_lane_reclassified;
        if (current_ts < 0) {
            current_ts = clean.timestamp;
            global_start = clean.timestamp;
        } else if (clean.timestamp < current_ts) {
            throw std::runtime_error("ingest: input not sorted by timestamp at line " +
                                     std::to_string(reader.line_no));
        } else if (clean.timestamp > current_ts) {
            flush_slot(current_ts);
            current_ts = clean.timestamp;
        }
        buckets[{clean.sensor_id, clean.direction}].push_back(std::move(clean));
    }
    if (current_ts >= 0) {
        flush_slot(current_ts);
        for (auto& [key, last] : last_emitted) {
            for (Timestamp g = last + kSlotSeconds; g <= current_ts; g += kSlotSeconds)
                emit_missing(key, g);
        }
    }
    writer.flush();
    if (!out) throw std::runtime_error("ingest: write failure");
    return sum;
}

bool parse_sample_line(std::string_view line, DirectionalSample& out) {
    std::string_view f[8];
    if (!split_fields(line, f, 8)) return false;
    if (!parse_iso8601(f[0], out.timestamp)) return false;
    out.sensor_id.assign(f[1]);
    long long dir = 0;
    if (!parse_int_field(f[2], dir)) return false;
    out.direction = static_cast<int>(dir);
    long long lanes = 0;
    if (!parse_int_field(f[6], lanes)) return false;
    out.valid_lanes = static_cast<int>(lanes);
    if (f[7] == "ok") out.quality = Quality::Ok;
    else if (f[7] == "partial") out.quality = Quality::Partial;
    else if (f[7] == "missing") out.quality = Quality::Missing;
    else return false;
    if (out.quality == Quality::Missing) {
        out.mean_count = out.mean_speed_kmh = out.mean_occupancy = 0.0;
        return f[3].empty() && f[4].empty() && f[5].empty();
    }
    return parse_double_field(f[3], out.mean_count) &&
           parse_double_field(f[4], out.mean_speed_kmh) &&
           parse_double_field(f[5], out.mean_occupancy);
}

// ---------------------------------------------------------------------------
// Featurize
// ---------------------------------------------------------------------------

namespace {

void for_each_sample(const std::string& path, const std::function<void(const DirectionalSample&)>& fn) {
    std::ifstream in = open_in(path);
    LineReader reader(in);
    if (!reader.next() || reader.line != kSamplesHeader)
        throw std::runtime_error(path + ": missing samples header");
    DirectionalSample s;
    while (reader.next()) {
        if (reader.line.empty()) continue;
        if (!parse_sample_line(reader.line, s))
            throw std::runtime_error(path + ": line " + std::to_string(reader.line_no) +
                                     ": malformed sample");
        fn(s);
    }
}

void append_vector_line(const FeatureVector& v, std::string& buf) {
    char ts[20];
    format_iso8601(v.t_end, ts);
    buf.append(ts, 20);
    buf += ',';
    buf += v.sensor_id;
    buf += ',';
    append_int(buf, v.direction);
    buf += ',';
    append_double(buf, v.x[kFeatDVelocity]);
    buf += ',';
    append_double(buf, v.x[kFeatDOccupancy]);
    buf += ',';
    append_double(buf, v.x[kFeatDCapacityUsage]);
    buf += ',';
    append_int(buf, static_cast<long long>(v.x[kFeatWeekday]));
    buf += ',';
    append_double(buf, v.x[kFeatRush]);
    buf += ',';
    append_int(buf, v.label);
    buf += '\n';
}

}  // namespace

void write_bounds(const features::CapacityBounds& bounds, std::ostream& out) {
    out.precision(17);
    out << kBoundsHeader << '\n';
    for (const auto& [key, bound] : bounds) {
        out << key.first << ',' << key.second << ',' << bound << '\n';
    }
}

features::CapacityBounds load_bounds(const std::string& path) {
    std::ifstream in = open_in(path);
    LineReader reader(in);
    if (!reader.next() || reader.line != kBoundsHeader)
        throw std::runtime_error(path + ": missing bounds header");
    features::CapacityBounds bounds;
    while (reader.next()) {
        if (reader.line.empty()) continue;
        std::string_view f[3];
        long long dir = 0;
        double bound = 0;
        if (!split_fields(reader.line, f, 3) || !parse_int_field(f[1], dir) ||
            !parse_double_field(f[2], bound)) {
            throw std::runtime_error(path + ": line " + std::to_string(reader.line_no) +
                                     ": malformed bound");
        }
        bounds[{std::string(f[0]), static_cast<int>(dir)}] = bound;
    }
    return bounds;
}

FeaturizeStats run_featurize(const std::string& samples_path, const std::string& events_path,
                             const std::string& vectors_out, const std::string& bounds_out,
                             const FeaturizeOptions& opts) {
    // Pass 1: per-key capacity distributions.
    std::map<Key, std::vector<double>> capacities;
    for_each_sample(samples_path, [&](const DirectionalSample& s) {
        if (s.quality != Quality::Missing)
            capacities[{s.sensor_id, s.direction}].push_back(features::capacity(s));
    });
    features::CapacityBounds bounds;
    for (const auto& [key, caps] : capacities) bounds[key] = features::capacity_bound(caps, key);
    capacities.clear();

    if (!bounds_out.empty()) {
        std::ofstream bout = open_out(bounds_out);
        write_bounds(bounds, bout);
    }

    // Event starts per key, sorted, for inline labeling.
    std::map<Key, std::vector<Timestamp>> starts;
    if (!events_path.empty()) {
        for (const simgen::IncidentScript& ev : load_events(events_path))
            starts[{ev.sensor_id, ev.direction}].push_back(ev.start_time);
        for (auto& [key, times] : starts) std::sort(times.begin(), times.end());
    }
    const Timestamp window_s = static_cast<Timestamp>(opts.window_min) * 60;

    // Pass 2: consecutive-pair differencing per key.
    FeaturizeStats stats;
    std::ofstream vout = open_out(vectors_out);
    BufferedWriter writer(vout);
    writer.buf() += kVectorsHeader;
    writer.buf() += '\n';
    std::map<Key, DirectionalSample> prev;
    for_each_sample(samples_path, [&](const DirectionalSample& s) {
        const Key key{s.sensor_id, s.direction};
        auto it = prev.find(key);
        if (it != prev.end() && it->second.timestamp + kSlotSeconds == s.timestamp) {
            auto v = features::make_vector(it->second, s, bounds.at(key), opts.utc_offset_min);
            if (v) {
                v->label = 0;
                auto st = starts.find(key);
                if (st != starts.end()) {
                    const auto& times = st->second;
                    auto lo = std::lower_bound(times.begin(), times.end(), v->t_end - window_s);
                    if (lo != times.end() && *lo <= v->t_end + kSlotSeconds) v->label = 1;
                }
                append_vector_line(*v, writer.buf());
                writer.maybe_flush();
                ++stats.vectors;
            } else {
                ++stats.skipped_pairs;
            }
        }
        prev[key] = s;
    });
    writer.flush();
    if (!vout) throw std::runtime_error("featurize: write failure");
    return stats;
}

std::vector<FeatureVector> load_vectors(const std::string& path) {
    std::ifstream in = open_in(path);
    LineReader reader(in);
    if (!reader.next() || reader.line != kVectorsHeader)
        throw std::runtime_error(path + ": missing vectors header");
    std::vector<FeatureVector> out;
    while (reader.next()) {
        if (reader.line.empty()) continue;
        std::string_view f[9];
        FeatureVector v;
        long long dir = 0, weekday = 0, label = 0;
        if (!split_fields(reader.line, f, 9) || !parse_iso8601(f[0], v.t_end) ||
            !parse_int_field(f[2], dir) || !parse_double_field(f[3], v.x[kFeatDVelocity]) ||
            !parse_double_field(f[4], v.x[kFeatDOccupancy]) ||
            !parse_double_field(f[5], v.x[kFeatDCapacityUsage]) ||
            !parse_int_field(f[6], weekday) || !parse_double_field(f[7], v.x[kFeatRush]) ||
            !parse_int_field(f[8], label)) {
            throw std::runtime_error(path + ": line " + std::to_string(reader.line_no) +
                                     ": malformed vector");
        }
        v.sensor_id.assign(f[1]);
        v.direction = static_cast<int>(dir);
        v.x[kFeatWeekday] = static_cast<double>(weekday);
        v.label = static_cast<int>(label);
        out.push_back(std::move(v));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Scoring and reports
// ---------------------------------------------------------------------------

std::vector<double> score_all(const models::Model& model, std::span<const FeatureVector> vectors) {
    std::vector<double> scores;
    scores.reserve(vectors.size());
    for (const FeatureVector& v : vectors) scores.push_back(model.score(v.x));
    return scores;
}

namespace {

void append_optional_fraction(std::string& buf, const std::optional<double>& v) {
    if (v) append_fixed(buf, *v, 6);
    else buf += "n/a";
}

}  // namespace

void write_report_csv(std::ostream& out, const std::string& model_name,
                      std::span<const eval::SweepRow> rows) {
    std::string buf;
    buf += kReportHeader;
    buf += '\n';
    for (const eval::SweepRow& row : rows) {
        buf += model_name;
        buf += ',';
        append_double(buf, row.loss);
        buf += ',';
        append_int(buf, row.cm.tp);
        buf += ',';
        append_int(buf, row.cm.fn);
        buf += ',';
        append_int(buf, row.cm.fp);
        buf += ',';
        append_int(buf, row.cm.tn);
        buf += ',';
        append_optional_fraction(buf, row.mr.tpr);
        buf += ',';
        append_optional_fraction(buf, row.mr.tnr);
        buf += ',';
        append_optional_fraction(buf, row.mr.ppv);
        buf += ',';
        append_optional_fraction(buf, row.mr.npv);
        buf += ',';
        append_optional_fraction(buf, row.mr.accuracy);
        buf += ',';
        append_optional_fraction(buf, row.mr.alarms_per_day);
        buf += '\n';
    }
    out << buf;
}

// ---------------------------------------------------------------------------
// Streaming detection
// ---------------------------------------------------------------------------

DetectStats run_detect(const models::Model& model, const features::CapacityBounds& bounds,
                       std::istream& in, std::ostream& alerts_out, const DetectOptions& opts) {
    DetectStats stats;
    LineReader reader(in);
    if (!reader.next() || reader.line != kReadingsHeader)
        throw std::runtime_error("detect: first line is not the readings header");

    struct KeyState {
        Timestamp slot_ts = -1;
        std::vector<CleanLaneRecord> bucket;
        std::optional<DirectionalSample> prev;
    };
    std::map<Key, KeyState> states;
    BufferedWriter writer(alerts_out);

    auto close_slot = [&](const Key& key, KeyState& st) {
        if (st.slot_ts < 0 || st.bucket.empty()) return;
        std::vector<CleanLaneRecord> unique;
        unique.reserve(st.bucket.size());
        for (CleanLaneRecord& r : st.bucket) {
            bool dup = false;
            for (const CleanLaneRecord& u : unique) {
                if (u.lane == r.lane) {
                    dup = true;
                    break;
                }
            }
            if (!dup) unique.push_back(std::move(r));
        }
        DirectionalSample sample = ingest::aggregate(unique, opts.ingest.lanes_per_direction);
        st.bucket.clear();
        if (st.prev && st.prev->timestamp + kSlotSeconds == sample.timestamp) {
            const auto bound = bounds.find(key);
            if (bound == bounds.end()) {
                ++stats.keys_without_bounds;
            } else {
                const auto v =
                    features::make_vector(*st.prev, sample, bound->second, opts.utc_offset_min);
                if (v) {
                    ++stats.vectors_scored;
                    const double score = model.score(v->x);
                    if (models::decide(score, opts.loss) == 1) {
                        ++stats.alerts;
                        char ts[20];
                        format_iso8601(v->t_end, ts);
                        std::string& buf = writer.buf();
                        buf.append(ts, 20);
                        buf += ',';
                        buf += key.first;
                        buf += ',';
                        append_int(buf, key.second);
                        buf += ',';
                        buf += models::model_kind_name(model.kind);
                        buf += ',';
                        append_fixed(buf, score, 6);
                        buf += ',';
                        append_double(buf, opts.loss);
                        buf += ",1\n";
                        writer.maybe_flush();
                    }
                }
            }
        }
        st.prev = std::move(sample);
    };

    RawLaneRecord raw;
    ingest::ParseError perr;
    while (reader.next()) {
        if (reader.line.empty()) continue;
        if (!ingest::parse_line(reader.line, reader.line_no, raw, perr)) continue;
        CleanLaneRecord clean;
        bool dead = false;
        if (ingest::validate(raw, opts.ingest.limits, clean, dead) != ingest::RejectReason::None)
            continue;
        KeyState& st = states[{clean.sensor_id, clean.direction}];
        if (clean.timestamp < st.slot_ts) {
            ++stats.out_of_order;
            continue;
        }
        if (clean.timestamp > st.slot_ts) {
            close_slot({clean.sensor_id, clean.direction}, st);
            st.slot_ts = clean.timestamp;
        }
        st.bucket.push_back(clean);
    }
    for (auto& [key, st] : states) close_slot(key, st);
    writer.flush();
    return stats;
}

}  // namespace rw::pipeline
