#include "rw/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace rw::config {

RunConfig default_config() {
    RunConfig cfg;
    cfg.sim = simgen::default_sim_config();
    return cfg;
}

namespace {

double to_double(const std::string& v) {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::runtime_error("not a number");
    return d;
}

long long to_int(const std::string& v) {
    std::size_t used = 0;
    const long long i = std::stoll(v, &used);
    if (used != v.size()) throw std::runtime_error("not an integer");
    return i;
}

std::uint64_t to_uint(const std::string& v) {
    std::size_t used = 0;
    const unsigned long long i = std::stoull(v, &used);
    if (used != v.size()) throw std::runtime_error("not an unsigned integer");
    return i;
}

Timestamp to_date(const std::string& v) {
    Timestamp ts = 0;
    if (!parse_date(v, ts)) throw std::runtime_error("not a YYYY-MM-DD date");
    return ts;
}

std::vector<double> to_double_list(const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_double(item));
    if (out.empty()) throw std::runtime_error("empty list");
    return out;
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"sim.sensor_count", [](RunConfig& c, const std::string& v) { c.sim.sensor_count = static_cast<int>(to_int(v)); }},
        {"sim.lanes_per_direction", [](RunConfig& c, const std::string& v) { c.sim.lanes_per_direction = static_cast<int>(to_int(v)); }},
        {"sim.start_date", [](RunConfig& c, const std::string& v) { c.sim.start_ts = to_date(v); }},
        {"sim.end_date", [](RunConfig& c, const std::string& v) { c.sim.end_ts = to_date(v); }},
        {"sim.free_flow_speed_kmh", [](RunConfig& c, const std::string& v) { c.sim.free_flow_speed_kmh = to_double(v); }},
        {"sim.speed_cap_kmh", [](RunConfig& c, const std::string& v) { c.sim.speed_cap_kmh = to_double(v); }},
        {"sim.peak_flow", [](RunConfig& c, const std::string& v) { c.sim.profile.peak_flow = to_double(v); }},
        {"sim.night_flow", [](RunConfig& c, const std::string& v) { c.sim.profile.night_flow = to_double(v); }},
        {"sim.weekend_attenuation", [](RunConfig& c, const std::string& v) { c.sim.profile.weekend_attenuation = to_double(v); }},
        {"sim.occupancy_scale", [](RunConfig& c, const std::string& v) { c.sim.profile.occupancy_scale = to_double(v); }},
        {"sim.incident_count", [](RunConfig& c, const std::string& v) { c.sim.incident_count = static_cast<int>(to_int(v)); }},
        {"sim.incident_duration_min_lo", [](RunConfig& c, const std::string& v) { c.sim.incident_duration_min_lo = to_double(v); }},
        {"sim.incident_duration_min_hi", [](RunConfig& c, const std::string& v) { c.sim.incident_duration_min_hi = to_double(v); }},
        {"sim.incident_speed_drop_lo", [](RunConfig& c, const std::string& v) { c.sim.incident_speed_drop_lo = to_double(v); }},
        {"sim.incident_speed_drop_hi", [](RunConfig& c, const std::string& v) { c.sim.incident_speed_drop_hi = to_double(v); }},
        {"sim.fault_drop_rate", [](RunConfig& c, const std::string& v) { c.sim.faults.drop = to_double(v); }},
        {"sim.fault_missing_rate", [](RunConfig& c, const std::string& v) { c.sim.faults.missing_field = to_double(v); }},
        {"sim.fault_obstruction_rate", [](RunConfig& c, const std::string& v) { c.sim.faults.obstruction = to_double(v); }},
        {"sim.noise_sigma", [](RunConfig& c, const std::string& v) { c.sim.noise_sigma = to_double(v); }},
        {"sim.seed", [](RunConfig& c, const std::string& v) { c.sim.seed = to_uint(v); }},
        {"ingest.lanes_per_direction", [](RunConfig& c, const std::string& v) { c.ingest_lanes = static_cast<int>(to_int(v)); }},
        {"ingest.snap_tolerance_s", [](RunConfig& c, const std::string& v) { c.snap_tolerance_s = static_cast<int>(to_int(v)); }},
        {"time.utc_offset_min", [](RunConfig& c, const std::string& v) {
             c.utc_offset_min = static_cast<int>(to_int(v));
             c.sim.utc_offset_min = c.utc_offset_min;
         }},
        {"label.window_min", [](RunConfig& c, const std::string& v) { c.label_window_min = static_cast<int>(to_int(v)); }},
        {"split.seed", [](RunConfig& c, const std::string& v) { c.split_seed = to_uint(v); }},
        {"model.hidden", [](RunConfig& c, const std::string& v) { c.net.hidden = static_cast<int>(to_int(v)); }},
        {"model.lr", [](RunConfig& c, const std::string& v) { c.net.learning_rate = to_double(v); }},
        {"model.epochs", [](RunConfig& c, const std::string& v) { c.net.epochs = static_cast<int>(to_int(v)); }},
        {"model.net_seed", [](RunConfig& c, const std::string& v) { c.net.seed = to_uint(v); }},
        {"model.max_depth", [](RunConfig& c, const std::string& v) { c.tree.max_depth = static_cast<int>(to_int(v)); }},
        {"model.min_leaf", [](RunConfig& c, const std::string& v) { c.tree.min_leaf = static_cast<int>(to_int(v)); }},
        {"model.min_gain", [](RunConfig& c, const std::string& v) { c.tree.min_gain = to_double(v); }},
        {"eval.losses", [](RunConfig& c, const std::string& v) { c.losses = to_double_list(v); }},
    };
    return table;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
    const auto& table = setters();
    const auto it = table.find(key);
    if (it == table.end()) throw std::runtime_error("unknown key '" + key + "'");
    try {
        it->second(cfg, value);
    } catch (const std::exception& e) {
        throw std::runtime_error("bad value for '" + key + "': " + e.what());
    }
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    RunConfig cfg = default_config();
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("config: line " + std::to_string(line_no) +
                                     ": expected 'key = value'");
        }
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        try {
            apply_setting(cfg, key, value);
        } catch (const std::exception& e) {
            throw std::runtime_error("config: line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return cfg;
}

}  // namespace rw::config
