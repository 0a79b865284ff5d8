#pragma once

#include <string>
#include <vector>

#include "rw/models.hpp"
#include "rw/simgen.hpp"

namespace rw::config {

// Every key has a documented default; unknown keys are rejected.
struct RunConfig {
    simgen::SimConfig sim;          // sim.* keys
    int ingest_lanes = 4;           // ingest.lanes_per_direction
    int snap_tolerance_s = 60;      // ingest.snap_tolerance_s
    int utc_offset_min = 180;       // time.utc_offset_min (Istanbul, no DST)
    int label_window_min = 10;      // label.window_min
    std::uint64_t split_seed = 7;   // split.seed
    models::TreeParams tree;        // model.max_depth / model.min_leaf / model.min_gain
    models::NetParams net;          // model.hidden / model.lr / model.epochs / model.net_seed
    std::vector<double> losses{0.0, 0.5, 0.94};  // eval.losses
};

RunConfig default_config();

// Line-oriented "key = value" text; '#' starts a comment; later duplicates
// override earlier ones. Throws std::runtime_error naming the key and line
// on unknown keys or unparseable values.
RunConfig load_config(const std::string& path);

// Applies one key/value pair (shared by load_config and tests).
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);

}  // namespace rw::config
