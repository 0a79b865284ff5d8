// roadwatch: synthetic highway traffic simulation, sensor ETL, differential
// feature extraction, classifier training, evaluation, and streaming
// accident detection.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "rw/config.hpp"
#include "rw/eval.hpp"
#include "rw/models.hpp"
#include "rw/pipeline.hpp"

namespace fs = std::filesystem;
using namespace rw;

namespace {

struct ConfigFlag {
    std::string path;
    config::RunConfig load() const {
        return path.empty() ? config::default_config() : config::load_config(path);
    }
};

models::SplitSpec default_split_for(models::ModelKind kind, std::uint64_t seed) {
    models::SplitSpec spec;
    spec.seed = seed;
    if (kind == models::ModelKind::Net) {
        spec.train_total = 100;
        spec.train_pos = 42;
        spec.cv_total = 30;
        spec.cv_pos = 16;
    } else {
        spec.train_total = 130;
        spec.train_pos = 58;
        spec.cv_total = 0;
        spec.cv_pos = 0;
    }
    return spec;
}

std::vector<FeatureVector> select(const std::vector<FeatureVector>& all,
                                  const std::vector<std::size_t>& idx) {
    std::vector<FeatureVector> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(all[i]);
    return out;
}

std::vector<double> parse_loss_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
    if (out.empty()) throw std::runtime_error("empty loss list");
    for (double l : out) {
        if (l < 0 || l >= 1) throw std::runtime_error("loss values must lie in [0,1)");
    }
    return out;
}

double derive_horizon_days(const std::vector<FeatureVector>& vectors) {
    if (vectors.size() < 2) return 1.0;
    Timestamp lo = vectors.front().t_end, hi = lo;
    for (const FeatureVector& v : vectors) {
        lo = std::min(lo, v.t_end);
        hi = std::max(hi, v.t_end);
    }
    return std::max(1.0, static_cast<double>(hi - lo) / 86400.0);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"roadwatch - highway accident detection toolkit"};
    app.require_subcommand(1);

    ConfigFlag cfgflag;
    app.add_option("--config", cfgflag.path, "key = value configuration file")
        ->configurable(false);

    // --- simulate ---------------------------------------------------------
    auto* sim = app.add_subcommand("simulate", "generate synthetic readings and an event log");
    std::string sim_out = "data";
    std::optional<std::uint64_t> sim_seed;
    std::optional<int> sim_sensors, sim_lanes, sim_incidents;
    std::optional<std::string> sim_start, sim_end;
    sim->add_option("--out", sim_out, "output directory (readings.csv, events.csv)");
    sim->add_option("--seed", sim_seed, "simulation seed");
    sim->add_option("--sensors", sim_sensors, "sensor count");
    sim->add_option("--lanes", sim_lanes, "lanes per direction");
    sim->add_option("--incidents", sim_incidents, "incident count");
    sim->add_option("--start-date", sim_start, "YYYY-MM-DD");
    sim->add_option("--end-date", sim_end, "YYYY-MM-DD, exclusive");
    sim->callback([&] {
        config::RunConfig cfg = cfgflag.load();
        if (sim_seed) cfg.sim.seed = *sim_seed;
        if (sim_sensors) cfg.sim.sensor_count = *sim_sensors;
        if (sim_lanes) cfg.sim.lanes_per_direction = *sim_lanes;
        if (sim_incidents) cfg.sim.incident_count = *sim_incidents;
        if (sim_start && !parse_date(*sim_start, cfg.sim.start_ts))
            throw std::runtime_error("bad --start-date");
        if (sim_end && !parse_date(*sim_end, cfg.sim.end_ts))
            throw std::runtime_error("bad --end-date");
        fs::create_directories(sim_out);
        const auto events = pipeline::run_simulate(cfg.sim, sim_out + "/readings.csv",
                                                   sim_out + "/events.csv");
        std::cerr << "simulate: wrote " << sim_out << "/readings.csv and " << events.size()
                  << " events\n";
    });

    // --- ingest -----------------------------------------------------------
    auto* ing = app.add_subcommand("ingest", "clean raw readings into directional samples");
    std::string ing_in, ing_out;
    std::optional<int> ing_lanes, ing_tol;
    ing->add_option("--in", ing_in, "raw readings file")->required();
    ing->add_option("--out", ing_out, "directional samples file")->required();
    ing->add_option("--lanes", ing_lanes, "configured lanes per direction");
    ing->add_option("--tolerance", ing_tol, "grid snap tolerance, seconds");
    ing->callback([&] {
        config::RunConfig cfg = cfgflag.load();
        pipeline::IngestOptions opts;
        opts.lanes_per_direction = ing_lanes.value_or(cfg.ingest_lanes);
        opts.limits.snap_tolerance_s = ing_tol.value_or(cfg.snap_tolerance_s);
        std::ifstream in(ing_in, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open: " + ing_in);
        std::ofstream out(ing_out, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open for writing: " + ing_out);
        const auto summary = pipeline::run_ingest(in, out, opts);
        std::cout << summary.to_text();
    });

    // --- featurize --------------------------------------------------------
    auto* feat = app.add_subcommand("featurize", "build labeled differential feature vectors");
    std::string feat_samples, feat_events, feat_out, feat_bounds;
    std::optional<int> feat_window, feat_offset;
    feat->add_option("--samples", feat_samples, "directional samples file")->required();
    feat->add_option("--events", feat_events, "event log (omit for all-zero labels)");
    feat->add_option("--out", feat_out, "labeled vectors file")->required();
    feat->add_option("--bounds-out", feat_bounds, "capacity bounds file");
    feat->add_option("--window", feat_window, "labeling window after event start, minutes");
    feat->add_option("--utc-offset", feat_offset, "local clock offset, minutes");
    feat->callback([&] {
        config::RunConfig cfg = cfgflag.load();
        pipeline::FeaturizeOptions opts;
        opts.window_min = feat_window.value_or(cfg.label_window_min);
        opts.utc_offset_min = feat_offset.value_or(cfg.utc_offset_min);
        const auto stats =
            pipeline::run_featurize(feat_samples, feat_events, feat_out, feat_bounds, opts);
        std::cerr << "featurize: " << stats.vectors << " vectors, " << stats.skipped_pairs
                  << " pairs skipped (missing side)\n";
    });

    // --- train ------------------------------------------------------------
    auto* tr = app.add_subcommand("train", "split the dataset and fit one classifier");
    std::string tr_vectors, tr_kind, tr_out;
    std::optional<int> tr_total, tr_pos, tr_cv, tr_cv_pos, tr_hidden, tr_epochs;
    std::optional<double> tr_lr;
    std::optional<std::uint64_t> tr_split_seed, tr_net_seed;
    tr->add_option("--vectors", tr_vectors, "labeled vectors file")->required();
    tr->add_option("--model", tr_kind, "knn, tree or net")->required();
    tr->add_option("--out", tr_out, "model file")->required();
    tr->add_option("--train-total", tr_total, "training partition size");
    tr->add_option("--train-pos", tr_pos, "positives in the training partition");
    tr->add_option("--cv-total", tr_cv, "cross-validation partition size");
    tr->add_option("--cv-pos", tr_cv_pos, "positives in the cross-validation partition");
    tr->add_option("--split-seed", tr_split_seed, "split seed");
    tr->add_option("--hidden", tr_hidden, "hidden neurons (net)");
    tr->add_option("--lr", tr_lr, "learning rate (net)");
    tr->add_option("--epochs", tr_epochs, "training epochs (net)");
    tr->add_option("--seed", tr_net_seed, "weight init seed (net)");
    tr->callback([&] {
        config::RunConfig cfg = cfgflag.load();
        models::Model model;
        if (tr_kind == "knn") model.kind = models::ModelKind::Knn;
        else if (tr_kind == "tree") model.kind = models::ModelKind::Tree;
        else if (tr_kind == "net") model.kind = models::ModelKind::Net;
        else throw CLI::ValidationError("--model", "expected knn, tree or net");

        const auto all = pipeline::load_vectors(tr_vectors);
        models::SplitSpec spec =
            default_split_for(model.kind, tr_split_seed.value_or(cfg.split_seed));
        if (tr_total) spec.train_total = *tr_total;
        if (tr_pos) spec.train_pos = *tr_pos;
        if (tr_cv) spec.cv_total = *tr_cv;
        if (tr_cv_pos) spec.cv_pos = *tr_cv_pos;
        const auto split = models::stratified_split(all, spec);
        const auto train = select(all, split.train);

        switch (model.kind) {
            case models::ModelKind::Knn:
                model.knn = models::knn_fit(train);
                break;
            case models::ModelKind::Tree:
                model.tree = models::tree_fit(train, cfg.tree);
                break;
            case models::ModelKind::Net: {
                models::NetParams params = cfg.net;
                if (tr_hidden) params.hidden = *tr_hidden;
                if (tr_lr) params.learning_rate = *tr_lr;
                if (tr_epochs) params.epochs = *tr_epochs;
                if (tr_net_seed) params.seed = *tr_net_seed;
                const auto cv = select(all, split.cv);
                model.net = models::net_fit(train, cv, params);
                break;
            }
        }
        models::save_model(model, tr_out);
        std::cerr << "train: fit " << tr_kind << " on " << train.size() << " vectors, wrote "
                  << tr_out << '\n';
    });

    // --- evaluate / sweep --------------------------------------------------
    auto add_eval_like = [&](const char* name, const char* desc, bool grid) {
        auto* cmd = app.add_subcommand(name, desc);
        auto vec = std::make_shared<std::string>();
        auto mdl = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        auto losses = std::make_shared<std::string>();
        auto horizon = std::make_shared<std::optional<double>>();
        auto total = std::make_shared<std::optional<int>>();
        auto pos = std::make_shared<std::optional<int>>();
        auto cv = std::make_shared<std::optional<int>>();
        auto cv_pos = std::make_shared<std::optional<int>>();
        auto seed = std::make_shared<std::optional<std::uint64_t>>();
        cmd->add_option("--vectors", *vec, "labeled vectors file")->required();
        cmd->add_option("--model", *mdl, "model file")->required();
        cmd->add_option("--out", *out, "report file (default: stdout)");
        if (grid) cmd->add_option("--grid", *losses, "loss grid lo:step:hi")->required();
        else cmd->add_option("--loss", *losses, "comma-separated loss values");
        cmd->add_option("--horizon-days", *horizon, "evaluation horizon for alarms/day");
        cmd->add_option("--train-total", *total, "recompute the training split; evaluate on test");
        cmd->add_option("--train-pos", *pos, "positives in the training partition");
        cmd->add_option("--cv-total", *cv, "cross-validation partition size");
        cmd->add_option("--cv-pos", *cv_pos, "positives in the cross-validation partition");
        cmd->add_option("--split-seed", *seed, "split seed");
        cmd->callback([=, &cfgflag] {
            config::RunConfig cfg = cfgflag.load();
            const models::Model model = models::load_model(*mdl);
            auto all = pipeline::load_vectors(*vec);

            std::vector<FeatureVector> eval_set;
            if (*total) {
                models::SplitSpec spec =
                    default_split_for(model.kind, seed->value_or(cfg.split_seed));
                spec.train_total = **total;
                if (*pos) spec.train_pos = **pos;
                if (*cv) spec.cv_total = **cv;
                if (*cv_pos) spec.cv_pos = **cv_pos;
                const auto split = models::stratified_split(all, spec);
                eval_set = select(all, split.test);
            } else {
                eval_set = std::move(all);
            }

            std::vector<double> loss_values;
            if (grid) {
                double lo = 0, step = 0, hi = 0;
                if (std::sscanf(losses->c_str(), "%lf:%lf:%lf", &lo, &step, &hi) != 3 || step <= 0)
                    throw std::runtime_error("--grid expects lo:step:hi with step > 0");
                for (double l = lo; l < hi + 1e-12; l += step) loss_values.push_back(l);
            } else {
                loss_values = losses->empty() ? cfg.losses : parse_loss_list(*losses);
            }
            if (model.kind == models::ModelKind::Knn) {
                for (double l : loss_values) {
                    if (l != 0.0)
                        throw std::runtime_error(
                            "nearest neighbor emits hard labels; only loss 0 is supported");
                }
            }
            std::vector<int> labels;
            labels.reserve(eval_set.size());
            for (const FeatureVector& v : eval_set) labels.push_back(v.label);
            const auto scores = pipeline::score_all(model, eval_set);
            const double days = horizon->value_or(derive_horizon_days(eval_set));
            const auto rows = eval::sweep(scores, labels, loss_values, days);

            std::ofstream file;
            std::ostream* sink = &std::cout;
            if (!out->empty()) {
                file.open(*out, std::ios::binary);
                if (!file) throw std::runtime_error("cannot open for writing: " + *out);
                sink = &file;
            }
            pipeline::write_report_csv(*sink, models::model_kind_name(model.kind), rows);
            std::vector<std::pair<std::string, eval::MetricsReport>> table;
            for (const auto& row : rows) {
                char label[64];
                std::snprintf(label, sizeof(label), "%s loss=%g",
                              models::model_kind_name(model.kind), row.loss);
                table.emplace_back(label, row.mr);
            }
            std::cerr << eval::render_report(table);
        });
    };
    add_eval_like("evaluate", "score a model at chosen loss thresholds", false);
    add_eval_like("sweep", "score a model over a loss grid", true);

    // --- detect -----------------------------------------------------------
    auto* det = app.add_subcommand("detect", "stream readings and emit alert lines");
    std::string det_model, det_bounds, det_in = "-";
    std::optional<double> det_loss;
    std::optional<int> det_lanes, det_offset;
    det->add_option("--model", det_model, "model file")->required();
    det->add_option("--bounds", det_bounds, "capacity bounds file")->required();
    det->add_option("--in", det_in, "readings file, or - for stdin");
    det->add_option("--loss", det_loss, "loss threshold");
    det->add_option("--lanes", det_lanes, "configured lanes per direction");
    det->add_option("--utc-offset", det_offset, "local clock offset, minutes");
    det->callback([&] {
        config::RunConfig cfg = cfgflag.load();
        const models::Model model = models::load_model(det_model);
        const auto bounds = pipeline::load_bounds(det_bounds);
        pipeline::DetectOptions opts;
        opts.loss = det_loss.value_or(0.0);
        opts.utc_offset_min = det_offset.value_or(cfg.utc_offset_min);
        opts.ingest.lanes_per_direction = det_lanes.value_or(cfg.ingest_lanes);
        opts.ingest.limits.snap_tolerance_s = cfg.snap_tolerance_s;
        if (model.kind == models::ModelKind::Knn && opts.loss != 0.0)
            throw std::runtime_error("nearest neighbor supports only loss 0");
        pipeline::DetectStats stats;
        if (det_in == "-") {
            stats = pipeline::run_detect(model, bounds, std::cin, std::cout, opts);
        } else {
            std::ifstream in(det_in, std::ios::binary);
            if (!in) throw std::runtime_error("cannot open: " + det_in);
            stats = pipeline::run_detect(model, bounds, in, std::cout, opts);
        }
        std::cerr << "detect: " << stats.alerts << " alerts from " << stats.vectors_scored
                  << " scored slots, " << stats.out_of_order << " out-of-order records\n";
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
