#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace rw::eval {

struct ConfusionMatrix {
    long long tp = 0, fn = 0, fp = 0, tn = 0;
    long long total() const { return tp + fn + fp + tn; }
};

// Positional counting; throws std::invalid_argument on length mismatch.
ConfusionMatrix confusion(std::span<const int> decisions, std::span<const int> labels);

// Fractions in [0,1]; nullopt marks an undefined metric (zero denominator).
struct MetricsReport {
    std::optional<double> tpr, tnr, ppv, npv, accuracy;
    std::optional<double> alarms_per_day;
};

// TPR = TP/(TP+FN), TNR = TN/(TN+FP), PPV = TP/(TP+FP), NPV = TN/(TN+FN),
// Accuracy = (TP+TN)/total. Zero denominators yield the undefined marker.
MetricsReport metrics(const ConfusionMatrix& m);

// False positives per day over the evaluation horizon. Throws on a
// non-positive horizon.
double alarm_rate(const ConfusionMatrix& m, double horizon_days);

struct SweepRow {
    double loss = 0.0;
    ConfusionMatrix cm;
    MetricsReport mr;
};

// Applies the loss-threshold decision rule per loss value; rows ordered by
// ascending loss. alarms_per_day filled when a horizon is supplied.
std::vector<SweepRow> sweep(std::span<const double> scores, std::span<const int> labels,
                            std::vector<double> loss_values,
                            std::optional<double> horizon_days = std::nullopt);

// Percentage with 2 decimals, rounded half away from zero; "n/a" when
// undefined.
std::string format_percent(const std::optional<double>& fraction);

// Human-readable table: fixed column order TPR, TNR, PPV, NPV, Accuracy
// (percent), plus alarms/day when any row carries one. Deterministic bytes.
std::string render_report(std::span<const std::pair<std::string, MetricsReport>> rows);

}  // namespace rw::eval
