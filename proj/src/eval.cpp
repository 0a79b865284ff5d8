#include "rw/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "rw/models.hpp"

namespace rw::eval {

ConfusionMatrix confusion(std::span<const int> decisions, std::span<const int> labels) {
    if (decisions.size() != labels.size())
        throw std::invalid_argument("confusion: decisions and labels differ in length");
    ConfusionMatrix m;
    for (std::size_t i = 0; i < decisions.size(); ++i) {
        if (decisions[i] == 1) {
            (labels[i] == 1 ? m.tp : m.fp) += 1;
        } else {
            (labels[i] == 1 ? m.fn : m.tn) += 1;
        }
    }
    return m;
}

namespace {

std::optional<double> ratio(long long num, long long den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

MetricsReport metrics(const ConfusionMatrix& m) {
    MetricsReport r;
    r.tpr = ratio(m.tp, m.tp + m.fn);
    r.tnr = ratio(m.tn, m.tn + m.fp);
    r.ppv = ratio(m.tp, m.tp + m.fp);
    r.npv = ratio(m.tn, m.tn + m.fn);
    r.accuracy = ratio(m.tp + m.tn, m.total());
    return r;
}

double alarm_rate(const ConfusionMatrix& m, double horizon_days) {
    if (horizon_days <= 0) throw std::invalid_argument("alarm_rate: horizon must be positive");
    return static_cast<double>(m.fp) / horizon_days;
}

std::vector<SweepRow> sweep(std::span<const double> scores, std::span<const int> labels,
                            std::vector<double> loss_values, std::optional<double> horizon_days) {
    if (scores.size() != labels.size())
        throw std::invalid_argument("sweep: scores and labels differ in length");
    std::sort(loss_values.begin(), loss_values.end());
    std::vector<SweepRow> rows;
    rows.reserve(loss_values.size());
    std::vector<int> decisions(scores.size());
    for (double loss : loss_values) {
        for (std::size_t i = 0; i < scores.size(); ++i)
            decisions[i] = models::decide(scores[i], loss);
        SweepRow row;
        row.loss = loss;
        row.cm = confusion(decisions, labels);
        row.mr = metrics(row.cm);
        if (horizon_days) row.mr.alarms_per_day = alarm_rate(row.cm, *horizon_days);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string format_percent(const std::optional<double>& fraction) {
    if (!fraction) return "n/a";
    // Half away from zero at the second decimal of the percentage.
    const double pct = *fraction * 100.0;
    const double rounded = std::round(pct * 100.0) / 100.0;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", rounded);
    return buf;
}

std::string render_report(std::span<const std::pair<std::string, MetricsReport>> rows) {
    bool with_alarms = false;
    for (const auto& [label, mr] : rows) {
        if (mr.alarms_per_day) with_alarms = true;
    }
    std::string out;
    char line[256];
    std::snprintf(line, sizeof(line), "%-20s %9s %9s %9s %9s %9s", "model", "TPR", "TNR", "PPV",
                  "NPV", "Accuracy");
    out += line;
    if (with_alarms) out += "  Alarms/day";
    out += '\n';
    for (const auto& [label, mr] : rows) {
        std::snprintf(line, sizeof(line), "%-20s %9s %9s %9s %9s %9s", label.c_str(),
                      format_percent(mr.tpr).c_str(), format_percent(mr.tnr).c_str(),
                      format_percent(mr.ppv).c_str(), format_percent(mr.npv).c_str(),
                      format_percent(mr.accuracy).c_str());
        out += line;
        if (with_alarms) {
            if (mr.alarms_per_day) {
                std::snprintf(line, sizeof(line), "  %10.2f", *mr.alarms_per_day);
                out += line;
            } else {
                out += "         n/a";
            }
        }
        out += '\n';
    }
    return out;
}

}  // namespace rw::eval
