#include "rw/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "rw/rng.hpp"

namespace rw::models {

// ---------------------------------------------------------------------------
// Split
// ---------------------------------------------------------------------------

namespace {

void fisher_yates(std::vector<std::size_t>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace

SplitResult stratified_split(std::span<const FeatureVector> dataset, const SplitSpec& spec) {
    if (spec.train_pos > spec.train_total || spec.cv_pos > spec.cv_total)
        throw std::runtime_error("split: positives requested exceed partition size");
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (dataset[i].label == 1) pos.push_back(i);
        else if (dataset[i].label == 0) neg.push_back(i);
        else throw std::runtime_error("split: dataset contains unlabeled vectors");
    }
    const int need_pos = spec.train_pos + spec.cv_pos;
    const int need_neg = (spec.train_total - spec.train_pos) + (spec.cv_total - spec.cv_pos);
    if (need_pos > static_cast<int>(pos.size())) {
        throw std::runtime_error("split: requested " + std::to_string(need_pos) +
                                 " positives but only " + std::to_string(pos.size()) + " available");
    }
    if (need_neg > static_cast<int>(neg.size())) {
        throw std::runtime_error("split: requested " + std::to_string(need_neg) +
                                 " negatives but only " + std::to_string(neg.size()) + " available");
    }
    std::mt19937_64 rng(mix_seed(spec.seed, 0x73706c69ULL));
    fisher_yates(pos, rng);
    fisher_yates(neg, rng);

    SplitResult out;
    auto take = [](std::vector<std::size_t>& src, std::size_t& cursor, int n,
                   std::vector<std::size_t>& dst) {
        dst.insert(dst.end(), src.begin() + cursor, src.begin() + cursor + n);
        cursor += n;
    };
    std::size_t pc = 0, nc = 0;
    take(pos, pc, spec.train_pos, out.train);
    take(neg, nc, spec.train_total - spec.train_pos, out.train);
    take(pos, pc, spec.cv_pos, out.cv);
    take(neg, nc, spec.cv_total - spec.cv_pos, out.cv);
    out.test.insert(out.test.end(), pos.begin() + pc, pos.end());
    out.test.insert(out.test.end(), neg.begin() + nc, neg.end());
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.cv.begin(), out.cv.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

// ---------------------------------------------------------------------------
// Nearest neighbor
// ---------------------------------------------------------------------------

KnnModel knn_fit(std::span<const FeatureVector> train) {
    if (train.empty()) throw std::invalid_argument("knn_fit: empty training set");
    KnnModel m;
    m.scaler = features::fit_scaler(train);
    m.refs.reserve(train.size());
    m.labels.reserve(train.size());
    for (const FeatureVector& v : train) {
        m.refs.push_back(features::apply_scaler(m.scaler, v.x));
        m.labels.push_back(v.label);
    }
    return m;
}

int knn_classify(const KnnModel& model, const FeatureArray& x_unscaled) {
    if (model.refs.empty()) throw std::invalid_argument("knn_classify: model has no references");
    const FeatureArray q = features::apply_scaler(model.scaler, x_unscaled);
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_i = 0;
    for (std::size_t i = 0; i < model.refs.size(); ++i) {
        const FeatureArray& r = model.refs[i];
        double d = 0;
        for (int f = 0; f < kFeatureCount; ++f) {
            const double t = q[f] - r[f];
            d += t * t;
        }
        if (d < best) {
            best = d;
            best_i = i;
        }
    }
    return model.labels[best_i];
}

// ---------------------------------------------------------------------------
// Regression tree
// ---------------------------------------------------------------------------

double impurity(std::span<const int> labels) {
    if (labels.empty()) throw std::invalid_argument("impurity: empty label set");
    double pos = 0;
    for (int y : labels) pos += y;
    const double p = pos / static_cast<double>(labels.size());
    return p * (1.0 - p);
}

std::optional<SplitChoice> best_split(std::span<const FeatureArray> xs, std::span<const int> ys,
                                      double min_gain, int min_leaf) {
    if (xs.size() != ys.size()) throw std::invalid_argument("best_split: size mismatch");
    const std::size_t n = xs.size();
    if (n < 2) return std::nullopt;
    double total_pos = 0;
    for (int y : ys) total_pos += y;
    const double parent_imp = (total_pos / n) * (1.0 - total_pos / n);

    std::optional<SplitChoice> best;
    std::vector<std::size_t> order(n);
    for (int f = 0; f < kFeatureCount; ++f) {
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return xs[a][f] < xs[b][f]; });
        double left_pos = 0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            left_pos += ys[order[i]];
            if (xs[order[i]][f] == xs[order[i + 1]][f]) continue;
            const double nl = static_cast<double>(i + 1);
            const double nr = static_cast<double>(n - i - 1);
            if (nl < min_leaf || nr < min_leaf) continue;
            const double pl = left_pos / nl;
            const double pr = (total_pos - left_pos) / nr;
            const double child_imp = (nl * pl * (1 - pl) + nr * pr * (1 - pr)) / n;
            const double gain = parent_imp - child_imp;
            if (!best || gain > best->gain) {
                best = SplitChoice{f, (xs[order[i]][f] + xs[order[i + 1]][f]) / 2.0, gain};
            }
        }
    }
    if (!best || best->gain < min_gain) return std::nullopt;
    return best;
}

namespace {

int grow_tree(std::vector<TreeNode>& nodes, const std::vector<FeatureArray>& xs,
              const std::vector<int>& ys, std::vector<std::size_t>& idx, int depth,
              const TreeParams& params) {
    const int node_id = static_cast<int>(nodes.size());
    nodes.emplace_back();
    double pos = 0;
    for (std::size_t i : idx) pos += ys[i];
    nodes[node_id].sample_count = static_cast<int>(idx.size());
    nodes[node_id].pos_fraction = pos / static_cast<double>(idx.size());

    if (depth >= params.max_depth || idx.size() < 2 * static_cast<std::size_t>(params.min_leaf) ||
        pos == 0 || pos == static_cast<double>(idx.size())) {
        return node_id;
    }
    std::vector<FeatureArray> node_xs;
    std::vector<int> node_ys;
    node_xs.reserve(idx.size());
    node_ys.reserve(idx.size());
    for (std::size_t i : idx) {
        node_xs.push_back(xs[i]);
        node_ys.push_back(ys[i]);
    }
    const auto choice = best_split(node_xs, node_ys, params.min_gain, params.min_leaf);
    if (!choice) return node_id;

    std::vector<std::size_t> left_idx, right_idx;
    for (std::size_t i : idx) {
        (xs[i][choice->feature] < choice->threshold ? left_idx : right_idx).push_back(i);
    }
    idx.clear();
    idx.shrink_to_fit();
    nodes[node_id].feature = choice->feature;
    nodes[node_id].threshold = choice->threshold;
    const int left = grow_tree(nodes, xs, ys, left_idx, depth + 1, params);
    nodes[node_id].left = left;
    const int right = grow_tree(nodes, xs, ys, right_idx, depth + 1, params);
    nodes[node_id].right = right;
    return node_id;
}

}  // namespace

TreeModel tree_fit(std::span<const FeatureVector> train, const TreeParams& params) {
    if (train.empty()) throw std::invalid_argument("tree_fit: empty training set");
    TreeModel m;
    m.params = params;
    m.scaler = features::fit_scaler(train);
    std::vector<FeatureArray> xs;
    std::vector<int> ys;
    xs.reserve(train.size());
    ys.reserve(train.size());
    for (const FeatureVector& v : train) {
        xs.push_back(features::apply_scaler(m.scaler, v.x));
        ys.push_back(v.label);
    }
    std::vector<std::size_t> idx(train.size());
    std::iota(idx.begin(), idx.end(), 0);
    grow_tree(m.nodes, xs, ys, idx, 0, params);
    return m;
}

double tree_score(const TreeModel& model, const FeatureArray& x_unscaled) {
    if (model.nodes.empty()) throw std::invalid_argument("tree_score: empty model");
    const FeatureArray x = features::apply_scaler(model.scaler, x_unscaled);
    int node = 0;
    while (!model.nodes[node].is_leaf()) {
        const TreeNode& nd = model.nodes[node];
        node = x[nd.feature] < nd.threshold ? nd.left : nd.right;
    }
    return model.nodes[node].pos_fraction;
}

// ---------------------------------------------------------------------------
// Feedforward network
// ---------------------------------------------------------------------------

namespace {

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

double net_forward_scaled(const NetModel& model, const double* xs) {
    const int h = model.hidden;
    if (static_cast<int>(model.w1.size()) != h * kFeatureCount ||
        static_cast<int>(model.b1.size()) != h || static_cast<int>(model.w2.size()) != h) {
        throw std::invalid_argument("net_forward: weight dimensions inconsistent with layer sizes");
    }
    double z2 = model.b2;
    for (int j = 0; j < h; ++j) {
        double z1 = model.b1[j];
        const double* w = &model.w1[static_cast<std::size_t>(j) * kFeatureCount];
        for (int f = 0; f < kFeatureCount; ++f) z1 += w[f] * xs[f];
        z2 += model.w2[j] * std::tanh(z1);
    }
    return logistic(z2);
}

double net_forward(const NetModel& model, const FeatureArray& x_unscaled) {
    const FeatureArray xs = features::apply_scaler(model.scaler, x_unscaled);
    return net_forward_scaled(model, xs.data());
}

double net_mse(const NetModel& model, std::span<const FeatureArray> xs_scaled,
               std::span<const int> ys) {
    if (xs_scaled.empty() || xs_scaled.size() != ys.size())
        throw std::invalid_argument("net_mse: empty batch or size mismatch");
    double sum = 0;
    for (std::size_t i = 0; i < xs_scaled.size(); ++i) {
        const double e = net_forward_scaled(model, xs_scaled[i].data()) - ys[i];
        sum += e * e;
    }
    return sum / static_cast<double>(xs_scaled.size());
}

NetGradient net_gradient(const NetModel& model, std::span<const FeatureArray> xs_scaled,
                         std::span<const int> ys) {
    if (xs_scaled.empty() || xs_scaled.size() != ys.size())
        throw std::invalid_argument("net_gradient: empty batch or size mismatch");
    const int h = model.hidden;
    NetGradient g;
    g.w1.assign(model.w1.size(), 0.0);
    g.b1.assign(model.b1.size(), 0.0);
    g.w2.assign(model.w2.size(), 0.0);
    g.b2 = 0.0;
    std::vector<double> hidden(h);
    const double inv_n = 1.0 / static_cast<double>(xs_scaled.size());
    for (std::size_t i = 0; i < xs_scaled.size(); ++i) {
        const double* xs = xs_scaled[i].data();
        double z2 = model.b2;
        for (int j = 0; j < h; ++j) {
            double z1 = model.b1[j];
            const double* w = &model.w1[static_cast<std::size_t>(j) * kFeatureCount];
            for (int f = 0; f < kFeatureCount; ++f) z1 += w[f] * xs[f];
            hidden[j] = std::tanh(z1);
            z2 += model.w2[j] * hidden[j];
        }
        const double out = logistic(z2);
        // d(MSE)/d(z2) = 2/n * (out - y) * out * (1 - out)
        const double delta2 = 2.0 * inv_n * (out - ys[i]) * out * (1.0 - out);
        g.b2 += delta2;
        for (int j = 0; j < h; ++j) {
            g.w2[j] += delta2 * hidden[j];
            const double delta1 = delta2 * model.w2[j] * (1.0 - hidden[j] * hidden[j]);
            g.b1[j] += delta1;
            double* gw = &g.w1[static_cast<std::size_t>(j) * kFeatureCount];
            for (int f = 0; f < kFeatureCount; ++f) gw[f] += delta1 * xs[f];
        }
    }
    return g;
}

NetModel net_fit(std::span<const FeatureVector> train, std::span<const FeatureVector> cv,
                 const NetParams& params) {
    if (train.empty() || cv.empty()) throw std::invalid_argument("net_fit: empty train or cv set");
    if (params.learning_rate <= 0) throw std::invalid_argument("net_fit: learning rate must be positive");
    if (params.epochs <= 0) throw std::invalid_argument("net_fit: epochs must be positive");
    if (params.hidden <= 0) throw std::invalid_argument("net_fit: hidden size must be positive");

    NetModel m;
    m.scaler = features::fit_scaler(train);
    m.hidden = params.hidden;
    m.seed = params.seed;
    const int h = params.hidden;
    m.w1.resize(static_cast<std::size_t>(h) * kFeatureCount);
    m.b1.resize(h);
    m.w2.resize(h);
    std::mt19937_64 rng(mix_seed(params.seed, 0x6e657477ULL));
    for (double& w : m.w1) w = uniform01(rng) - 0.5;
    for (double& w : m.b1) w = uniform01(rng) - 0.5;
    for (double& w : m.w2) w = uniform01(rng) - 0.5;
    m.b2 = uniform01(rng) - 0.5;

    std::vector<FeatureArray> train_x, cv_x;
    std::vector<int> train_y, cv_y;
    for (const FeatureVector& v : train) {
        train_x.push_back(features::apply_scaler(m.scaler, v.x));
        train_y.push_back(v.label);
    }
    for (const FeatureVector& v : cv) {
        cv_x.push_back(features::apply_scaler(m.scaler, v.x));
        cv_y.push_back(v.label);
    }

    NetModel best = m;
    best.best_cv_mse = net_mse(m, cv_x, cv_y);
    for (int epoch = 1; epoch <= params.epochs; ++epoch) {
        const NetGradient g = net_gradient(m, train_x, train_y);
        for (std::size_t i = 0; i < m.w1.size(); ++i) m.w1[i] -= params.learning_rate * g.w1[i];
        for (int j = 0; j < h; ++j) {
            m.b1[j] -= params.learning_rate * g.b1[j];
            m.w2[j] -= params.learning_rate * g.w2[j];
        }
        m.b2 -= params.learning_rate * g.b2;
        const double cv_mse = net_mse(m, cv_x, cv_y);
        if (cv_mse < best.best_cv_mse) {
            best = m;
            best.best_cv_mse = cv_mse;
            best.epochs_run = epoch;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Decision rule
// ---------------------------------------------------------------------------

int decide(double score, double loss) {
    if (score < 0.0 || score > 1.0) throw std::invalid_argument("decide: score outside [0,1]");
    if (loss < 0.0 || loss >= 1.0) throw std::invalid_argument("decide: loss outside [0,1)");
    return score >= (1.0 + loss) / 2.0 ? 1 : 0;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

const char* model_kind_name(ModelKind k) {
    switch (k) {
        case ModelKind::Knn: return "knn";
        case ModelKind::Tree: return "tree";
        case ModelKind::Net: return "net";
    }
    return "?";
}

double Model::score(const FeatureArray& x) const {
    switch (kind) {
        case ModelKind::Knn: return static_cast<double>(knn_classify(knn, x));
        case ModelKind::Tree: return tree_score(tree, x);
        case ModelKind::Net: return net_forward(net, x);
    }
    throw std::logic_error("Model::score: bad kind");
}

namespace {

void write_scaler(std::ostream& out, const ScalerParams& s) {
    out << "scaler";
    for (int f = 0; f < 3; ++f) out << ' ' << s.mean[f] << ' ' << s.stddev[f];
    out << '\n';
}

void read_token(std::istream& in, const char* expected) {
    std::string tok;
    if (!(in >> tok) || tok != expected)
        throw std::runtime_error(std::string("model file: expected '") + expected + "' section");
}

ScalerParams read_scaler(std::istream& in) {
    read_token(in, "scaler");
    ScalerParams s;
    for (int f = 0; f < 3; ++f) {
        if (!(in >> s.mean[f] >> s.stddev[f]))
            throw std::runtime_error("model file: truncated scaler line");
    }
    return s;
}

void save_tree_node(std::ostream& out, const TreeModel& m, int node) {
    const TreeNode& nd = m.nodes[node];
    if (nd.is_leaf()) {
        out << "L " << nd.pos_fraction << ' ' << nd.sample_count << '\n';
    } else {
        out << "I " << nd.feature << ' ' << nd.threshold << '\n';
        save_tree_node(out, m, nd.left);
        save_tree_node(out, m, nd.right);
    }
}

int load_tree_node(std::istream& in, TreeModel& m, int remaining_depth) {
    if (remaining_depth < 0) throw std::runtime_error("model file: tree deeper than max_depth");
    std::string tag;
    if (!(in >> tag)) throw std::runtime_error("model file: truncated tree body");
    const int id = static_cast<int>(m.nodes.size());
    m.nodes.emplace_back();
    if (tag == "L") {
        if (!(in >> m.nodes[id].pos_fraction >> m.nodes[id].sample_count))
            throw std::runtime_error("model file: truncated leaf node");
        if (m.nodes[id].pos_fraction < 0 || m.nodes[id].pos_fraction > 1)
            throw std::runtime_error("model file: leaf fraction outside [0,1]");
    } else if (tag == "I") {
        int feature = 0;
        double threshold = 0;
        if (!(in >> feature >> threshold)) throw std::runtime_error("model file: truncated internal node");
        if (feature < 0 || feature >= kFeatureCount)
            throw std::runtime_error("model file: node feature index out of range");
        m.nodes[id].feature = feature;
        m.nodes[id].threshold = threshold;
        const int left = load_tree_node(in, m, remaining_depth - 1);
        m.nodes[id].left = left;
        const int right = load_tree_node(in, m, remaining_depth - 1);
        m.nodes[id].right = right;
    } else {
        throw std::runtime_error("model file: unknown tree node tag '" + tag + "'");
    }
    return id;
}

}  // namespace

void save_model(const Model& model, std::ostream& out) {
    out.precision(std::numeric_limits<double>::max_digits10);
    out << "RWMODEL 1 " << model_kind_name(model.kind) << '\n';
    switch (model.kind) {
        case ModelKind::Knn: {
            write_scaler(out, model.knn.scaler);
            out << "refs " << model.knn.refs.size() << '\n';
            for (std::size_t i = 0; i < model.knn.refs.size(); ++i) {
                for (double v : model.knn.refs[i]) out << v << ' ';
                out << model.knn.labels[i] << '\n';
            }
            break;
        }
        case ModelKind::Tree: {
            write_scaler(out, model.tree.scaler);
            const TreeParams& p = model.tree.params;
            out << "params " << p.max_depth << ' ' << p.min_leaf << ' ' << p.min_gain << '\n';
            out << "nodes " << model.tree.nodes.size() << '\n';
            save_tree_node(out, model.tree, 0);
            break;
        }
        case ModelKind::Net: {
            write_scaler(out, model.net.scaler);
            out << "layers " << kFeatureCount << ' ' << model.net.hidden << " 1\n";
            out << "meta " << model.net.seed << ' ' << model.net.epochs_run << ' '
                << model.net.best_cv_mse << '\n';
            out << "w1\n";
            for (int j = 0; j < model.net.hidden; ++j) {
                for (int f = 0; f < kFeatureCount; ++f)
                    out << model.net.w1[static_cast<std::size_t>(j) * kFeatureCount + f]
                        << (f + 1 < kFeatureCount ? ' ' : '\n');
            }
            out << "b1\n";
            for (int j = 0; j < model.net.hidden; ++j)
                out << model.net.b1[j] << (j + 1 < model.net.hidden ? ' ' : '\n');
            out << "w2\n";
            for (int j = 0; j < model.net.hidden; ++j)
                out << model.net.w2[j] << (j + 1 < model.net.hidden ? ' ' : '\n');
            out << "b2\n" << model.net.b2 << '\n';
            break;
        }
    }
    if (!out) throw std::runtime_error("save_model: write failure");
}

void save_model(const Model& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_model: cannot open " + path);
    save_model(model, out);
}

Model load_model(std::istream& in) {
    std::string magic, kind;
    int version = 0;
    if (!(in >> magic >> version >> kind) || magic != "RWMODEL")
        throw std::runtime_error("model file: missing RWMODEL header");
    if (version != 1)
        throw std::runtime_error("model file: unsupported version " + std::to_string(version));
    Model m;
    if (kind == "knn") {
        m.kind = ModelKind::Knn;
        m.knn.scaler = read_scaler(in);
        read_token(in, "refs");
        std::size_t n = 0;
        if (!(in >> n) || n == 0) throw std::runtime_error("model file: invalid reference count");
        m.knn.refs.resize(n);
        m.knn.labels.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (double& v : m.knn.refs[i]) {
                if (!(in >> v)) throw std::runtime_error("model file: truncated reference list");
            }
            if (!(in >> m.knn.labels[i]) || (m.knn.labels[i] != 0 && m.knn.labels[i] != 1))
                throw std::runtime_error("model file: invalid reference label");
        }
    } else if (kind == "tree") {
        m.kind = ModelKind::Tree;
        m.tree.scaler = read_scaler(in);
        read_token(in, "params");
        if (!(in >> m.tree.params.max_depth >> m.tree.params.min_leaf >> m.tree.params.min_gain))
            throw std::runtime_error("model file: truncated tree params");
        read_token(in, "nodes");
        std::size_t n = 0;
        if (!(in >> n) || n == 0) throw std::runtime_error("model file: invalid node count");
        load_tree_node(in, m.tree, m.tree.params.max_depth);
        if (m.tree.nodes.size() != n)
            throw std::runtime_error("model file: node count does not match tree body");
    } else if (kind == "net") {
        m.kind = ModelKind::Net;
        m.net.scaler = read_scaler(in);
        read_token(in, "layers");
        int in_dim = 0, hidden = 0, out_dim = 0;
        if (!(in >> in_dim >> hidden >> out_dim) || in_dim != kFeatureCount || out_dim != 1 ||
            hidden <= 0) {
            throw std::runtime_error("model file: unsupported layer sizes");
        }
        m.net.hidden = hidden;
        read_token(in, "meta");
        if (!(in >> m.net.seed >> m.net.epochs_run >> m.net.best_cv_mse))
            throw std::runtime_error("model file: truncated meta line");
        m.net.w1.resize(static_cast<std::size_t>(hidden) * kFeatureCount);
        m.net.b1.resize(hidden);
        m.net.w2.resize(hidden);
        read_token(in, "w1");
        for (double& v : m.net.w1)
            if (!(in >> v)) throw std::runtime_error("model file: truncated w1 block");
        read_token(in, "b1");
        for (double& v : m.net.b1)
            if (!(in >> v)) throw std::runtime_error("model file: truncated b1 block");
        read_token(in, "w2");
        for (double& v : m.net.w2)
            if (!(in >> v)) throw std::runtime_error("model file: truncated w2 block");
        read_token(in, "b2");
        if (!(in >> m.net.b2)) throw std::runtime_error("model file: truncated b2 block");
    } else {
        throw std::runtime_error("model file: unknown kind '" + kind + "'");
    }
    return m;
}

Model load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_model: cannot open " + path);
    return load_model(in);
}

}  // namespace rw::models
