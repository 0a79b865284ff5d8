#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include "rw/models.hpp"

using namespace rw;
using namespace rw::models;

namespace {

FeatureVector fv(double a, double b, double c, double wd, double rush, int label) {
    FeatureVector v;
    v.x = {a, b, c, wd, rush};
    v.label = label;
    return v;
}

std::vector<FeatureVector> random_dataset(int n, int positives, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<FeatureVector> out;
    for (int i = 0; i < n; ++i) {
        out.push_back(fv(u(g) * 40, u(g) * 0.3, u(g), i % 2, std::abs(u(g)), i < positives ? 1 : 0));
    }
    return out;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

// ---------------------------------------------------------------------------
// Stratified split
// ---------------------------------------------------------------------------

TEST_CASE("stratified_split honors the requested class counts") {
    const auto data = random_dataset(372, 72, 11);
    SplitSpec spec;  // 130 train with 58 positives, no cv
    const auto split = stratified_split(data, spec);
    CHECK(split.train.size() == 130);
    CHECK(split.cv.empty());
    CHECK(split.test.size() == 372 - 130);
    int train_pos = 0, test_pos = 0;
    for (auto i : split.train) train_pos += data[i].label;
    for (auto i : split.test) test_pos += data[i].label;
    CHECK(train_pos == 58);
    CHECK(test_pos == 72 - 58);  // 14 positives left for testing

    SUBCASE("three-way split with a cross-validation partition") {
        SplitSpec s3{100, 42, 30, 16, 7};
        const auto sp = stratified_split(data, s3);
        CHECK(sp.train.size() == 100);
        CHECK(sp.cv.size() == 30);
        CHECK(sp.test.size() == 372 - 130);
        int cv_pos = 0;
        for (auto i : sp.cv) cv_pos += data[i].label;
        CHECK(cv_pos == 16);
        // Partitions are disjoint and cover the dataset.
        std::set<std::size_t> all;
        for (const auto* part : {&sp.train, &sp.cv, &sp.test}) {
            for (auto i : *part) CHECK(all.insert(i).second);
        }
        CHECK(all.size() == data.size());
    }
    SUBCASE("indices come back sorted ascending") {
        for (const auto* part : {&split.train, &split.test}) {
            for (std::size_t i = 1; i < part->size(); ++i) {
                CHECK((*part)[i - 1] < (*part)[i]);
            }
        }
    }
    SUBCASE("deterministic in the seed, different across seeds") {
        const auto again = stratified_split(data, spec);
        CHECK(again.train == split.train);
        SplitSpec other = spec;
        other.seed = 8;
        CHECK(stratified_split(data, other).train != split.train);
    }
}

TEST_CASE("stratified_split reports an unsatisfiable request") {
    const auto data = random_dataset(100, 20, 3);
    SplitSpec spec{60, 30, 0, 0, 7};  // only 20 positives exist
    CHECK_THROWS_WITH_AS(stratified_split(data, spec), doctest::Contains("positive"),
                         std::runtime_error);
}

// ---------------------------------------------------------------------------
// Nearest neighbor
// ---------------------------------------------------------------------------

TEST_CASE("knn returns the label of the nearest reference") {
    std::vector<FeatureVector> train = {fv(-10, 0, 0, 1, 0, 0), fv(10, 0, 0, 1, 0, 1)};
    const KnnModel m = knn_fit(train);
    CHECK(knn_classify(m, {-9, 0, 0, 1, 0}) == 0);
    CHECK(knn_classify(m, {9, 0, 0, 1, 0}) == 1);
    SUBCASE("an exact hit has distance zero") {
        CHECK(knn_classify(m, {-10, 0, 0, 1, 0}) == 0);
    }
    SUBCASE("a degenerate one-class reference set answers every query") {
        std::vector<FeatureVector> one = {fv(0, 0, 0, 0, 0, 1), fv(0, 0, 0, 0, 0, 1)};
        const KnnModel single = knn_fit(one);
        CHECK(knn_classify(single, {123, -4, 5, 1, 1}) == 1);
    }
}

TEST_CASE("knn agrees with a brute-force scan on random data") {
    const auto train = random_dataset(60, 25, 17);
    const KnnModel m = knn_fit(train);
    std::mt19937_64 g(23);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int q = 0; q < 500; ++q) {
        const std::array<double, kFeatureCount> x = {u(g) * 40, u(g) * 0.3, u(g),
                                                     static_cast<double>(q % 2), std::abs(u(g))};
        // Independent argmin over the stored scaled references.
        const auto xs = features::apply_scaler(m.scaler, x);
        std::size_t best = 0;
        double best_d = 1e300;
        for (std::size_t i = 0; i < m.refs.size(); ++i) {
            double d = 0;
            for (int f = 0; f < kFeatureCount; ++f) {
                const double diff = m.refs[i][f] - xs[f];
                d += diff * diff;
            }
            if (d < best_d) {
                best_d = d;
                best = i;
            }
        }
        CHECK(knn_classify(m, x) == m.labels[best]);
    }
}

// ---------------------------------------------------------------------------
// Regression tree
// ---------------------------------------------------------------------------

TEST_CASE("impurity equals p(1-p)") {
    CHECK(impurity(std::vector<int>{1, 1, 0, 0}) == doctest::Approx(0.25));
    CHECK(impurity(std::vector<int>{1, 1, 1}) == doctest::Approx(0.0));
    CHECK(impurity(std::vector<int>{0, 0, 0}) == doctest::Approx(0.0));
    CHECK(impurity(std::vector<int>{1, 0, 0, 0}) == doctest::Approx(0.1875));
    CHECK_THROWS(impurity(std::vector<int>{}));
}

TEST_CASE("best_split finds the separating midpoint") {
    std::vector<FeatureArray> xs = {{1, 0, 0, 0, 0}, {2, 0, 0, 0, 0}, {3, 0, 0, 0, 0},
                                    {4, 0, 0, 0, 0}};
    std::vector<int> ys = {0, 0, 1, 1};
    const auto choice = best_split(xs, ys, 1e-9);
    REQUIRE(choice.has_value());
    CHECK(choice->feature == 0);
    CHECK(choice->threshold == doctest::Approx(2.5));
    CHECK(choice->gain == doctest::Approx(0.25));  // 0.25 -> perfectly pure halves

    SUBCASE("constant labels admit no split") {
        std::vector<int> pure = {1, 1, 1, 1};
        CHECK_FALSE(best_split(xs, pure, 1e-9).has_value());
    }
    SUBCASE("min_leaf forbids cuts without enough samples per side") {
        std::vector<int> lonely = {1, 0, 0, 0};
        // With min_leaf 2 only the 2/2 cut at 2.5 survives.
        const auto constrained = best_split(xs, lonely, 1e-9, 2);
        REQUIRE(constrained.has_value());
        CHECK(constrained->threshold == doctest::Approx(2.5));
        // min_leaf 3 leaves no legal candidate at all.
        CHECK_FALSE(best_split(xs, lonely, 1e-9, 3).has_value());
    }
}

namespace {

// Independent exhaustive re-implementation of the split search.
std::optional<SplitChoice> oracle_split(const std::vector<FeatureArray>& xs,
                                        const std::vector<int>& ys, double min_gain,
                                        int min_leaf) {
    const double parent = impurity(ys);
    std::optional<SplitChoice> best;
    for (int f = 0; f < kFeatureCount; ++f) {
        std::vector<double> values;
        for (const auto& x : xs) values.push_back(x[f]);
        std::sort(values.begin(), values.end());
        values.erase(std::unique(values.begin(), values.end()), values.end());
        for (std::size_t i = 1; i < values.size(); ++i) {
            const double thr = (values[i - 1] + values[i]) / 2.0;
            std::vector<int> left, right;
            for (std::size_t k = 0; k < xs.size(); ++k) {
                (xs[k][f] < thr ? left : right).push_back(ys[k]);
            }
            if (static_cast<int>(left.size()) < min_leaf ||
                static_cast<int>(right.size()) < min_leaf)
                continue;
            const double w = static_cast<double>(left.size()) / xs.size();
            const double gain = parent - w * impurity(left) - (1 - w) * impurity(right);
            if (!best || gain > best->gain + 1e-15) best = SplitChoice{f, thr, gain};
        }
    }
    if (best && best->gain < min_gain) return std::nullopt;
    return best;
}

}  // namespace

TEST_CASE("best_split matches the exhaustive oracle on random datasets") {
    std::mt19937_64 g(31);
    std::uniform_int_distribution<int> level(0, 3);
    std::uniform_int_distribution<int> coin(0, 1);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<FeatureArray> xs;
        std::vector<int> ys;
        for (int i = 0; i < 12; ++i) {
            // Few discrete levels force threshold and feature ties.
            xs.push_back({static_cast<double>(level(g)), static_cast<double>(level(g)),
                          static_cast<double>(level(g)), static_cast<double>(coin(g)),
                          static_cast<double>(level(g)) / 3.0});
            ys.push_back(coin(g));
        }
        const auto got = best_split(xs, ys, 1e-9, 1);
        const auto want = oracle_split(xs, ys, 1e-9, 1);
        REQUIRE(got.has_value() == want.has_value());
        if (got) {
            CHECK(got->gain == doctest::Approx(want->gain));
            CHECK(got->feature == want->feature);
            CHECK(got->threshold == doctest::Approx(want->threshold));
        }
    }
}

TEST_CASE("tree_fit with depth 0 returns the base-rate leaf") {
    const auto data = random_dataset(130, 58, 5);
    TreeParams params;
    params.max_depth = 0;
    const TreeModel m = tree_fit(data, params);
    REQUIRE(m.nodes.size() == 1);
    CHECK(m.nodes[0].is_leaf());
    CHECK(tree_score(m, data[0].x) == doctest::Approx(58.0 / 130.0));
}

TEST_CASE("an unconstrained tree memorizes separable training data") {
    const auto data = random_dataset(80, 30, 13);
    TreeParams params;
    params.max_depth = 30;
    params.min_leaf = 1;
    params.min_gain = 1e-12;
    const TreeModel m = tree_fit(data, params);
    for (const auto& v : data) {
        const double s = tree_score(m, v.x);
        CHECK(s >= 0.0);
        CHECK(s <= 1.0);
        CHECK(decide(s, 0.0) == v.label);
    }
}

// ---------------------------------------------------------------------------
// Neural network
// ---------------------------------------------------------------------------

TEST_CASE("net_forward with zero weights outputs exactly 0.5") {
    NetModel m;
    m.hidden = 4;
    m.w1.assign(4 * kFeatureCount, 0.0);
    m.b1.assign(4, 0.0);
    m.w2.assign(4, 0.0);
    m.b2 = 0.0;
    CHECK(net_forward(m, {1, 2, 3, 4, 5}) == doctest::Approx(0.5));
}

TEST_CASE("net_forward matches a hand-computed single-unit network") {
    NetModel m;
    m.hidden = 1;
    m.w1 = {1.0, 0.0, 0.0, 0.0, 0.0};
    m.b1 = {0.0};
    m.w2 = {2.0};
    m.b2 = -1.0;
    const double expect = sigmoid(2.0 * std::tanh(0.5) - 1.0);
    CHECK(net_forward(m, {0.5, 0, 0, 0, 0}) == doctest::Approx(expect));
}

TEST_CASE("net_gradient matches central finite differences") {
    std::mt19937_64 g(41);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    NetModel m;
    m.hidden = 3;
    for (int i = 0; i < 3 * kFeatureCount; ++i) m.w1.push_back(u(g));
    for (int i = 0; i < 3; ++i) m.b1.push_back(u(g));
    for (int i = 0; i < 3; ++i) m.w2.push_back(u(g));
    m.b2 = u(g);

    std::vector<FeatureArray> xs;
    std::vector<int> ys;
    for (int i = 0; i < 7; ++i) {
        xs.push_back({u(g), u(g), u(g), u(g), u(g)});
        ys.push_back(i % 2);
    }
    const NetGradient grad = net_gradient(m, xs, ys);
    const double h = 1e-6;
    auto check_coord = [&](double* w, double analytic) {
        const double save = *w;
        *w = save + h;
        const double up = net_mse(m, xs, ys);
        *w = save - h;
        const double down = net_mse(m, xs, ys);
        *w = save;
        CHECK(analytic == doctest::Approx((up - down) / (2 * h)).epsilon(1e-5));
    };
    for (int i = 0; i < 3 * kFeatureCount; ++i) check_coord(&m.w1[i], grad.w1[i]);
    for (int i = 0; i < 3; ++i) check_coord(&m.b1[i], grad.b1[i]);
    for (int i = 0; i < 3; ++i) check_coord(&m.w2[i], grad.w2[i]);
    check_coord(&m.b2, grad.b2);
}

TEST_CASE("net_gradient is invariant under batch duplication") {
    std::vector<FeatureArray> xs = {{0.5, -0.2, 0.1, 1, 0}, {-0.3, 0.4, 0.0, 0, 1}};
    std::vector<int> ys = {1, 0};
    std::vector<FeatureArray> xs2 = {xs[0], xs[1], xs[0], xs[1]};
    std::vector<int> ys2 = {1, 0, 1, 0};
    NetModel m;
    m.hidden = 2;
    m.w1 = {0.1, -0.2, 0.3, 0.0, 0.1, -0.1, 0.2, 0.0, 0.1, 0.2};
    m.b1 = {0.05, -0.05};
    m.w2 = {0.4, -0.3};
    m.b2 = 0.1;
    const NetGradient a = net_gradient(m, xs, ys);
    const NetGradient b = net_gradient(m, xs2, ys2);
    for (std::size_t i = 0; i < a.w1.size(); ++i) CHECK(a.w1[i] == doctest::Approx(b.w1[i]));
    CHECK(a.b2 == doctest::Approx(b.b2));
}

TEST_CASE("net_fit learns XOR on the first two features") {
    std::vector<FeatureVector> train;
    for (int rep = 0; rep < 4; ++rep) {
        for (int a = 0; a < 2; ++a) {
            for (int b = 0; b < 2; ++b) {
                train.push_back(fv(a ? 1 : -1, b ? 1 : -1, 0, 0, 0, a ^ b));
            }
        }
    }
    NetParams params;
    params.hidden = 8;
    params.epochs = 4000;
    params.learning_rate = 0.5;
    params.seed = 3;
    const NetModel m = net_fit(train, train, params);
    for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
            const double o = net_forward(m, {a ? 1.0 : -1.0, b ? 1.0 : -1.0, 0, 0, 0});
            CHECK(decide(o, 0.0) == (a ^ b));
        }
    }
    SUBCASE("training is deterministic in the seed") {
        const NetModel again = net_fit(train, train, params);
        CHECK(again.w1 == m.w1);
        CHECK(again.b2 == m.b2);
        CHECK(again.best_cv_mse == m.best_cv_mse);
    }
}

TEST_CASE("net_fit returns the snapshot minimizing the cross-validation error") {
    const auto data = random_dataset(130, 58, 29);
    const std::vector<FeatureVector> train(data.begin(), data.begin() + 100);
    const std::vector<FeatureVector> cv(data.begin() + 100, data.end());
    NetParams params;
    params.epochs = 300;
    const NetModel m = net_fit(train, cv, params);
    // epochs_run records the epoch of the snapshot that was kept.
    CHECK(m.epochs_run >= 0);
    CHECK(m.epochs_run <= 300);
    // The stored weights must reproduce the reported best CV error.
    std::vector<FeatureArray> xs;
    std::vector<int> ys;
    for (const auto& v : cv) {
        xs.push_back(features::apply_scaler(m.scaler, v.x));
        ys.push_back(v.label);
    }
    CHECK(net_mse(m, xs, ys) == doctest::Approx(m.best_cv_mse));
}

// ---------------------------------------------------------------------------
// Decision rule and persistence
// ---------------------------------------------------------------------------

TEST_CASE("decide applies the loss-dependent threshold (1 + loss) / 2") {
    CHECK(decide(0.6, 0.0) == 1);
    CHECK(decide(0.6, 0.5) == 0);   // threshold 0.75
    CHECK(decide(0.75, 0.5) == 1);  // boundary counts as an alarm
    CHECK(decide(0.98, 0.94) == 1); // threshold 0.97
    CHECK(decide(0.96, 0.94) == 0);
    CHECK(decide(0.49, 0.0) == 0);
    CHECK_THROWS(decide(1.2, 0.0));
    CHECK_THROWS(decide(0.5, 1.0));
    CHECK_THROWS(decide(0.5, -0.1));
    SUBCASE("monotone: raising the loss never creates new alarms") {
        for (double s : {0.0, 0.3, 0.5, 0.7, 0.9, 1.0}) {
            int prev = decide(s, 0.0);
            for (double l : {0.2, 0.5, 0.8, 0.94}) {
                const int d = decide(s, l);
                CHECK(d <= prev);
                prev = d;
            }
        }
    }
}

TEST_CASE("models roundtrip through the text format with bit-exact scores") {
    const auto data = random_dataset(60, 25, 47);
    std::vector<Model> originals(3);
    originals[0].kind = ModelKind::Knn;
    originals[0].knn = knn_fit(data);
    originals[1].kind = ModelKind::Tree;
    originals[1].tree = tree_fit(data, TreeParams{});
    originals[2].kind = ModelKind::Net;
    NetParams np;
    np.epochs = 50;
    originals[2].net = net_fit(data, data, np);

    const auto queries = random_dataset(40, 10, 53);
    for (const Model& original : originals) {
        std::stringstream buf;
        save_model(original, buf);
        const Model loaded = load_model(buf);
        CHECK(loaded.kind == original.kind);
        for (const auto& q : queries) {
            // Bit-exact: the text format stores max_digits10 digits.
            CHECK(loaded.score(q.x) == original.score(q.x));
        }
    }
}

TEST_CASE("load_model rejects malformed files") {
    const auto data = random_dataset(20, 8, 61);
    Model m;
    m.kind = ModelKind::Tree;
    m.tree = tree_fit(data, TreeParams{});
    std::stringstream buf;
    save_model(m, buf);
    const std::string text = buf.str();

    SUBCASE("unsupported version") {
        std::stringstream bad("RWMODEL 2 tree\n");
        CHECK_THROWS_WITH_AS(load_model(bad), doctest::Contains("version"), std::runtime_error);
    }
    SUBCASE("unknown kind") {
        std::stringstream bad("RWMODEL 1 forest\n");
        CHECK_THROWS_WITH_AS(load_model(bad), doctest::Contains("kind"), std::runtime_error);
    }
    SUBCASE("missing header") {
        std::stringstream bad("not a model\n");
        CHECK_THROWS(load_model(bad));
    }
    SUBCASE("truncated payload") {
        std::stringstream bad(text.substr(0, text.size() / 2));
        CHECK_THROWS(load_model(bad));
    }
}
