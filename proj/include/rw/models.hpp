#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rw/features.hpp"
#include "rw/records.hpp"

namespace rw::models {

using features::ScalerParams;
using FeatureArray = std::array<double, kFeatureCount>;

// ---------------------------------------------------------------------------
// Stratified split
// ---------------------------------------------------------------------------

struct SplitSpec {
    int train_total = 130;
    int train_pos = 58;
    int cv_total = 0;
    int cv_pos = 0;
    std::uint64_t seed = 7;
};

struct SplitResult {
    std::vector<std::size_t> train;  // indices into the dataset, ascending
    std::vector<std::size_t> cv;
    std::vector<std::size_t> test;   // remainder
};

// Seeded uniform sampling without replacement, stratified by label.
// Throws std::runtime_error naming the shortfall when unsatisfiable.
SplitResult stratified_split(std::span<const FeatureVector> dataset, const SplitSpec& spec);

// ---------------------------------------------------------------------------
// Nearest neighbor (k = 1, Euclidean distance on scaled features)
// ---------------------------------------------------------------------------

struct KnnModel {
    ScalerParams scaler;
    std::vector<FeatureArray> refs;  // scaled
    std::vector<int> labels;
};

KnnModel knn_fit(std::span<const FeatureVector> train);

// Label of the Euclidean-nearest reference; ties keep the lowest index.
int knn_classify(const KnnModel& model, const FeatureArray& x_unscaled);

// ---------------------------------------------------------------------------
// Regression tree (variance impurity p(1-p), exhaustive midpoint splits)
// ---------------------------------------------------------------------------

struct TreeParams {
    int max_depth = 8;
    int min_leaf = 2;
    double min_gain = 1e-6;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double pos_fraction = 0.0;
    int sample_count = 0;
    bool is_leaf() const { return feature < 0; }
};

struct TreeModel {
    ScalerParams scaler;
    TreeParams params;
    std::vector<TreeNode> nodes;  // preorder, root at 0
};

// p(1-p) where p is the positive fraction. Throws on empty input.
double impurity(std::span<const int> labels);

struct SplitChoice {
    int feature = 0;
    double threshold = 0.0;
    double gain = 0.0;
};

// Exhaustive scan over all features and all midpoints between consecutive
// distinct sorted values, maximizing the weighted impurity decrease.
// Ties break toward (lower feature index, lower threshold). Returns nullopt
// when the best gain is below min_gain or no candidate leaves min_leaf
// samples on each side.
std::optional<SplitChoice> best_split(std::span<const FeatureArray> xs, std::span<const int> ys,
                                      double min_gain, int min_leaf = 1);

TreeModel tree_fit(std::span<const FeatureVector> train, const TreeParams& params);

// Leaf positive fraction after traversal (value < threshold goes left).
double tree_score(const TreeModel& model, const FeatureArray& x_unscaled);

// ---------------------------------------------------------------------------
// Feedforward network [5, H, 1], tanh hidden, logistic output, MSE loss
// ---------------------------------------------------------------------------

struct NetParams {
    int hidden = 10;
    double learning_rate = 0.1;
    int epochs = 2000;
    std::uint64_t seed = 1;
};

struct NetModel {
    ScalerParams scaler;
    int hidden = 0;
    std::vector<double> w1;  // hidden x 5, row-major per hidden unit
    std::vector<double> b1;  // hidden
    std::vector<double> w2;  // hidden
    double b2 = 0.0;
    std::uint64_t seed = 0;
    int epochs_run = 0;
    double best_cv_mse = 0.0;
};

// Forward pass on an already-scaled input.
double net_forward_scaled(const NetModel& model, const double* xs);

// Scales x with the stored scaler, then evaluates the network. Output in (0,1).
double net_forward(const NetModel& model, const FeatureArray& x_unscaled);

struct NetGradient {
    std::vector<double> w1, b1, w2;
    double b2 = 0.0;
};

// Mean squared error over a scaled batch.
double net_mse(const NetModel& model, std::span<const FeatureArray> xs_scaled,
               std::span<const int> ys);

// Exact analytic gradient of the batch-mean squared error. Throws on an
// empty batch or a dimension mismatch.
NetGradient net_gradient(const NetModel& model, std::span<const FeatureArray> xs_scaled,
                         std::span<const int> ys);

// Seeded uniform init in [-0.5, 0.5], full-batch gradient descent, and an
// early-stopping snapshot at the minimum cross-validation MSE.
NetModel net_fit(std::span<const FeatureVector> train, std::span<const FeatureVector> cv,
                 const NetParams& params);

// ---------------------------------------------------------------------------
// Loss-threshold decision rule and persistence
// ---------------------------------------------------------------------------

// 1 (accident) iff score >= tau = (1 + loss) / 2.
int decide(double score, double loss);

enum class ModelKind { Knn, Tree, Net };

const char* model_kind_name(ModelKind k);

struct Model {
    ModelKind kind = ModelKind::Knn;
    KnnModel knn;
    TreeModel tree;
    NetModel net;

    double score(const FeatureArray& x_unscaled) const;
};

// Text format: header "RWMODEL 1 <kind>", a scaler line, then a
// kind-specific body. Numbers are written with max_digits10 precision so a
// roundtrip preserves scores bit-exactly.
void save_model(const Model& model, std::ostream& out);
void save_model(const Model& model, const std::string& path);

// Throws std::runtime_error on unknown version or kind, or truncated payload.
Model load_model(std::istream& in);
Model load_model(const std::string& path);

}  // namespace rw::models
