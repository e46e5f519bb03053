#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "json.hpp"
#include "neatboost/matrix.hpp"

namespace neatboost {

struct GbdtConfig {
    int n_estimators = 100;
    int max_depth = 6;
    int num_leaves = 31;
    double learning_rate = 0.1;
    double feature_fraction = 1.0;
    double bagging_fraction = 1.0;
    double lambda_l1 = 0.0;
    double lambda_l2 = 0.0;
    int min_child_samples = 20;
    double cat_smooth = 10.0;  // recorded only; every descriptor is continuous
    std::uint64_t seed = 0;

    void validate() const;
    nlohmann::json to_json() const;
    static GbdtConfig from_json(const nlohmann::json& j);
};

/// Per-feature histogram bins. Each bin is identified by its inclusive
/// upper bound; a value belongs to the first bin whose bound is >= value and
/// values past the last bound fall into the last bin.
struct BinMapper {
    static constexpr std::size_t kMaxBins = 255;
    std::vector<std::vector<double>> upper_bounds;

    static BinMapper fit(const Matrix& x, std::size_t max_bins = kMaxBins);
    std::uint8_t bin(std::size_t feature, double value) const;
    std::size_t num_bins(std::size_t feature) const { return upper_bounds[feature].size(); }
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    int threshold_bin = -1;
    double threshold = 0.0;  // rows with x[feature] <= threshold go left
    int left = -1;
    int right = -1;
    double value = 0.0;  // leaf output, learning rate applied
    double gain = 0.0;
    int depth = 0;

    bool is_leaf() const { return feature < 0; }
};

struct RegressionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    double predict(std::span<const double> row) const;
    std::size_t leaf_count() const;
    int depth() const;
};

/// Additive multiclass tree model: raw score of class c is
/// prior[c] + sum over rounds of trees[round][c](x), linked by softmax.
struct TreeEnsembleModel {
    GbdtConfig config;
    std::size_t n_classes = 0;
    std::size_t n_features = 0;
    std::vector<double> class_priors;  // log class frequencies
    BinMapper bins;
    std::vector<std::vector<RegressionTree>> trees;  // [round][class]
    std::vector<double> feature_gains;

    nlohmann::json to_json() const;
    static TreeEnsembleModel from_json(const nlohmann::json& j);
};

/// Gradient/hessian sums on one side of a split.
struct GradStats {
    double grad = 0.0;
    double hess = 0.0;
    std::size_t count = 0;
};

double threshold_l1(double g, double l1);
/// Half the loss reduction of splitting `parent` into `left`/`right`.
double split_gain(const GradStats& left, const GradStats& right, double l1, double l2);
/// Optimal leaf weight before the learning rate is applied.
double leaf_output(double grad, double hess, double l1, double l2);

struct SplitCandidate {
    int feature = -1;
    int bin = -1;
    double threshold = 0.0;
    double gain = 0.0;
    GradStats left;
    GradStats right;

    bool valid() const { return feature >= 0; }
};

/// Best histogram split of `rows` over `features` (strictly positive gain,
/// both children with at least `min_child_samples` rows). Ties resolve to
/// the lowest feature, then the lowest bin.
SplitCandidate find_best_split(const std::vector<std::vector<std::uint8_t>>& binned, const BinMapper& bins,
                               std::span<const double> grad, std::span<const double> hess,
                               std::span<const std::size_t> rows, std::span<const std::size_t> features,
                               const GbdtConfig& cfg);

/// Class count is inferred as max(y)+1 unless given.
TreeEnsembleModel fit_gbdt(const Matrix& x, std::span<const int> y, const GbdtConfig& cfg,
                           std::size_t n_classes = 0);

/// Softmax probabilities; `rounds` limits the number of boosting rounds used.
Matrix predict_proba(const TreeEnsembleModel& model, const Matrix& x,
                     std::optional<std::size_t> rounds = std::nullopt);

/// (feature, cumulative gain), descending by gain, ties by index.
std::vector<std::pair<std::size_t, double>> feature_importance(const TreeEnsembleModel& model);

}  // namespace neatboost
