#include "neatboost/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "neatboost/errors.hpp"
#include "neatboost/random.hpp"

namespace neatboost {

namespace {

constexpr int kSchemaVersion = 1;

void softmax_inplace(std::span<double> v) {
    const double m = *std::max_element(v.begin(), v.end());
    double s = 0.0;
    for (double& x : v) {
        x = std::exp(x - m);
        s += x;
    }
    for (double& x : v) x /= s;
}

struct Leaf {
    int node = 0;
    std::vector<std::size_t> rows;
    GradStats stats;
    SplitCandidate split;
};

RegressionTree grow_tree(const std::vector<std::vector<std::uint8_t>>& binned, const BinMapper& bins,
                         std::span<const double> grad, std::span<const double> hess,
                         std::vector<std::size_t> rows, std::span<const std::size_t> features,
                         const GbdtConfig& cfg, std::vector<double>& feature_gains) {
    RegressionTree tree;
    tree.nodes.emplace_back();

    auto stats_of = [&](const std::vector<std::size_t>& r) {
        GradStats s;
        for (std::size_t i : r) {
            s.grad += grad[i];
            s.hess += hess[i];
        }
        s.count = r.size();
        return s;
    };
    auto evaluate = [&](Leaf& leaf) {
        leaf.split = tree.nodes[leaf.node].depth < cfg.max_depth
                         ? find_best_split(binned, bins, grad, hess, leaf.rows, features, cfg)
                         : SplitCandidate{};
    };

    std::vector<Leaf> leaves;
    leaves.push_back({0, std::move(rows), {}, {}});
    leaves[0].stats = stats_of(leaves[0].rows);
    evaluate(leaves[0]);

    while (static_cast<int>(leaves.size()) < cfg.num_leaves) {
        int pick = -1;
        for (std::size_t i = 0; i < leaves.size(); ++i)
            if (leaves[i].split.valid() && (pick < 0 || leaves[i].split.gain > leaves[static_cast<std::size_t>(pick)].split.gain))
                pick = static_cast<int>(i);
        if (pick < 0) break;

        Leaf parent = std::move(leaves[static_cast<std::size_t>(pick)]);
        const SplitCandidate& s = parent.split;
        const auto f = static_cast<std::size_t>(s.feature);
        Leaf left, right;
        for (std::size_t i : parent.rows) (binned[f][i] <= s.bin ? left.rows : right.rows).push_back(i);
        left.stats = s.left;
        right.stats = s.right;

        const int depth = tree.nodes[parent.node].depth + 1;
        left.node = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back(TreeNode{.depth = depth});
        right.node = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back(TreeNode{.depth = depth});

        TreeNode& n = tree.nodes[parent.node];
        n.feature = s.feature;
        n.threshold_bin = s.bin;
        n.threshold = s.threshold;
        n.gain = s.gain;
        n.left = left.node;
        n.right = right.node;
        feature_gains[f] += s.gain;

        evaluate(left);
        evaluate(right);
        leaves[static_cast<std::size_t>(pick)] = std::move(left);
        leaves.push_back(std::move(right));
    }

    for (const auto& leaf : leaves)
        tree.nodes[leaf.node].value =
            cfg.learning_rate * leaf_output(leaf.stats.grad, leaf.stats.hess, cfg.lambda_l1, cfg.lambda_l2);
    return tree;
}

std::vector<std::size_t> sample_indices(std::size_t n, double fraction, Rng& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    if (fraction >= 1.0) return idx;
    const auto k = std::clamp<std::size_t>(static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 0.5)), 1, n);
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

nlohmann::json tree_to_json(const RegressionTree& t) {
    nlohmann::json j;
    std::vector<int> feature, bin, left, right, depth;
    std::vector<double> threshold, value, gain;
    for (const auto& n : t.nodes) {
        feature.push_back(n.feature);
        bin.push_back(n.threshold_bin);
        threshold.push_back(n.threshold);
        left.push_back(n.left);
        right.push_back(n.right);
        value.push_back(n.value);
        gain.push_back(n.gain);
        depth.push_back(n.depth);
    }
    j["feature"] = feature;
    j["threshold_bin"] = bin;
    j["threshold"] = threshold;
    j["left"] = left;
    j["right"] = right;
    j["value"] = value;
    j["gain"] = gain;
    j["depth"] = depth;
    return j;
}

RegressionTree tree_from_json(const nlohmann::json& j) {
    RegressionTree t;
    const auto feature = j.at("feature").get<std::vector<int>>();
    const auto bin = j.at("threshold_bin").get<std::vector<int>>();
    const auto threshold = j.at("threshold").get<std::vector<double>>();
    const auto left = j.at("left").get<std::vector<int>>();
    const auto right = j.at("right").get<std::vector<int>>();
    const auto value = j.at("value").get<std::vector<double>>();
    const auto gain = j.at("gain").get<std::vector<double>>();
    const auto depth = j.at("depth").get<std::vector<int>>();
    for (std::size_t i = 0; i < feature.size(); ++i) {
        TreeNode n;
        n.feature = feature[i];
        n.threshold_bin = bin.at(i);
        n.threshold = threshold.at(i);
        n.left = left.at(i);
        n.right = right.at(i);
        n.value = value.at(i);
        n.gain = gain.at(i);
        n.depth = depth.at(i);
        const int size = static_cast<int>(feature.size());
        if (!n.is_leaf() && (n.left <= static_cast<int>(i) || n.right <= static_cast<int>(i) || n.left >= size || n.right >= size))
            throw DataError("corrupt tree structure in model file");
        t.nodes.push_back(n);
    }
    if (t.nodes.empty()) throw DataError("empty tree in model file");
    return t;
}

}  // namespace

void GbdtConfig::validate() const {
    if (n_estimators < 0) throw std::invalid_argument("n_estimators must be >= 0");
    if (num_leaves < 2) throw std::invalid_argument("num_leaves must be >= 2");
    if (max_depth < 1) throw std::invalid_argument("max_depth must be >= 1");
    if (!(feature_fraction > 0.0 && feature_fraction <= 1.0)) throw std::invalid_argument("feature_fraction must be in (0,1]");
    if (!(bagging_fraction > 0.0 && bagging_fraction <= 1.0)) throw std::invalid_argument("bagging_fraction must be in (0,1]");
    if (!(lambda_l1 >= 0.0) || !(lambda_l2 >= 0.0)) throw std::invalid_argument("regularization must be >= 0");
    if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning_rate must be >= 0");
    if (min_child_samples < 1) throw std::invalid_argument("min_child_samples must be >= 1");
}

nlohmann::json GbdtConfig::to_json() const {
    return {{"n_estimators", n_estimators},       {"max_depth", max_depth},
            {"num_leaves", num_leaves},           {"learning_rate", learning_rate},
            {"feature_fraction", feature_fraction}, {"bagging_fraction", bagging_fraction},
            {"lambda_l1", lambda_l1},             {"lambda_l2", lambda_l2},
            {"min_child_samples", min_child_samples}, {"cat_smooth", cat_smooth},
            {"seed", seed}};
}

GbdtConfig GbdtConfig::from_json(const nlohmann::json& j) {
    GbdtConfig c;
    c.n_estimators = j.at("n_estimators").get<int>();
    c.max_depth = j.at("max_depth").get<int>();
    c.num_leaves = j.at("num_leaves").get<int>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.feature_fraction = j.at("feature_fraction").get<double>();
    c.bagging_fraction = j.at("bagging_fraction").get<double>();
    c.lambda_l1 = j.at("lambda_l1").get<double>();
    c.lambda_l2 = j.at("lambda_l2").get<double>();
    c.min_child_samples = j.at("min_child_samples").get<int>();
    c.cat_smooth = j.at("cat_smooth").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

BinMapper BinMapper::fit(const Matrix& x, std::size_t max_bins) {
    BinMapper m;
    const std::size_t n = x.rows();
    for (std::size_t f = 0; f < x.cols(); ++f) {
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = x(i, f);
        std::sort(v.begin(), v.end());
        std::vector<double> distinct = v;
        distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
        std::vector<double> bounds;
        if (distinct.size() <= max_bins) {
            bounds = std::move(distinct);
        } else {
            for (std::size_t k = 1; k <= max_bins; ++k) {
                const std::size_t pos = (k * n + max_bins - 1) / max_bins;  // ceil(k n / max_bins)
                const double b = v[std::max<std::size_t>(pos, 1) - 1];
                if (bounds.empty() || b > bounds.back()) bounds.push_back(b);
            }
        }
        if (bounds.empty()) bounds.push_back(0.0);
        m.upper_bounds.push_back(std::move(bounds));
    }
    return m;
}

std::uint8_t BinMapper::bin(std::size_t feature, double value) const {
    const auto& b = upper_bounds[feature];
    auto it = std::lower_bound(b.begin(), b.end(), value);
    if (it == b.end()) --it;
    return static_cast<std::uint8_t>(it - b.begin());
}

double RegressionTree::predict(std::span<const double> row) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
        const TreeNode& n = nodes[i];
        i = static_cast<std::size_t>(row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return nodes[i].value;
}

std::size_t RegressionTree::leaf_count() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

int RegressionTree::depth() const {
    int d = 0;
    for (const auto& n : nodes) d = std::max(d, n.depth);
    return d;
}

double threshold_l1(double g, double l1) {
    const double mag = std::max(std::abs(g) - l1, 0.0);
    return g < 0.0 ? -mag : mag;
}

double split_gain(const GradStats& left, const GradStats& right, double l1, double l2) {
    auto term = [&](double g, double h) {
        const double d = h + l2;
        if (!(d > 0.0)) return 0.0;
        const double t = threshold_l1(g, l1);
        return t * t / d;
    };
    return 0.5 * (term(left.grad, left.hess) + term(right.grad, right.hess) -
                  term(left.grad + right.grad, left.hess + right.hess));
}

double leaf_output(double grad, double hess, double l1, double l2) {
    const double d = hess + l2;
    if (!(d > 0.0)) return 0.0;
    return -threshold_l1(grad, l1) / d;
}

SplitCandidate find_best_split(const std::vector<std::vector<std::uint8_t>>& binned, const BinMapper& bins,
                               std::span<const double> grad, std::span<const double> hess,
                               std::span<const std::size_t> rows, std::span<const std::size_t> features,
                               const GbdtConfig& cfg) {
    SplitCandidate best;
    const auto min_child = static_cast<std::size_t>(cfg.min_child_samples);
    if (rows.size() < 2 * min_child) return best;
    std::vector<GradStats> hist;
    for (std::size_t f : features) {
        const std::size_t nb = bins.num_bins(f);
        if (nb < 2) continue;
        hist.assign(nb, GradStats{});
        const auto& col = binned[f];
        GradStats total;
        for (std::size_t i : rows) {
            GradStats& h = hist[col[i]];
            h.grad += grad[i];
            h.hess += hess[i];
            ++h.count;
            total.grad += grad[i];
            total.hess += hess[i];
        }
        total.count = rows.size();
        GradStats left;
        for (std::size_t b = 0; b + 1 < nb; ++b) {
            left.grad += hist[b].grad;
            left.hess += hist[b].hess;
            left.count += hist[b].count;
            if (hist[b].count == 0) continue;  // same partition as the previous bin
            if (left.count < min_child) continue;
            const std::size_t right_count = total.count - left.count;
            if (right_count < min_child) break;
            const GradStats right{total.grad - left.grad, total.hess - left.hess, right_count};
            const double gain = split_gain(left, right, cfg.lambda_l1, cfg.lambda_l2);
            if (gain > 0.0 && gain > best.gain) {
                best.feature = static_cast<int>(f);
                best.bin = static_cast<int>(b);
                best.threshold = bins.upper_bounds[f][b];
                best.gain = gain;
                best.left = left;
                best.right = right;
            }
        }
    }
    return best;
}

TreeEnsembleModel fit_gbdt(const Matrix& x, std::span<const int> y, const GbdtConfig& cfg, std::size_t n_classes) {
    cfg.validate();
    const std::size_t n = x.rows();
    if (n == 0) throw DataError("empty dataset");
    if (y.size() != n) throw std::invalid_argument("label count does not match rows");
    for (double v : x.data())
        if (!std::isfinite(v)) throw DataError("non-finite feature value");
    int max_label = 0;
    for (int label : y) {
        if (label < 0) throw DataError("negative class label");
        max_label = std::max(max_label, label);
    }
    if (n_classes == 0) n_classes = static_cast<std::size_t>(max_label) + 1;
    if (static_cast<std::size_t>(max_label) >= n_classes) throw DataError("label outside class range");
    std::vector<std::size_t> counts(n_classes, 0);
    for (int label : y) ++counts[static_cast<std::size_t>(label)];
    if (std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }) < 2)
        throw DataError("training data contains a single class");

    TreeEnsembleModel model;
    model.config = cfg;
    model.n_classes = n_classes;
    model.n_features = x.cols();
    model.feature_gains.assign(x.cols(), 0.0);
    for (std::size_t c = 0; c < n_classes; ++c)
        model.class_priors.push_back(std::log(std::max(static_cast<double>(counts[c]) / static_cast<double>(n), 1e-12)));
    model.bins = BinMapper::fit(x);

    std::vector<std::vector<std::uint8_t>> binned(x.cols(), std::vector<std::uint8_t>(n));
    for (std::size_t f = 0; f < x.cols(); ++f)
        for (std::size_t i = 0; i < n; ++i) binned[f][i] = model.bins.bin(f, x(i, f));

    Rng rng(derive_seed(cfg.seed, "gbdt.fit"));
    Matrix raw(n, n_classes);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < n_classes; ++c) raw(i, c) = model.class_priors[c];

    Matrix prob(n, n_classes);
    std::vector<double> grad(n), hess(n);
    for (int round = 0; round < cfg.n_estimators; ++round) {
        for (std::size_t i = 0; i < n; ++i) {
            auto p = prob.row(i);
            auto r = raw.row(i);
            std::copy(r.begin(), r.end(), p.begin());
            softmax_inplace(p);
        }
        const auto rows = sample_indices(n, cfg.bagging_fraction, rng);
        std::vector<RegressionTree> round_trees;
        for (std::size_t c = 0; c < n_classes; ++c) {
            for (std::size_t i = 0; i < n; ++i) {
                const double p = prob(i, c);
                grad[i] = p - (static_cast<std::size_t>(y[i]) == c ? 1.0 : 0.0);
                hess[i] = p * (1.0 - p);
            }
            const auto features = sample_indices(x.cols(), cfg.feature_fraction, rng);
            round_trees.push_back(grow_tree(binned, model.bins, grad, hess, rows, features, cfg, model.feature_gains));
        }
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < n_classes; ++c) raw(i, c) += round_trees[c].predict(x.row(i));
        model.trees.push_back(std::move(round_trees));
    }
    return model;
}

Matrix predict_proba(const TreeEnsembleModel& model, const Matrix& x, std::optional<std::size_t> rounds) {
    if (x.cols() != model.n_features) throw DataError("feature count does not match the trained model");
    const std::size_t use = std::min(rounds.value_or(model.trees.size()), model.trees.size());
    Matrix out(x.rows(), model.n_classes);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        auto r = out.row(i);
        const auto row = x.row(i);
        for (std::size_t c = 0; c < model.n_classes; ++c) {
            double s = model.class_priors[c];
            for (std::size_t m = 0; m < use; ++m) s += model.trees[m][c].predict(row);
            r[c] = s;
        }
        softmax_inplace(r);
    }
    return out;
}

std::vector<std::pair<std::size_t, double>> feature_importance(const TreeEnsembleModel& model) {
    std::vector<std::pair<std::size_t, double>> out;
    for (std::size_t f = 0; f < model.feature_gains.size(); ++f) out.emplace_back(f, model.feature_gains[f]);
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    return out;
}

nlohmann::json TreeEnsembleModel::to_json() const {
    nlohmann::json j;
    j["schema_version"] = kSchemaVersion;
    j["kind"] = "gbdt";
    j["config"] = config.to_json();
    j["n_classes"] = n_classes;
    j["n_features"] = n_features;
    j["class_priors"] = class_priors;
    j["bin_upper_bounds"] = bins.upper_bounds;
    j["feature_gains"] = feature_gains;
    j["trees"] = nlohmann::json::array();
    for (const auto& round : trees) {
        nlohmann::json r = nlohmann::json::array();
        for (const auto& t : round) r.push_back(tree_to_json(t));
        j["trees"].push_back(std::move(r));
    }
    return j;
}

TreeEnsembleModel TreeEnsembleModel::from_json(const nlohmann::json& j) {
    if (j.value("kind", "") != "gbdt") throw DataError("not a gbdt model file");
    if (j.at("schema_version").get<int>() != kSchemaVersion) throw DataError("unsupported gbdt schema_version");
    TreeEnsembleModel m;
    m.config = GbdtConfig::from_json(j.at("config"));
    m.n_classes = j.at("n_classes").get<std::size_t>();
    m.n_features = j.at("n_features").get<std::size_t>();
    m.class_priors = j.at("class_priors").get<std::vector<double>>();
    m.bins.upper_bounds = j.at("bin_upper_bounds").get<std::vector<std::vector<double>>>();
    m.feature_gains = j.at("feature_gains").get<std::vector<double>>();
    for (const auto& r : j.at("trees")) {
        std::vector<RegressionTree> round;
        for (const auto& t : r) round.push_back(tree_from_json(t));
        if (round.size() != m.n_classes) throw DataError("tree round does not match class count");
        m.trees.push_back(std::move(round));
    }
    if (m.class_priors.size() != m.n_classes) throw DataError("prior count does not match class count");
    return m;
}

}  // namespace neatboost
