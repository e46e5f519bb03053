#include "neatboost/learners.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "neatboost/errors.hpp"

namespace neatboost {

std::string_view learner_name(LearnerKind kind) { return kind == LearnerKind::Gbdt ? "gbdt" : "mlp"; }

LearnerKind parse_learner(std::string_view name) {
    if (name == "gbdt") return LearnerKind::Gbdt;
    if (name == "mlp") return LearnerKind::Mlp;
    throw DataError("unknown learner '" + std::string(name) + "'");
}

HyperparameterSpec search_space(LearnerKind kind) {
    using S = Scale;
    if (kind == LearnerKind::Gbdt) {
        return {{{"n_estimators", 50, 500, S::Linear, true},
                 {"max_depth", 3, 12, S::Linear, true},
                 {"num_leaves", 8, 128, S::Linear, true},
                 {"learning_rate", 1e-3, 0.3, S::Log, false},
                 {"feature_fraction", 0.5, 1.0, S::Linear, false},
                 {"bagging_fraction", 0.5, 1.0, S::Linear, false},
                 {"lambda_l1", 1e-8, 10, S::Log, false},
                 {"lambda_l2", 1e-8, 10, S::Log, false},
                 {"min_child_samples", 2, 30, S::Linear, true},
                 {"cat_smooth", 1, 100, S::Linear, false}}};
    }
    return {{{"hidden_size", 16, 256, S::Linear, true},
             {"dropout", 0.0, 0.5, S::Linear, false},
             {"learning_rate", 1e-4, 1e-2, S::Log, false},
             {"weight_decay", 1e-6, 1e-2, S::Log, false},
             {"label_smoothing", 0.0, 0.2, S::Linear, false},
             {"mixup", 0.0, 0.4, S::Linear, false}}};
}

GbdtConfig gbdt_config(const DecodedHyperparameters& h, std::uint64_t seed) {
    GbdtConfig c;
    c.n_estimators = static_cast<int>(h.at("n_estimators"));
    c.max_depth = static_cast<int>(h.at("max_depth"));
    c.num_leaves = static_cast<int>(h.at("num_leaves"));
    c.learning_rate = h.at("learning_rate");
    c.feature_fraction = h.at("feature_fraction");
    c.bagging_fraction = h.at("bagging_fraction");
    c.lambda_l1 = h.at("lambda_l1");
    c.lambda_l2 = h.at("lambda_l2");
    c.min_child_samples = static_cast<int>(h.at("min_child_samples"));
    c.cat_smooth = h.at("cat_smooth");
    c.seed = seed;
    return c;
}

MlpConfig mlp_config(const DecodedHyperparameters& h, const TrainingBudget& budget, std::uint64_t seed) {
    MlpConfig c;
    c.hidden_size = static_cast<int>(h.at("hidden_size"));
    c.dropout = h.at("dropout");
    c.learning_rate = h.at("learning_rate");
    c.weight_decay = h.at("weight_decay");
    c.label_smoothing = h.at("label_smoothing");
    c.mixup = h.at("mixup");
    c.epochs = budget.mlp_epochs;
    c.batch_size = budget.mlp_batch_size;
    c.seed = seed;
    return c;
}

Matrix LearnerModel::predict_proba(const Matrix& x) const {
    return std::visit([&](const auto& m) { return neatboost::predict_proba(m, x); }, model);
}

nlohmann::json LearnerModel::to_json() const {
    return std::visit([](const auto& m) { return m.to_json(); }, model);
}

LearnerModel LearnerModel::from_json(const nlohmann::json& j) {
    const std::string kind = j.value("kind", "");
    if (kind == "attention_mlp") return {LearnerKind::Mlp, MlpModel::from_json(j)};
    return {LearnerKind::Gbdt, TreeEnsembleModel::from_json(j)};
}

LearnerModel train_learner(LearnerKind kind, const DecodedHyperparameters& h, const TrainingBudget& budget,
                           const Matrix& x, std::span<const int> y, std::uint64_t seed) {
    if (kind == LearnerKind::Gbdt) return {kind, fit_gbdt(x, y, gbdt_config(h, seed), kNumClasses)};
    return {kind, train_mlp(x, y, mlp_config(h, budget, seed), kNumClasses)};
}

CvResult cross_validate(const Dataset& dev, LearnerKind kind, const DecodedHyperparameters& h,
                        const CvSettings& settings, std::uint64_t data_seed, std::uint64_t model_seed) {
    const auto folds = stratified_kfold(dev.y, settings.k_folds, derive_seed(data_seed, "cv.folds"));
    CvResult r;
    r.oof = out_of_fold_predictions(
        dev.x, dev.y, folds, kNumClasses, settings.smote_k, derive_seed(data_seed, "cv.smote"),
        [&](const Matrix& xtr, std::span<const int> ytr, const Matrix& xval, std::size_t fold) {
            const auto m = train_learner(kind, h, settings.budget, xtr, ytr, derive_seed(model_seed, "cv.model", {fold}));
            return m.predict_proba(xval);
        },
        settings.jobs);
    const auto pred = argmax_rows(r.oof);
    for (const auto& f : folds) {
        std::vector<int> yt, yp;
        for (std::size_t i : f.val) {
            yt.push_back(dev.y[i]);
            yp.push_back(pred[i]);
        }
        r.fold_f1.push_back(compute_metrics(yt, yp).weighted_f1);
    }
    for (double v : r.fold_f1) r.mean_f1 += v / static_cast<double>(r.fold_f1.size());
    return r;
}

DecodedHyperparameters decode_genome(const Genome& g, LearnerKind kind, const NeatConfig& neat) {
    return decode_hyperparameters(activate_genome(g, neat.inputs), search_space(kind));
}

Objective make_objective(const Dataset& dev, LearnerKind kind, const NeatConfig& neat, const CvSettings& settings,
                         std::uint64_t data_seed) {
    return [&dev, kind, neat, settings, data_seed](const Genome& g, std::uint64_t seed) {
        const auto h = decode_genome(g, kind, neat);
        return cross_validate(dev, kind, h, settings, data_seed, seed).mean_f1;
    };
}

}  // namespace neatboost
