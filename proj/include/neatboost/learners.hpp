#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <variant>

#include "json.hpp"
#include "neatboost/gbdt.hpp"
#include "neatboost/mlp.hpp"
#include "neatboost/neat.hpp"
#include "neatboost/pipeline.hpp"

namespace neatboost {

enum class LearnerKind { Gbdt, Mlp };

std::string_view learner_name(LearnerKind kind);
LearnerKind parse_learner(std::string_view name);

/// Evolved ranges per learner family.
HyperparameterSpec search_space(LearnerKind kind);

/// Settings that are fixed rather than evolved.
struct TrainingBudget {
    int mlp_epochs = 150;
    int mlp_batch_size = 32;
};

GbdtConfig gbdt_config(const DecodedHyperparameters& h, std::uint64_t seed);
MlpConfig mlp_config(const DecodedHyperparameters& h, const TrainingBudget& budget, std::uint64_t seed);

/// A trained base learner of either family.
struct LearnerModel {
    LearnerKind kind = LearnerKind::Gbdt;
    std::variant<TreeEnsembleModel, MlpModel> model;

    Matrix predict_proba(const Matrix& x) const;
    nlohmann::json to_json() const;
    static LearnerModel from_json(const nlohmann::json& j);
};

LearnerModel train_learner(LearnerKind kind, const DecodedHyperparameters& h, const TrainingBudget& budget,
                           const Matrix& x, std::span<const int> y, std::uint64_t seed);

struct CvSettings {
    std::size_t k_folds = 5;
    std::size_t smote_k = 5;
    TrainingBudget budget;
    std::size_t jobs = 1;  // concurrent folds
};

struct CvResult {
    Matrix oof;                       // out-of-fold class probabilities
    std::vector<double> fold_f1;      // weighted F1 per validation fold
    double mean_f1 = 0.0;
};

/// Stratified K-fold with SMOTE inside each training fold. Folds and SMOTE
/// draws depend only on `data_seed`; the models are seeded by `model_seed`.
CvResult cross_validate(const Dataset& dev, LearnerKind kind, const DecodedHyperparameters& h,
                        const CvSettings& settings, std::uint64_t data_seed, std::uint64_t model_seed);

/// Fitness: mean per-fold weighted F1 of the hyperparameters the genome
/// decodes to.
Objective make_objective(const Dataset& dev, LearnerKind kind, const NeatConfig& neat, const CvSettings& settings,
                         std::uint64_t data_seed);

DecodedHyperparameters decode_genome(const Genome& g, LearnerKind kind, const NeatConfig& neat);

}  // namespace neatboost
