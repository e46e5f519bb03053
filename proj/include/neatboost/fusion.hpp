#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "neatboost/matrix.hpp"

namespace neatboost {

struct FusionResult {
    Matrix probs;
    std::vector<int> labels;
};

/// Weighted sum of probability matrices; argmax ties go to the lowest class.
FusionResult fuse(std::span<const Matrix> probs, std::span<const double> weights);

struct NelderMeadParams {
    double reflection = 1.0;
    double expansion = 2.0;
    double contraction = 0.5;
    double shrink = 0.5;
    double initial_step = 0.05;
    double tolerance = 1e-8;             // stop when max f - min f falls below
    std::size_t evaluations_per_dim = 500;
};

struct NelderMeadResult {
    std::vector<double> x;
    double value = 0.0;
    std::size_t evaluations = 0;
};

/// Minimizes f from the simplex x0 + step*e_i. Returns the best point ever
/// evaluated; throws std::invalid_argument if f is non-finite at the start.
NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& f, std::span<const double> x0,
                             const NelderMeadParams& params = {});

std::vector<double> softmax(std::span<const double> v);

struct WeightOptimization {
    std::vector<double> weights;
    double weighted_f1 = 0.0;
    double uniform_f1 = 0.0;
};

/// Maximizes the weighted F1 of the fused out-of-fold predictions over
/// softmax-parameterized weights. The search starts at uniform weights and
/// is restarted from each single-model corner; the best point found wins,
/// earlier starts winning ties.
WeightOptimization optimize_weights(std::span<const Matrix> oof_probs, std::span<const int> y_true,
                                    const NelderMeadParams& params = {});

}  // namespace neatboost
