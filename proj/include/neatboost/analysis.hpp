#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "neatboost/gbdt.hpp"
#include "neatboost/matrix.hpp"
#include "neatboost/pipeline.hpp"

namespace neatboost {

struct AnovaResult {
    std::size_t feature = 0;
    double f = 0.0;  // +infinity when groups differ but have no spread
    std::size_t df_between = 0;
    std::size_t df_within = 0;
    double p_value = 1.0;
};

/// One-way ANOVA over the groups present in `y`.
AnovaResult anova_f(std::span<const double> column, std::span<const int> y);

/// Upper tail of the F distribution.
double f_survival(double f, double df1, double df2);
/// Value whose upper-tail probability is `alpha`.
double f_critical(double df1, double df2, double alpha);

struct EigenDecomposition {
    std::vector<double> values;                // descending
    std::vector<std::vector<double>> vectors;  // vectors[k] pairs with values[k]
};

/// Cyclic Jacobi rotations on a symmetric matrix given row-major.
EigenDecomposition jacobi_eigen(const Matrix& symmetric, double tolerance = 1e-14, int max_sweeps = 100);

struct LdaProjection {
    Matrix coordinates;                      // n x components
    std::vector<double> explained_ratio;     // per component
    std::vector<std::vector<double>> axes;   // components x features
    std::size_t components = 0;
    bool clamped = false;  // fewer components than requested
};

LdaProjection lda_project(const Matrix& x, std::span<const int> y, std::size_t components = 2);

struct FeatureRank {
    std::size_t feature = 0;
    double f = 0.0;
    double p_value = 1.0;
    std::optional<double> gain;
};

/// Features ordered by ANOVA F (descending, ties by index), with model gain
/// importance alongside when a model is supplied.
std::vector<FeatureRank> rank_features(const Dataset& ds, const TreeEnsembleModel* model = nullptr);

std::string anova_csv(std::span<const AnovaResult> rows);
std::string lda_csv(const LdaProjection& lda, const Dataset& ds);
std::string ranking_csv(std::span<const FeatureRank> rows);

}  // namespace neatboost
