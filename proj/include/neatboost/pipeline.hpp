#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "neatboost/matrix.hpp"

namespace neatboost {

inline constexpr std::size_t kNumClasses = 3;
inline constexpr int kUnlabeled = -1;

/// "normal", "wb", "sm"
std::string_view class_name(int label);
/// Case-insensitive; empty string maps to kUnlabeled. Throws DataError.
int parse_label(std::string_view name);

struct Dataset {
    Matrix x;
    std::vector<int> y;
    std::vector<std::string> ids;

    std::size_t size() const { return y.size(); }
    bool labeled() const;
    /// Throws DataError on inconsistent lengths, labels out of range or
    /// non-finite features.
    void validate(bool require_labels = true) const;
    Dataset subset(std::span<const std::size_t> indices) const;
    std::vector<std::size_t> class_counts(std::size_t n_classes = kNumClasses) const;
};

/// Reads `id,label,f01..f16` (the first column may also be named `path`).
Dataset read_dataset_csv(const std::filesystem::path& path, bool require_labels = true);
void write_dataset_csv(const std::filesystem::path& path, const Dataset& ds);
std::string dataset_to_csv(const Dataset& ds);

std::string format_double(double v);

struct SplitIndices {
    std::vector<std::size_t> train, val, test;
};

/// Per-class proportional allocation with largest-remainder rounding.
SplitIndices stratified_split(std::span<const int> y, std::array<double, 3> fractions, std::uint64_t seed);

/// 251/34/51 of 336.
inline constexpr std::array<double, 3> kDefaultSplitFractions{251.0 / 336.0, 34.0 / 336.0, 51.0 / 336.0};

struct Fold {
    std::vector<std::size_t> train, val;
};

std::vector<Fold> stratified_kfold(std::span<const int> y, std::size_t k, std::uint64_t seed);

struct SmoteResult {
    Matrix x;
    std::vector<int> y;
    std::size_t n_original = 0;  // rows [0, n_original) are the inputs, in order
};

/// Oversamples every class up to the majority count by interpolating
/// towards one of its k nearest same-class neighbours.
SmoteResult smote(const Matrix& x, std::span<const int> y, std::size_t k_neighbors, std::uint64_t seed);

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
    std::size_t predicted = 0;
    bool undefined = false;  // precision or recall had a zero denominator
};

struct MetricsReport {
    double accuracy = 0.0;
    double weighted_precision = 0.0;
    double weighted_recall = 0.0;
    double weighted_f1 = 0.0;
    double macro_f1 = 0.0;
    std::vector<ClassMetrics> per_class;
    std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
    std::vector<std::vector<double>> confusion_normalized;
    bool zero_division = false;

    nlohmann::json to_json() const;
    std::string confusion_csv(bool normalized) const;
};

MetricsReport compute_metrics(std::span<const int> y_true, std::span<const int> y_pred,
                              std::size_t n_classes = kNumClasses);

/// Three Gaussian clusters in descriptor space. WB is shifted from Normal
/// along dense area and mean local variance; SM sits halfway between them on
/// those axes and is shifted along gradient-histogram bin 5.
Dataset synthesize_dataset(std::size_t n_per_class, double separation, std::uint64_t seed);

/// Row-wise argmax, ties to the lowest index.
std::vector<int> argmax_rows(const Matrix& probs);

/// Trains on (x_train, y_train) and returns class probabilities for x_val.
using FitPredict =
    std::function<Matrix(const Matrix& x_train, std::span<const int> y_train, const Matrix& x_val, std::size_t fold)>;

/// Out-of-fold probabilities: each fold's training part is SMOTE-balanced
/// (seeded by fold index), validation rows are always original samples.
/// Folds may run concurrently up to `jobs`.
Matrix out_of_fold_predictions(const Matrix& x, std::span<const int> y, const std::vector<Fold>& folds,
                               std::size_t n_classes, std::size_t smote_k, std::uint64_t seed, const FitPredict& fit,
                               std::size_t jobs = 1);

}  // namespace neatboost
