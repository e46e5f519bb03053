#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "neatboost/matrix.hpp"
#include "neatboost/random.hpp"

namespace neatboost {

struct MlpConfig {
    int hidden_size = 64;
    double dropout = 0.1;
    double learning_rate = 1e-3;
    double weight_decay = 1e-4;
    double label_smoothing = 0.0;
    double mixup = 0.0;
    int epochs = 150;
    int batch_size = 32;
    std::uint64_t seed = 0;

    void validate() const;
    nlohmann::json to_json() const;
    static MlpConfig from_json(const nlohmann::json& j);
};

/// Trainable parameters; the same layout holds gradients and optimizer
/// moments.
struct MlpParameters {
    Eigen::VectorXd att_w, att_b;  // per-feature gate
    Eigen::MatrixXd w1;            // hidden x inputs
    Eigen::VectorXd b1, gamma1, beta1;
    Eigen::MatrixXd w2;  // hidden x hidden
    Eigen::VectorXd b2, gamma2, beta2;
    Eigen::MatrixXd w3;  // classes x hidden
    Eigen::VectorXd b3;

    static MlpParameters zeros_like(const MlpParameters& p);

    struct Group {
        const char* name;
        double* data;
        std::size_t size;
        bool decay;
    };
    /// Every parameter block in a fixed order. Weight matrices and the gate
    /// weights take decoupled decay; biases and batch-norm affine terms don't.
    std::vector<Group> groups();
};

struct MlpModel {
    MlpConfig config;
    std::size_t n_inputs = 0;
    std::size_t n_classes = 0;
    MlpParameters params;
    Eigen::VectorXd running_mean1, running_var1, running_mean2, running_var2;
    Eigen::VectorXd feature_mean, feature_scale;  // standardizer from the training fold

    nlohmann::json to_json() const;
    static MlpModel from_json(const nlohmann::json& j);
};

enum class Mode { Train, Eval };

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

/// Freshly initialized network (uniform fan-in init, neutral gates,
/// identity standardizer).
MlpModel init_mlp(std::size_t n_inputs, std::size_t n_classes, const MlpConfig& cfg, Rng& rng);

/// Row-wise class probabilities for standardized inputs. Train mode uses
/// batch statistics and (when `rng` is given) dropout; running statistics
/// are not touched.
Eigen::MatrixXd forward(const MlpModel& model, const Eigen::MatrixXd& x, Mode mode, Rng* rng = nullptr);

/// Single-sample convenience overload.
std::vector<double> forward(const MlpModel& model, std::span<const double> x, Mode mode);

/// Per-feature gates sigma(w_i x_i + b_i) for one standardized sample.
Eigen::VectorXd attention_gates(const MlpModel& model, std::span<const double> x);

/// Label-smoothed one-hot targets: 1-eps on the true class, eps/(C-1) elsewhere.
Eigen::MatrixXd smoothed_targets(std::span<const int> y, std::size_t n_classes, double eps);

/// Mixes each row with a permuted partner: lambda*x + (1-lambda)*x[perm].
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> mixup_with(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                                                       double lambda, std::span<const std::size_t> perm);

/// lambda ~ Beta(a, a) once per batch, partner by random permutation.
/// a == 0 returns the batch unchanged.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> mixup_batch(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                                                        double a, Rng& rng);

double cosine_learning_rate(double base, int epoch, int epochs);

/// Dropout keep-masks already scaled by 1/(1-p); empty means no dropout.
struct DropoutMasks {
    Eigen::MatrixXd hidden1, hidden2;
};

/// Soft-target cross-entropy in train mode (batch statistics) and,
/// optionally, its gradient.
double loss_and_gradients(const MlpModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& targets,
                          MlpParameters* grads, const DropoutMasks* masks = nullptr);

struct GradientCheckOptions {
    double step = 1e-5;
    double attention_grad_scale = 1.0;  // != 1 corrupts the analytic gate gradient
};

struct GradientCheckResult {
    double max_relative_error = 0.0;
    std::vector<std::pair<std::string, double>> per_group;
};

/// Analytic vs central-difference gradients for every parameter.
GradientCheckResult gradient_check(const MlpModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& targets,
                                   const GradientCheckOptions& opts = {});

/// Fits the standardizer on `x`, then trains with AdamW, cosine annealing,
/// label smoothing and Mixup. Throws TrainingError on a non-finite loss.
MlpModel train_mlp(const Matrix& x, std::span<const int> y, const MlpConfig& cfg, std::size_t n_classes = 0,
                   std::vector<double>* epoch_losses = nullptr);

/// Trains an already initialized model on standardized inputs.
void train_standardized(MlpModel& model, const Eigen::MatrixXd& x, std::span<const int> y,
                        std::vector<double>* epoch_losses = nullptr);

/// Standardizes raw features with the model's normalizer, then eval forward.
Matrix predict_proba(const MlpModel& model, const Matrix& x);

Eigen::MatrixXd to_eigen(const Matrix& m);

}  // namespace neatboost
