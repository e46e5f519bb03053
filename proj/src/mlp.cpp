#include "neatboost/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "neatboost/errors.hpp"

namespace neatboost {

namespace {

constexpr int kSchemaVersion = 1;

using Eigen::MatrixXd;
using Eigen::VectorXd;

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_grad(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    return cdf + x * pdf;
}

MatrixXd sigmoid(const MatrixXd& m) {
    return m.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

// log-softmax per row
MatrixXd log_softmax(const MatrixXd& logits) {
    MatrixXd out(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double m = logits.row(i).maxCoeff();
        const double lse = m + std::log((logits.row(i).array() - m).exp().sum());
        out.row(i) = logits.row(i).array() - lse;
    }
    return out;
}

struct BnCache {
    MatrixXd xhat;
    VectorXd inv_std;
};

// Batch-norm over rows with batch statistics.
MatrixXd batchnorm_train(const MatrixXd& z, const VectorXd& gamma, const VectorXd& beta, BnCache* cache,
                         VectorXd* mean_out = nullptr, VectorXd* var_out = nullptr) {
    const double b = static_cast<double>(z.rows());
    const VectorXd mean = z.colwise().mean().transpose();
    const MatrixXd centered = z.rowwise() - mean.transpose();
    const VectorXd var = (centered.array().square().colwise().sum() / b).transpose();
    const VectorXd inv_std = (var.array() + kBatchNormEps).rsqrt();
    MatrixXd xhat = centered * inv_std.asDiagonal();
    MatrixXd y = (xhat * gamma.asDiagonal()).rowwise() + beta.transpose();
    if (cache) {
        cache->xhat = std::move(xhat);
        cache->inv_std = inv_std;
    }
    if (mean_out) *mean_out = mean;
    if (var_out) *var_out = var;
    return y;
}

MatrixXd batchnorm_eval(const MatrixXd& z, const VectorXd& gamma, const VectorXd& beta, const VectorXd& rmean,
                        const VectorXd& rvar) {
    const VectorXd scale = gamma.array() * (rvar.array() + kBatchNormEps).rsqrt();
    const VectorXd shift = beta.array() - rmean.array() * scale.array();
    return (z * scale.asDiagonal()).rowwise() + shift.transpose();
}

MatrixXd batchnorm_backward(const MatrixXd& dy, const BnCache& c, const VectorXd& gamma, VectorXd& dgamma,
                            VectorXd& dbeta) {
    const double b = static_cast<double>(dy.rows());
    dgamma = (dy.array() * c.xhat.array()).colwise().sum().transpose();
    dbeta = dy.colwise().sum().transpose();
    const MatrixXd dxhat = dy * gamma.asDiagonal();
    const Eigen::RowVectorXd sum_dxhat = dxhat.colwise().sum();
    const Eigen::RowVectorXd sum_dxhat_xhat = (dxhat.array() * c.xhat.array()).colwise().sum();
    MatrixXd dz = (b * dxhat).rowwise() - sum_dxhat;
    dz -= (c.xhat.array().rowwise() * sum_dxhat_xhat.array()).matrix();
    return dz * (c.inv_std / b).asDiagonal();
}

struct ForwardCache {
    MatrixXd x, gate, xt;
    MatrixXd z1, y1, d1;
    MatrixXd z2, y2, d2;
    BnCache bn1, bn2;
    VectorXd mean1, var1, mean2, var2;
    MatrixXd log_probs;
};

// Train-mode forward with batch statistics; masks may be null.
void forward_train(const MlpModel& m, const MatrixXd& x, const DropoutMasks* masks, ForwardCache& c) {
    const auto& p = m.params;
    c.x = x;
    c.gate = sigmoid((x * p.att_w.asDiagonal()).rowwise() + p.att_b.transpose());
    c.xt = c.gate.cwiseProduct(x);
    c.z1 = (c.xt * p.w1.transpose()).rowwise() + p.b1.transpose();
    c.y1 = batchnorm_train(c.z1, p.gamma1, p.beta1, &c.bn1, &c.mean1, &c.var1);
    c.d1 = c.y1.unaryExpr(&gelu);
    if (masks && masks->hidden1.size()) c.d1 = c.d1.cwiseProduct(masks->hidden1);
    c.z2 = (c.d1 * p.w2.transpose()).rowwise() + p.b2.transpose();
    c.y2 = batchnorm_train(c.z2, p.gamma2, p.beta2, &c.bn2, &c.mean2, &c.var2);
    c.d2 = c.y2.unaryExpr(&gelu);
    if (masks && masks->hidden2.size()) c.d2 = c.d2.cwiseProduct(masks->hidden2);
    const MatrixXd logits = (c.d2 * p.w3.transpose()).rowwise() + p.b3.transpose();
    c.log_probs = log_softmax(logits);
}

void backward(const MlpModel& m, const ForwardCache& c, const MatrixXd& targets, const DropoutMasks* masks,
              MlpParameters& g) {
    const auto& p = m.params;
    const double b = static_cast<double>(c.x.rows());
    const MatrixXd dlogits = (c.log_probs.array().exp().matrix() - targets) / b;
    g.w3 = dlogits.transpose() * c.d2;
    g.b3 = dlogits.colwise().sum().transpose();
    MatrixXd dd2 = dlogits * p.w3;
    if (masks && masks->hidden2.size()) dd2 = dd2.cwiseProduct(masks->hidden2);
    const MatrixXd dy2 = dd2.cwiseProduct(c.y2.unaryExpr(&gelu_grad));
    const MatrixXd dz2 = batchnorm_backward(dy2, c.bn2, p.gamma2, g.gamma2, g.beta2);
    g.w2 = dz2.transpose() * c.d1;
    g.b2 = dz2.colwise().sum().transpose();
    MatrixXd dd1 = dz2 * p.w2;
    if (masks && masks->hidden1.size()) dd1 = dd1.cwiseProduct(masks->hidden1);
    const MatrixXd dy1 = dd1.cwiseProduct(c.y1.unaryExpr(&gelu_grad));
    const MatrixXd dz1 = batchnorm_backward(dy1, c.bn1, p.gamma1, g.gamma1, g.beta1);
    g.w1 = dz1.transpose() * c.xt;
    g.b1 = dz1.colwise().sum().transpose();
    const MatrixXd dxt = dz1 * p.w1;
    const MatrixXd dpre = dxt.cwiseProduct(c.x).cwiseProduct(c.gate.cwiseProduct((1.0 - c.gate.array()).matrix()));
    g.att_w = dpre.cwiseProduct(c.x).colwise().sum().transpose();
    g.att_b = dpre.colwise().sum().transpose();
}

double soft_cross_entropy(const MatrixXd& log_probs, const MatrixXd& targets) {
    return -(targets.array() * log_probs.array()).sum() / static_cast<double>(log_probs.rows());
}

std::vector<double> flatten(const MatrixXd& m) {
    std::vector<double> v(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) v[static_cast<std::size_t>(r * m.cols() + c)] = m(r, c);
    return v;
}

MatrixXd unflatten(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols) {
    const auto v = j.get<std::vector<double>>();
    if (static_cast<Eigen::Index>(v.size()) != rows * cols) throw DataError("parameter block has the wrong size");
    MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = v[static_cast<std::size_t>(r * cols + c)];
    return m;
}

std::vector<double> to_vec(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

VectorXd from_vec(const nlohmann::json& j, Eigen::Index n) {
    const auto v = j.get<std::vector<double>>();
    if (static_cast<Eigen::Index>(v.size()) != n) throw DataError("parameter block has the wrong size");
    return Eigen::Map<const VectorXd>(v.data(), n);
}

}  // namespace

void MlpConfig::validate() const {
    if (hidden_size < 1) throw std::invalid_argument("hidden_size must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must be in [0,1)");
    if (!(label_smoothing >= 0.0 && label_smoothing < 1.0)) throw std::invalid_argument("label_smoothing must be in [0,1)");
    if (!(mixup >= 0.0)) throw std::invalid_argument("mixup coefficient must be >= 0");
    if (!(learning_rate >= 0.0) || !(weight_decay >= 0.0)) throw std::invalid_argument("learning rate and decay must be >= 0");
    if (epochs < 0 || batch_size < 1) throw std::invalid_argument("epochs must be >= 0 and batch_size >= 1");
}

nlohmann::json MlpConfig::to_json() const {
    return {{"hidden_size", hidden_size},     {"dropout", dropout},   {"learning_rate", learning_rate},
            {"weight_decay", weight_decay},   {"label_smoothing", label_smoothing},
            {"mixup", mixup},                 {"epochs", epochs},     {"batch_size", batch_size},
            {"seed", seed}};
}

MlpConfig MlpConfig::from_json(const nlohmann::json& j) {
    MlpConfig c;
    c.hidden_size = j.at("hidden_size").get<int>();
    c.dropout = j.at("dropout").get<double>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.weight_decay = j.at("weight_decay").get<double>();
    c.label_smoothing = j.at("label_smoothing").get<double>();
    c.mixup = j.at("mixup").get<double>();
    c.epochs = j.at("epochs").get<int>();
    c.batch_size = j.at("batch_size").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

MlpParameters MlpParameters::zeros_like(const MlpParameters& p) {
    MlpParameters z;
    z.att_w = VectorXd::Zero(p.att_w.size());
    z.att_b = VectorXd::Zero(p.att_b.size());
    z.w1 = MatrixXd::Zero(p.w1.rows(), p.w1.cols());
    z.b1 = VectorXd::Zero(p.b1.size());
    z.gamma1 = VectorXd::Zero(p.gamma1.size());
    z.beta1 = VectorXd::Zero(p.beta1.size());
    z.w2 = MatrixXd::Zero(p.w2.rows(), p.w2.cols());
    z.b2 = VectorXd::Zero(p.b2.size());
    z.gamma2 = VectorXd::Zero(p.gamma2.size());
    z.beta2 = VectorXd::Zero(p.beta2.size());
    z.w3 = MatrixXd::Zero(p.w3.rows(), p.w3.cols());
    z.b3 = VectorXd::Zero(p.b3.size());
    return z;
}

std::vector<MlpParameters::Group> MlpParameters::groups() {
    auto g = [](const char* name, auto& m, bool decay) {
        return Group{name, m.data(), static_cast<std::size_t>(m.size()), decay};
    };
    return {g("attention_w", att_w, true), g("attention_b", att_b, false), g("hidden1_w", w1, true),
            g("hidden1_b", b1, false),     g("bn1_gamma", gamma1, false),  g("bn1_beta", beta1, false),
            g("hidden2_w", w2, true),      g("hidden2_b", b2, false),      g("bn2_gamma", gamma2, false),
            g("bn2_beta", beta2, false),   g("output_w", w3, true),        g("output_b", b3, false)};
}

MlpModel init_mlp(std::size_t n_inputs, std::size_t n_classes, const MlpConfig& cfg, Rng& rng) {
    cfg.validate();
    if (n_inputs == 0 || n_classes < 2) throw std::invalid_argument("MLP needs inputs and at least two classes");
    MlpModel m;
    m.config = cfg;
    m.n_inputs = n_inputs;
    m.n_classes = n_classes;
    const auto d = static_cast<Eigen::Index>(n_inputs);
    const auto h = static_cast<Eigen::Index>(cfg.hidden_size);
    const auto c = static_cast<Eigen::Index>(n_classes);

    auto uniform = [&rng](Eigen::Index rows, Eigen::Index cols, double bound) {
        std::uniform_real_distribution<double> u(-bound, bound);
        MatrixXd out(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index k = 0; k < cols; ++k) out(r, k) = u(rng);
        return out;
    };
    auto& p = m.params;
    p.att_w = VectorXd::Zero(d);
    p.att_b = VectorXd::Zero(d);
    const double b1 = 1.0 / std::sqrt(static_cast<double>(d));
    p.w1 = uniform(h, d, b1);
    p.b1 = uniform(h, 1, b1);
    const double b2 = 1.0 / std::sqrt(static_cast<double>(h));
    p.w2 = uniform(h, h, b2);
    p.b2 = uniform(h, 1, b2);
    p.w3 = uniform(c, h, b2);
    p.b3 = uniform(c, 1, b2);
    p.gamma1 = p.gamma2 = VectorXd::Ones(h);
    p.beta1 = p.beta2 = VectorXd::Zero(h);
    m.running_mean1 = m.running_mean2 = VectorXd::Zero(h);
    m.running_var1 = m.running_var2 = VectorXd::Ones(h);
    m.feature_mean = VectorXd::Zero(d);
    m.feature_scale = VectorXd::Ones(d);
    return m;
}

Eigen::MatrixXd forward(const MlpModel& model, const Eigen::MatrixXd& x, Mode mode, Rng* rng) {
    if (x.cols() != static_cast<Eigen::Index>(model.n_inputs)) throw std::invalid_argument("input width mismatch");
    if (!x.allFinite()) throw std::invalid_argument("non-finite input to MLP forward");
    const auto& p = model.params;
    if (mode == Mode::Train) {
        DropoutMasks masks;
        const double rate = model.config.dropout;
        if (rng && rate > 0.0) {
            std::bernoulli_distribution keep(1.0 - rate);
            auto draw = [&](Eigen::Index rows, Eigen::Index cols) {
                MatrixXd mk(rows, cols);
                for (Eigen::Index r = 0; r < rows; ++r)
                    for (Eigen::Index k = 0; k < cols; ++k) mk(r, k) = keep(*rng) ? 1.0 / (1.0 - rate) : 0.0;
                return mk;
            };
            masks.hidden1 = draw(x.rows(), p.w1.rows());
            masks.hidden2 = draw(x.rows(), p.w2.rows());
        }
        ForwardCache c;
        forward_train(model, x, &masks, c);
        return c.log_probs.array().exp().matrix();
    }
    const MatrixXd gate = sigmoid((x * p.att_w.asDiagonal()).rowwise() + p.att_b.transpose());
    const MatrixXd xt = gate.cwiseProduct(x);
    MatrixXd h = (xt * p.w1.transpose()).rowwise() + p.b1.transpose();
    h = batchnorm_eval(h, p.gamma1, p.beta1, model.running_mean1, model.running_var1).unaryExpr(&gelu);
    MatrixXd h2 = (h * p.w2.transpose()).rowwise() + p.b2.transpose();
    h2 = batchnorm_eval(h2, p.gamma2, p.beta2, model.running_mean2, model.running_var2).unaryExpr(&gelu);
    const MatrixXd logits = (h2 * p.w3.transpose()).rowwise() + p.b3.transpose();
    return log_softmax(logits).array().exp().matrix();
}

std::vector<double> forward(const MlpModel& model, std::span<const double> x, Mode mode) {
    const MatrixXd row = Eigen::Map<const Eigen::RowVectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    const MatrixXd p = forward(model, row, mode);
    return {p.data(), p.data() + p.size()};
}

Eigen::VectorXd attention_gates(const MlpModel& model, std::span<const double> x) {
    const auto xv = Eigen::Map<const VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    return sigmoid((model.params.att_w.cwiseProduct(xv) + model.params.att_b).eval());
}

Eigen::MatrixXd smoothed_targets(std::span<const int> y, std::size_t n_classes, double eps) {
    const double off = n_classes > 1 ? eps / static_cast<double>(n_classes - 1) : 0.0;
    MatrixXd t = MatrixXd::Constant(static_cast<Eigen::Index>(y.size()), static_cast<Eigen::Index>(n_classes), off);
    for (std::size_t i = 0; i < y.size(); ++i) t(static_cast<Eigen::Index>(i), y[i]) = 1.0 - eps;
    return t;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> mixup_with(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                                                       double lambda, std::span<const std::size_t> perm) {
    MatrixXd xm(x.rows(), x.cols()), ym(y.rows(), y.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const auto j = static_cast<Eigen::Index>(perm[static_cast<std::size_t>(i)]);
        xm.row(i) = lambda * x.row(i) + (1.0 - lambda) * x.row(j);
        ym.row(i) = lambda * y.row(i) + (1.0 - lambda) * y.row(j);
    }
    return {xm, ym};
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> mixup_batch(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                                                        double a, Rng& rng) {
    if (a <= 0.0) return {x, y};
    std::gamma_distribution<double> ga(a, 1.0);
    const double g1 = ga(rng), g2 = ga(rng);
    const double lambda = (g1 + g2) > 0.0 ? g1 / (g1 + g2) : 0.5;
    std::vector<std::size_t> perm(static_cast<std::size_t>(x.rows()));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    return mixup_with(x, y, lambda, perm);
}

double cosine_learning_rate(double base, int epoch, int epochs) {
    if (epochs <= 0) return 0.0;
    return 0.5 * base * (1.0 + std::cos(std::numbers::pi * static_cast<double>(epoch) / static_cast<double>(epochs)));
}

double loss_and_gradients(const MlpModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& targets,
                          MlpParameters* grads, const DropoutMasks* masks) {
    ForwardCache c;
    forward_train(model, x, masks, c);
    const double loss = soft_cross_entropy(c.log_probs, targets);
    if (grads) {
        *grads = MlpParameters::zeros_like(model.params);
        backward(model, c, targets, masks, *grads);
    }
    return loss;
}

GradientCheckResult gradient_check(const MlpModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& targets,
                                   const GradientCheckOptions& opts) {
    MlpParameters analytic;
    loss_and_gradients(model, x, targets, &analytic);
    analytic.att_w *= opts.attention_grad_scale;
    analytic.att_b *= opts.attention_grad_scale;

    MlpModel probe = model;
    auto probe_groups = probe.params.groups();
    auto grad_groups = analytic.groups();
    GradientCheckResult result;
    for (std::size_t gi = 0; gi < probe_groups.size(); ++gi) {
        double worst = 0.0;
        for (std::size_t k = 0; k < probe_groups[gi].size; ++k) {
            double& theta = probe_groups[gi].data[k];
            const double saved = theta;
            theta = saved + opts.step;
            const double up = loss_and_gradients(probe, x, targets, nullptr);
            theta = saved - opts.step;
            const double down = loss_and_gradients(probe, x, targets, nullptr);
            theta = saved;
            const double numeric = (up - down) / (2.0 * opts.step);
            const double a = grad_groups[gi].data[k];
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
            worst = std::max(worst, std::abs(a - numeric) / denom);
        }
        result.per_group.emplace_back(probe_groups[gi].name, worst);
        result.max_relative_error = std::max(result.max_relative_error, worst);
    }
    return result;
}

void train_standardized(MlpModel& model, const Eigen::MatrixXd& x, std::span<const int> y,
                        std::vector<double>* epoch_losses) {
    const MlpConfig& cfg = model.config;
    const auto n = static_cast<std::size_t>(x.rows());
    if (n < 2) throw DataError("MLP training needs at least two samples");
    const MatrixXd targets = smoothed_targets(y, model.n_classes, cfg.label_smoothing);
    Rng rng(derive_seed(cfg.seed, "mlp.train"));

    MlpParameters m1 = MlpParameters::zeros_like(model.params);
    MlpParameters m2 = MlpParameters::zeros_like(model.params);
    constexpr double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    long step = 0;

    // batch boundaries; a trailing singleton joins the previous batch so
    // batch statistics stay defined
    const auto bs = static_cast<std::size_t>(cfg.batch_size);
    std::vector<std::pair<std::size_t, std::size_t>> batches;
    for (std::size_t s = 0; s < n; s += bs) batches.emplace_back(s, std::min(n, s + bs));
    if (batches.size() > 1 && batches.back().second - batches.back().first == 1) {
        batches[batches.size() - 2].second = n;
        batches.pop_back();
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = cosine_learning_rate(cfg.learning_rate, epoch, cfg.epochs);
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (const auto& [lo, hi] : batches) {
            const auto b = static_cast<Eigen::Index>(hi - lo);
            MatrixXd xb(b, x.cols()), tb(b, targets.cols());
            for (Eigen::Index i = 0; i < b; ++i) {
                const auto src = static_cast<Eigen::Index>(order[lo + static_cast<std::size_t>(i)]);
                xb.row(i) = x.row(src);
                tb.row(i) = targets.row(src);
            }
            auto [xm, tm] = mixup_batch(xb, tb, cfg.mixup, rng);

            DropoutMasks masks;
            if (cfg.dropout > 0.0) {
                std::bernoulli_distribution keep(1.0 - cfg.dropout);
                const double scale = 1.0 / (1.0 - cfg.dropout);
                auto draw = [&](Eigen::Index cols) {
                    MatrixXd mk(b, cols);
                    for (Eigen::Index r = 0; r < b; ++r)
                        for (Eigen::Index k = 0; k < cols; ++k) mk(r, k) = keep(rng) ? scale : 0.0;
                    return mk;
                };
                masks.hidden1 = draw(model.params.w1.rows());
                masks.hidden2 = draw(model.params.w2.rows());
            }

            ForwardCache c;
            forward_train(model, xm, &masks, c);
            const double loss = soft_cross_entropy(c.log_probs, tm);
            if (!std::isfinite(loss)) throw TrainingError("non-finite training loss at epoch " + std::to_string(epoch));
            epoch_loss += loss * static_cast<double>(b);
            MlpParameters g = MlpParameters::zeros_like(model.params);
            backward(model, c, tm, &masks, g);

            const double mom = kBatchNormMomentum;
            const double unbias = b > 1 ? static_cast<double>(b) / static_cast<double>(b - 1) : 1.0;
            model.running_mean1 = (1.0 - mom) * model.running_mean1 + mom * c.mean1;
            model.running_var1 = (1.0 - mom) * model.running_var1 + mom * unbias * c.var1;
            model.running_mean2 = (1.0 - mom) * model.running_mean2 + mom * c.mean2;
            model.running_var2 = (1.0 - mom) * model.running_var2 + mom * unbias * c.var2;

            ++step;
            const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
            auto pg = model.params.groups();
            auto gg = g.groups();
            auto g1 = m1.groups();
            auto g2 = m2.groups();
            for (std::size_t k = 0; k < pg.size(); ++k) {
                for (std::size_t i = 0; i < pg[k].size; ++i) {
                    const double grad = gg[k].data[i];
                    double& mm = g1[k].data[i];
                    double& vv = g2[k].data[i];
                    mm = beta1 * mm + (1.0 - beta1) * grad;
                    vv = beta2 * vv + (1.0 - beta2) * grad * grad;
                    double& theta = pg[k].data[i];
                    if (pg[k].decay) theta -= lr * cfg.weight_decay * theta;
                    theta -= lr * (mm / bc1) / (std::sqrt(vv / bc2) + adam_eps);
                }
            }
        }
        if (epoch_losses) epoch_losses->push_back(epoch_loss / static_cast<double>(n));
    }
    for (const auto& grp : model.params.groups())
        for (std::size_t i = 0; i < grp.size; ++i)
            if (!std::isfinite(grp.data[i])) throw TrainingError("non-finite MLP parameter after training");
}

Eigen::MatrixXd to_eigen(const Matrix& m) {
    MatrixXd out(static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = m(r, c);
    return out;
}

MlpModel train_mlp(const Matrix& x, std::span<const int> y, const MlpConfig& cfg, std::size_t n_classes,
                   std::vector<double>* epoch_losses) {
    cfg.validate();
    if (x.rows() != y.size()) throw std::invalid_argument("label count does not match rows");
    int max_label = 0;
    for (int v : y) {
        if (v < 0) throw DataError("negative class label");
        max_label = std::max(max_label, v);
    }
    if (n_classes == 0) n_classes = static_cast<std::size_t>(max_label) + 1;
    std::vector<bool> present(n_classes, false);
    for (int v : y) present[static_cast<std::size_t>(v)] = true;
    if (std::count(present.begin(), present.end(), true) < 2) throw DataError("training data contains a single class");

    Rng rng(derive_seed(cfg.seed, "mlp.init"));
    MlpModel model = init_mlp(x.cols(), n_classes, cfg, rng);

    MatrixXd xe = to_eigen(x);
    if (!xe.allFinite()) throw DataError("non-finite feature value");
    model.feature_mean = xe.colwise().mean().transpose();
    const MatrixXd centered = xe.rowwise() - model.feature_mean.transpose();
    const VectorXd sd = (centered.array().square().colwise().sum() / static_cast<double>(xe.rows())).sqrt().transpose();
    model.feature_scale = sd.unaryExpr([](double s) { return s > 1e-12 ? s : 1.0; });
    const MatrixXd xs = centered * model.feature_scale.cwiseInverse().asDiagonal();

    train_standardized(model, xs, y, epoch_losses);
    return model;
}

Matrix predict_proba(const MlpModel& model, const Matrix& x) {
    if (x.cols() != model.n_inputs) throw DataError("feature count does not match the trained model");
    const MatrixXd xe = to_eigen(x);
    const MatrixXd xs = (xe.rowwise() - model.feature_mean.transpose()) * model.feature_scale.cwiseInverse().asDiagonal();
    const MatrixXd p = forward(model, xs, Mode::Eval);
    Matrix out(x.rows(), model.n_classes);
    for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < model.n_classes; ++c) out(r, c) = p(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    return out;
}

nlohmann::json MlpModel::to_json() const {
    nlohmann::json j;
    j["schema_version"] = kSchemaVersion;
    j["kind"] = "attention_mlp";
    j["config"] = config.to_json();
    j["n_inputs"] = n_inputs;
    j["n_classes"] = n_classes;
    const auto& p = params;
    j["params"] = {{"attention_w", to_vec(p.att_w)}, {"attention_b", to_vec(p.att_b)},
                   {"hidden1_w", flatten(p.w1)},     {"hidden1_b", to_vec(p.b1)},
                   {"bn1_gamma", to_vec(p.gamma1)},  {"bn1_beta", to_vec(p.beta1)},
                   {"hidden2_w", flatten(p.w2)},     {"hidden2_b", to_vec(p.b2)},
                   {"bn2_gamma", to_vec(p.gamma2)},  {"bn2_beta", to_vec(p.beta2)},
                   {"output_w", flatten(p.w3)},      {"output_b", to_vec(p.b3)}};
    j["batchnorm"] = {{"running_mean1", to_vec(running_mean1)}, {"running_var1", to_vec(running_var1)},
                      {"running_mean2", to_vec(running_mean2)}, {"running_var2", to_vec(running_var2)}};
    j["normalizer"] = {{"mean", to_vec(feature_mean)}, {"scale", to_vec(feature_scale)}};
    return j;
}

MlpModel MlpModel::from_json(const nlohmann::json& j) {
    if (j.value("kind", "") != "attention_mlp") throw DataError("not an attention_mlp model file");
    if (j.at("schema_version").get<int>() != kSchemaVersion) throw DataError("unsupported attention_mlp schema_version");
    MlpModel m;
    m.config = MlpConfig::from_json(j.at("config"));
    m.n_inputs = j.at("n_inputs").get<std::size_t>();
    m.n_classes = j.at("n_classes").get<std::size_t>();
    const auto d = static_cast<Eigen::Index>(m.n_inputs);
    const auto h = static_cast<Eigen::Index>(m.config.hidden_size);
    const auto c = static_cast<Eigen::Index>(m.n_classes);
    const auto& p = j.at("params");
    m.params.att_w = from_vec(p.at("attention_w"), d);
    m.params.att_b = from_vec(p.at("attention_b"), d);
    m.params.w1 = unflatten(p.at("hidden1_w"), h, d);
    m.params.b1 = from_vec(p.at("hidden1_b"), h);
    m.params.gamma1 = from_vec(p.at("bn1_gamma"), h);
    m.params.beta1 = from_vec(p.at("bn1_beta"), h);
    m.params.w2 = unflatten(p.at("hidden2_w"), h, h);
    m.params.b2 = from_vec(p.at("hidden2_b"), h);
    m.params.gamma2 = from_vec(p.at("bn2_gamma"), h);
    m.params.beta2 = from_vec(p.at("bn2_beta"), h);
    m.params.w3 = unflatten(p.at("output_w"), c, h);
    m.params.b3 = from_vec(p.at("output_b"), c);
    const auto& bn = j.at("batchnorm");
    m.running_mean1 = from_vec(bn.at("running_mean1"), h);
    m.running_var1 = from_vec(bn.at("running_var1"), h);
    m.running_mean2 = from_vec(bn.at("running_mean2"), h);
    m.running_var2 = from_vec(bn.at("running_var2"), h);
    m.feature_mean = from_vec(j.at("normalizer").at("mean"), d);
    m.feature_scale = from_vec(j.at("normalizer").at("scale"), d);
    return m;
}

}  // namespace neatboost
