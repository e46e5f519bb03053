#include "neatboost/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "neatboost/pipeline.hpp"

namespace neatboost {

FusionResult fuse(std::span<const Matrix> probs, std::span<const double> weights) {
    if (probs.empty()) throw std::invalid_argument("fuse needs at least one probability matrix");
    if (weights.size() != probs.size()) throw std::invalid_argument("one weight per model is required");
    const std::size_t rows = probs[0].rows(), cols = probs[0].cols();
    for (const auto& p : probs)
        if (p.rows() != rows || p.cols() != cols) throw std::invalid_argument("probability matrices differ in shape");
    FusionResult out{Matrix(rows, cols, 0.0), {}};
    for (std::size_t m = 0; m < probs.size(); ++m) {
        const auto& src = probs[m].data();
        auto& dst = out.probs.data();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += weights[m] * src[i];
    }
    out.labels = argmax_rows(out.probs);
    return out;
}

NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& f, std::span<const double> x0,
                             const NelderMeadParams& params) {
    const std::size_t n = x0.size();
    if (n == 0) throw std::invalid_argument("nelder_mead needs at least one dimension");
    const std::size_t budget = params.evaluations_per_dim * n;

    NelderMeadResult best;
    best.value = std::numeric_limits<double>::infinity();
    std::size_t evals = 0;
    auto eval = [&](const std::vector<double>& x) {
        const double v = f(x);
        ++evals;
        if (v < best.value) {
            best.value = v;
            best.x = x;
        }
        return v;
    };

    std::vector<std::vector<double>> simplex(n + 1, std::vector<double>(x0.begin(), x0.end()));
    for (std::size_t i = 0; i < n; ++i) simplex[i + 1][i] += params.initial_step;
    std::vector<double> fv(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
        fv[i] = eval(simplex[i]);
        if (!std::isfinite(fv[i])) throw std::invalid_argument("objective is not finite on the initial simplex");
    }

    std::vector<std::size_t> order(n + 1);
    std::vector<double> centroid(n), xr(n), xe(n), xc(n);
    auto along = [&](std::vector<double>& out, const std::vector<double>& from, double t) {
        // out = centroid + t * (from - centroid)
        for (std::size_t j = 0; j < n; ++j) out[j] = centroid[j] + t * (from[j] - centroid[j]);
    };

    while (evals < budget) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
        {
            std::vector<std::vector<double>> s2;
            std::vector<double> f2;
            for (std::size_t i : order) {
                s2.push_back(simplex[i]);
                f2.push_back(fv[i]);
            }
            simplex.swap(s2);
            fv.swap(f2);
        }
        if (fv[n] - fv[0] < params.tolerance) break;

        std::fill(centroid.begin(), centroid.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) centroid[j] += simplex[i][j] / static_cast<double>(n);

        along(xr, simplex[n], -params.reflection);
        const double fr = eval(xr);
        if (fr < fv[0]) {
            along(xe, xr, params.expansion);
            const double fe = eval(xe);
            if (fe < fr) {
                simplex[n] = xe;
                fv[n] = fe;
            } else {
                simplex[n] = xr;
                fv[n] = fr;
            }
            continue;
        }
        if (fr < fv[n - 1]) {
            simplex[n] = xr;
            fv[n] = fr;
            continue;
        }
        bool accepted = false;
        if (fr < fv[n]) {
            along(xc, xr, params.contraction);
            const double fc = eval(xc);
            if (fc <= fr) {
                simplex[n] = xc;
                fv[n] = fc;
                accepted = true;
            }
        } else {
            along(xc, simplex[n], params.contraction);
            const double fc = eval(xc);
            if (fc < fv[n]) {
                simplex[n] = xc;
                fv[n] = fc;
                accepted = true;
            }
        }
        if (!accepted) {
            for (std::size_t i = 1; i <= n && evals < budget; ++i) {
                for (std::size_t j = 0; j < n; ++j)
                    simplex[i][j] = simplex[0][j] + params.shrink * (simplex[i][j] - simplex[0][j]);
                fv[i] = eval(simplex[i]);
            }
        }
    }
    best.evaluations = evals;
    return best;
}

std::vector<double> softmax(std::span<const double> v) {
    std::vector<double> out(v.begin(), v.end());
    if (out.empty()) return out;
    const double m = *std::max_element(out.begin(), out.end());
    double total = 0.0;
    for (double& x : out) {
        x = std::exp(x - m);
        total += x;
    }
    for (double& x : out) x /= total;
    return out;
}

WeightOptimization optimize_weights(std::span<const Matrix> oof_probs, std::span<const int> y_true,
                                    const NelderMeadParams& params) {
    const std::size_t m = oof_probs.size();
    if (m < 1) throw std::invalid_argument("optimize_weights needs at least one model");
    for (const auto& p : oof_probs)
        if (p.rows() != y_true.size()) throw std::invalid_argument("OOF matrix is not aligned with labels");
    const std::size_t n_classes = oof_probs[0].cols();

    auto f1_of = [&](std::span<const double> w) {
        return compute_metrics(y_true, fuse(oof_probs, w).labels, n_classes).weighted_f1;
    };
    WeightOptimization out;
    const std::vector<double> uniform(m, 1.0 / static_cast<double>(m));
    out.uniform_f1 = f1_of(uniform);
    if (m == 1) {
        out.weights = {1.0};
        out.weighted_f1 = out.uniform_f1;
        return out;
    }

    auto objective = [&](std::span<const double> v) { return -f1_of(softmax(v)); };
    std::vector<std::vector<double>> starts{std::vector<double>(m, 0.0)};
    for (std::size_t i = 0; i < m; ++i) {
        std::vector<double> corner(m, 0.0);
        corner[i] = 10.0;
        starts.push_back(corner);
    }
    double best_value = std::numeric_limits<double>::infinity();
    std::vector<double> best_v;
    for (const auto& s : starts) {
        const auto r = nelder_mead(objective, s, params);
        if (r.value < best_value) {
            best_value = r.value;
            best_v = r.x;
        }
    }
    out.weights = softmax(best_v);
    out.weighted_f1 = -best_value;
    return out;
}

}  // namespace neatboost
