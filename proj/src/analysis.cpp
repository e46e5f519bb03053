#include "neatboost/analysis.hpp"

#include <algorithm>
#include <boost/math/distributions/fisher_f.hpp>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "neatboost/errors.hpp"
#include "neatboost/features.hpp"

namespace neatboost {

double f_survival(double f, double df1, double df2) {
    if (std::isinf(f)) return 0.0;
    if (f <= 0.0) return 1.0;
    return boost::math::cdf(boost::math::complement(boost::math::fisher_f(df1, df2), f));
}

double f_critical(double df1, double df2, double alpha) {
    return boost::math::quantile(boost::math::complement(boost::math::fisher_f(df1, df2), alpha));
}

AnovaResult anova_f(std::span<const double> column, std::span<const int> y) {
    if (column.size() != y.size()) throw std::invalid_argument("column and labels differ in length");
    int max_label = -1;
    for (int v : y) {
        if (v < 0) throw std::invalid_argument("negative label");
        max_label = std::max(max_label, v);
    }
    const auto slots = static_cast<std::size_t>(max_label + 1);
    std::vector<double> sum(slots, 0.0), lo(slots, std::numeric_limits<double>::infinity()),
        hi(slots, -std::numeric_limits<double>::infinity());
    std::vector<std::size_t> count(slots, 0);
    for (std::size_t i = 0; i < y.size(); ++i) {
        const auto g = static_cast<std::size_t>(y[i]);
        sum[g] += column[i];
        ++count[g];
        lo[g] = std::min(lo[g], column[i]);
        hi[g] = std::max(hi[g], column[i]);
    }
    const auto groups = static_cast<std::size_t>(std::count_if(count.begin(), count.end(), [](std::size_t c) { return c > 0; }));
    const std::size_t n = y.size();
    if (groups < 2) throw DataError("ANOVA needs at least two groups");
    if (n <= groups) throw DataError("ANOVA needs more samples than groups");

    AnovaResult r;
    r.df_between = groups - 1;
    r.df_within = n - groups;

    const auto [cmin, cmax] = std::minmax_element(column.begin(), column.end());
    if (*cmin == *cmax) return r;  // F = 0, p = 1

    std::vector<double> mean(slots, 0.0);
    for (std::size_t g = 0; g < slots; ++g)
        if (count[g]) mean[g] = sum[g] / static_cast<double>(count[g]);
    const double grand = std::accumulate(column.begin(), column.end(), 0.0) / static_cast<double>(n);
    double ssb = 0.0, ssw = 0.0;
    for (std::size_t g = 0; g < slots; ++g)
        if (count[g]) ssb += static_cast<double>(count[g]) * (mean[g] - grand) * (mean[g] - grand);
    bool no_spread = true;
    for (std::size_t g = 0; g < slots; ++g)
        if (count[g] && lo[g] != hi[g]) no_spread = false;
    if (no_spread) {
        r.f = std::numeric_limits<double>::infinity();
        r.p_value = 0.0;
        return r;
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double d = column[i] - mean[static_cast<std::size_t>(y[i])];
        ssw += d * d;
    }
    r.f = (ssb / static_cast<double>(r.df_between)) / (ssw / static_cast<double>(r.df_within));
    r.p_value = f_survival(r.f, static_cast<double>(r.df_between), static_cast<double>(r.df_within));
    return r;
}

EigenDecomposition jacobi_eigen(const Matrix& symmetric, double tolerance, int max_sweeps) {
    const std::size_t n = symmetric.rows();
    if (symmetric.cols() != n) throw std::invalid_argument("jacobi_eigen needs a square matrix");
    Matrix a = symmetric;
    Matrix v(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

    double scale = 0.0;
    for (double x : a.data()) scale += x * x;
    scale = std::sqrt(scale);
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (std::sqrt(off) <= tolerance * std::max(scale, 1e-300)) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (a(p, q) == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });
    EigenDecomposition out;
    for (std::size_t k : order) {
        out.values.push_back(a(k, k));
        std::vector<double> vec(n);
        for (std::size_t i = 0; i < n; ++i) vec[i] = v(i, k);
        out.vectors.push_back(std::move(vec));
    }
    return out;
}

LdaProjection lda_project(const Matrix& x, std::span<const int> y, std::size_t components) {
    const std::size_t n = x.rows(), d = x.cols();
    if (y.size() != n) throw std::invalid_argument("label count does not match rows");
    if (n <= d) throw DataError("LDA needs more samples than features");
    int max_label = -1;
    for (int v : y) max_label = std::max(max_label, v);
    const auto slots = static_cast<std::size_t>(max_label + 1);
    std::vector<std::size_t> count(slots, 0);
    Matrix class_mean(slots, d, 0.0);
    std::vector<double> mean(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto g = static_cast<std::size_t>(y[i]);
        ++count[g];
        for (std::size_t f = 0; f < d; ++f) {
            class_mean(g, f) += x(i, f);
            mean[f] += x(i, f) / static_cast<double>(n);
        }
    }
    std::size_t classes = 0;
    for (std::size_t g = 0; g < slots; ++g) {
        if (!count[g]) continue;
        ++classes;
        for (std::size_t f = 0; f < d; ++f) class_mean(g, f) /= static_cast<double>(count[g]);
    }
    if (classes < 2) throw DataError("LDA needs at least two classes");

    Matrix sw(d, d, 0.0), sb(d, d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto g = static_cast<std::size_t>(y[i]);
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = 0; b < d; ++b) sw(a, b) += (x(i, a) - class_mean(g, a)) * (x(i, b) - class_mean(g, b));
    }
    for (std::size_t a = 0; a < d; ++a) sw(a, a) += 1e-6;
    for (std::size_t g = 0; g < slots; ++g) {
        if (!count[g]) continue;
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = 0; b < d; ++b)
                sb(a, b) += static_cast<double>(count[g]) * (class_mean(g, a) - mean[a]) * (class_mean(g, b) - mean[b]);
    }

    // symmetric inverse square root of S_W
    const auto sw_eig = jacobi_eigen(sw);
    Matrix whiten(d, d, 0.0);
    for (std::size_t k = 0; k < d; ++k) {
        if (!(sw_eig.values[k] > 0.0)) throw DataError("within-class scatter is singular");
        const double s = 1.0 / std::sqrt(sw_eig.values[k]);
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = 0; b < d; ++b) whiten(a, b) += s * sw_eig.vectors[k][a] * sw_eig.vectors[k][b];
    }
    Matrix tmp(d, d, 0.0), m(d, d, 0.0);
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t k = 0; k < d; ++k)
            for (std::size_t b = 0; b < d; ++b) tmp(a, b) += whiten(a, k) * sb(k, b);
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t k = 0; k < d; ++k)
            for (std::size_t b = 0; b < d; ++b) m(a, b) += tmp(a, k) * whiten(k, b);
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = a + 1; b < d; ++b) m(a, b) = m(b, a) = 0.5 * (m(a, b) + m(b, a));
    const auto eig = jacobi_eigen(m);

    LdaProjection out;
    out.components = std::min(components, classes - 1);
    out.clamped = out.components < components;
    double trace = 0.0;
    for (double v : eig.values) trace += std::max(v, 0.0);
    out.coordinates = Matrix(n, out.components, 0.0);
    for (std::size_t k = 0; k < out.components; ++k) {
        std::vector<double> axis(d, 0.0);
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = 0; b < d; ++b) axis[a] += whiten(a, b) * eig.vectors[k][b];
        // sign: largest loading positive
        std::size_t arg = 0;
        for (std::size_t a = 1; a < d; ++a)
            if (std::abs(axis[a]) > std::abs(axis[arg])) arg = a;
        if (axis[arg] < 0.0)
            for (double& v : axis) v = -v;
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t a = 0; a < d; ++a) s += (x(i, a) - mean[a]) * axis[a];
            out.coordinates(i, k) = s;
        }
        out.explained_ratio.push_back(trace > 0.0 ? std::max(eig.values[k], 0.0) / trace : 0.0);
        out.axes.push_back(std::move(axis));
    }
    return out;
}

std::vector<FeatureRank> rank_features(const Dataset& ds, const TreeEnsembleModel* model) {
    std::vector<FeatureRank> rows;
    std::vector<double> column(ds.size());
    for (std::size_t f = 0; f < ds.x.cols(); ++f) {
        for (std::size_t i = 0; i < ds.size(); ++i) column[i] = ds.x(i, f);
        const auto a = anova_f(column, ds.y);
        FeatureRank r{f, a.f, a.p_value, std::nullopt};
        if (model && f < model->feature_gains.size()) r.gain = model->feature_gains[f];
        rows.push_back(r);
    }
    std::stable_sort(rows.begin(), rows.end(), [](const FeatureRank& a, const FeatureRank& b) { return a.f > b.f; });
    return rows;
}

namespace {

std::string column_label(std::size_t f) {
    return f < kNumDescriptors ? std::string(descriptor_column(f)) : "x" + std::to_string(f);
}

}  // namespace

std::string anova_csv(std::span<const AnovaResult> rows) {
    std::ostringstream os;
    os << "feature,F,df1,df2,p\n";
    for (const auto& r : rows)
        os << column_label(r.feature) << ',' << format_double(r.f) << ',' << r.df_between << ',' << r.df_within << ','
           << format_double(r.p_value) << '\n';
    return os.str();
}

std::string lda_csv(const LdaProjection& lda, const Dataset& ds) {
    std::ostringstream os;
    os << "id,label";
    for (std::size_t k = 0; k < lda.components; ++k) os << ",LD" << k + 1;
    os << '\n';
    for (std::size_t i = 0; i < ds.size(); ++i) {
        os << ds.ids[i] << ',' << class_name(ds.y[i]);
        for (std::size_t k = 0; k < lda.components; ++k) os << ',' << format_double(lda.coordinates(i, k));
        os << '\n';
    }
    return os.str();
}

std::string ranking_csv(std::span<const FeatureRank> rows) {
    std::ostringstream os;
    os << "rank,feature,name,F,p,gain\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        os << i + 1 << ',' << column_label(r.feature) << ','
           << (r.feature < kNumDescriptors ? std::string(descriptor_name(r.feature)) : std::string()) << ','
           << format_double(r.f) << ',' << format_double(r.p_value) << ',';
        if (r.gain) os << format_double(*r.gain);
        os << '\n';
    }
    return os.str();
}

}  // namespace neatboost
