#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "neatboost/fusion.hpp"
#include "neatboost/pipeline.hpp"
#include "neatboost/random.hpp"

using namespace neatboost;

namespace {

Matrix random_probs(Rng& rng, std::size_t n) {
    std::gamma_distribution<double> g(1.0, 1.0);
    Matrix p(n, 3);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0;
        for (std::size_t c = 0; c < 3; ++c) s += (p(i, c) = g(rng));
        for (std::size_t c = 0; c < 3; ++c) p(i, c) /= s;
    }
    return p;
}

}  // namespace

TEST(Fuse, ArithmeticExample) {
    const std::vector<Matrix> p{Matrix{{0.6, 0.3, 0.1}}, Matrix{{0.2, 0.5, 0.3}}};
    const std::vector<double> w{0.7, 0.3};
    const auto r = fuse(p, w);
    EXPECT_NEAR(r.probs(0, 0), 0.48, 1e-15);
    EXPECT_NEAR(r.probs(0, 1), 0.36, 1e-15);
    EXPECT_NEAR(r.probs(0, 2), 0.16, 1e-15);
    EXPECT_EQ(r.labels[0], 0);
}

TEST(Fuse, DegenerateAndFixedPoint) {
    Rng rng(1);
    const Matrix a = random_probs(rng, 10), b = random_probs(rng, 10);
    const std::vector<Matrix> ab{a, b}, aa{a, a};
    EXPECT_EQ(fuse(ab, std::vector<double>{1.0, 0.0}).probs, a);
    const auto r = fuse(aa, std::vector<double>{0.3, 0.7});
    for (std::size_t k = 0; k < a.data().size(); ++k) EXPECT_NEAR(r.probs.data()[k], a.data()[k], 1e-15);
}

TEST(Fuse, RowsStochasticAndScaleInvariantArgmax) {
    Rng rng(2);
    const std::vector<Matrix> p{random_probs(rng, 50), random_probs(rng, 50), random_probs(rng, 50)};
    const std::vector<double> w{0.2, 0.5, 0.3}, scaled{2.0, 5.0, 3.0};
    const auto r = fuse(p, w);
    for (std::size_t i = 0; i < 50; ++i) {
        double s = 0;
        for (double v : r.probs.row(i)) s += v;
        EXPECT_NEAR(s, 1.0, 1e-6);
    }
    EXPECT_EQ(fuse(p, scaled).labels, r.labels);
}

TEST(Fuse, TiesGoToLowestClass) {
    const std::vector<Matrix> p{Matrix{{0.4, 0.4, 0.2}}};
    EXPECT_EQ(fuse(p, std::vector<double>{1.0}).labels[0], 0);
}

TEST(Fuse, ShapeMismatchThrows) {
    const std::vector<Matrix> p{Matrix(2, 3), Matrix(3, 3)};
    EXPECT_ANY_THROW(fuse(p, std::vector<double>{0.5, 0.5}));
    const std::vector<Matrix> q{Matrix(2, 3)};
    EXPECT_ANY_THROW(fuse(q, std::vector<double>{0.5, 0.5}));
}

TEST(NelderMead, Quadratic) {
    const auto r = nelder_mead(
        [](std::span<const double> v) { return (v[0] - 1) * (v[0] - 1) + (v[1] - 2) * (v[1] - 2); },
        std::vector<double>{0, 0});
    EXPECT_NEAR(r.x[0], 1.0, 1e-4);
    EXPECT_NEAR(r.x[1], 2.0, 1e-4);
    EXPECT_LE(r.evaluations, 1000u);
}

TEST(NelderMead, ConstantReturnsStart) {
    const std::vector<double> x0{0.3, -0.7, 2.0};
    const auto r = nelder_mead([](std::span<const double>) { return 4.0; }, x0);
    EXPECT_EQ(r.x, x0);
    EXPECT_EQ(r.value, 4.0);
}

TEST(NelderMead, Rosenbrock) {
    const auto r = nelder_mead(
        [](std::span<const double> v) {
            return 100 * std::pow(v[1] - v[0] * v[0], 2) + std::pow(1 - v[0], 2);
        },
        std::vector<double>{-1.2, 1.0});
    EXPECT_LT(r.value, 1e-3);
    EXPECT_LE(r.evaluations, 1000u);
}

TEST(NelderMead, DeterministicAndBudgeted) {
    auto f = [](std::span<const double> v) { return std::abs(v[0]) + std::abs(v[1] - 3) + std::sin(v[0] * 5); };
    const auto a = nelder_mead(f, std::vector<double>{1, 1});
    const auto b = nelder_mead(f, std::vector<double>{1, 1});
    EXPECT_EQ(a.x, b.x);
    EXPECT_LE(a.evaluations, 1000u);
}

TEST(NelderMead, NonFiniteStartThrows) {
    EXPECT_THROW(nelder_mead([](std::span<const double>) { return std::nan(""); }, std::vector<double>{0}),
                 std::invalid_argument);
}

TEST(Weights, SingleModel) {
    Rng rng(3);
    const std::vector<Matrix> p{random_probs(rng, 12)};
    std::vector<int> y(12);
    for (std::size_t i = 0; i < 12; ++i) y[i] = static_cast<int>(i % 3);
    const auto r = optimize_weights(p, y);
    ASSERT_EQ(r.weights.size(), 1u);
    EXPECT_DOUBLE_EQ(r.weights[0], 1.0);
}

TEST(Weights, PerfectBeatsAdversarial) {
    const std::size_t n = 30;
    Matrix a(n, 3), b(n, 3, 0.0);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = i % 3;
        y[i] = static_cast<int>(c);
        for (std::size_t k = 0; k < 3; ++k) a(i, k) = k == c ? 0.4 : 0.3;
        b(i, (c + 1) % 3) = 1.0;
    }
    const std::vector<Matrix> p{a, b};
    const auto r = optimize_weights(p, y);
    EXPECT_GT(r.weights[0], 0.9);
    EXPECT_DOUBLE_EQ(r.weighted_f1, 1.0);
    EXPECT_EQ(compute_metrics(y, fuse(p, r.weights).labels).weighted_f1, 1.0);
}

TEST(Weights, NeverWorseThanUniform) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed);
        const std::size_t n = 60;
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(rng() % 3);
        const std::vector<Matrix> p{random_probs(rng, n), random_probs(rng, n), random_probs(rng, n)};
        const auto r = optimize_weights(p, y);
        const std::vector<double> uniform(3, 1.0 / 3);
        const double f_uniform = compute_metrics(y, fuse(p, uniform).labels).weighted_f1;
        EXPECT_EQ(r.uniform_f1, f_uniform);
        EXPECT_GE(r.weighted_f1, f_uniform);
        EXPECT_EQ(compute_metrics(y, fuse(p, r.weights).labels).weighted_f1, r.weighted_f1);
        double s = 0;
        for (double w : r.weights) {
            EXPECT_GE(w, 0.0);
            s += w;
        }
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

TEST(Softmax, Normalized) {
    const auto s = softmax(std::vector<double>{1000.0, 1000.0, -1000.0});
    EXPECT_DOUBLE_EQ(s[0], 0.5);
    EXPECT_DOUBLE_EQ(s[1], 0.5);
    EXPECT_EQ(s[2], 0.0);
}
