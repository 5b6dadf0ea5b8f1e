// Copyright (C) 2026 The posetok Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "posetok/grad_check.hpp"
#include "posetok/ops.hpp"

using namespace posetok;

namespace {

/// sum(y * r) for a fixed random r, so every output element gets a distinct weight.
double weighted_sum(const Tensor64& y, const Tensor64& r) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        s += y[i] * r[i];
    }
    return s;
}

void accumulate(Tensor64& p, const Tensor64& g) {
    auto grad = p.grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
        grad[i] += g[i];
    }
}

}  // namespace

TEST(Tensor, RejectsBadShapes) {
    EXPECT_THROW(Tensor(Shape{}), DimensionError);
    EXPECT_THROW(Tensor({2, 0}), DimensionError);
    EXPECT_THROW(Tensor({2, 2}, std::vector<float>(3)), DimensionError);
}

TEST(Tensor, GradientBufferMatchesShape) {
    Tensor t({3, 4});
    EXPECT_FALSE(t.has_grad());
    t.enable_grad();
    EXPECT_EQ(t.grad().size(), t.size());
}

TEST(Matmul, IdentityPaddedSelectsTopBlock) {
    Tensor a = Tensor::matrix(2, 3, {1, 0, 0, 0, 1, 0});
    Tensor b = Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6});
    EXPECT_EQ(matmul(a, b), Tensor::matrix(2, 2, {1, 2, 3, 4}));
}

TEST(Matmul, Scalar) {
    EXPECT_EQ(matmul(Tensor::matrix(1, 1, {2}), Tensor::matrix(1, 1, {3})), Tensor::matrix(1, 1, {6}));
}

TEST(Matmul, InnerDimensionMismatchThrows) {
    EXPECT_THROW(matmul(Tensor({2, 3}), Tensor({2, 3})), DimensionError);
}

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
    std::mt19937_64 rng(7);
    for (int seed = 0; seed < 20; ++seed) {
        Tensor a = oracle::random_tensor<float>({5, 4}, rng);
        Tensor id({5, 5});
        for (std::size_t i = 0; i < 5; ++i) {
            id.at(i, i) = 1.0f;
        }
        Tensor out = matmul(id, a);
        for (std::size_t i = 0; i < a.size(); ++i) {
            EXPECT_NEAR(out[i], a[i], 1e-6);
        }
    }
}

TEST(Matmul, GradientOfSumMatchesFiniteDifferences) {
    std::mt19937_64 rng(11);
    Tensor64 a = oracle::random_tensor<double>({4, 5}, rng);
    Tensor64 b = oracle::random_tensor<double>({5, 3}, rng);
    Tensor64* params[] = {&a, &b};
    auto loss = [&](bool with_grad) {
        Tensor64 y = matmul(a, b);
        if (with_grad) {
            Tensor64 ones(y.shape(), 1.0);
            Tensor64 ga(a.shape()), gb(b.shape());
            matmul_backward(a, b, ones, &ga, &gb);
            accumulate(a, ga);
            accumulate(b, gb);
        }
        double s = 0.0;
        for (double v : y.data()) {
            s += v;
        }
        return s;
    };
    EXPECT_LT(grad_check(loss, params, 1e-3).max_relative_error, 1e-3);
}

TEST(Matmul, TransposedProductMatchesExplicitTranspose) {
    std::mt19937_64 rng(3);
    Tensor64 a = oracle::random_tensor<double>({3, 4}, rng);
    Tensor64 b = oracle::random_tensor<double>({5, 4}, rng);
    Tensor64 direct = matmul_transposed(a, b);
    Tensor64 via = matmul(a, transpose(b));
    for (std::size_t i = 0; i < direct.size(); ++i) {
        EXPECT_NEAR(direct[i], via[i], 1e-12);
    }
}

TEST(Softmax, UniformOnEqualLogits) {
    Tensor y = softmax_rows(Tensor::matrix(1, 3, {0, 0, 0}));
    for (float v : y.data()) {
        EXPECT_NEAR(v, 1.0 / 3.0, 1e-6);
    }
}

TEST(Softmax, StableForLargeLogits) {
    Tensor y = softmax_rows(Tensor::matrix(1, 2, {1000, 0}));
    EXPECT_NEAR(y[0], 1.0, 1e-6);
    EXPECT_NEAR(y[1], 0.0, 1e-6);
}

TEST(Softmax, MatchesHighPrecisionReference) {
    Tensor y = softmax_rows(Tensor::matrix(1, 3, {1, 2, 3}));
    const long double z = std::exp(1.0L) + std::exp(2.0L) + std::exp(3.0L);
    for (int i = 0; i < 3; ++i) {
        EXPECT_NEAR(y[i], static_cast<double>(std::exp(static_cast<long double>(i + 1)) / z), 1e-6);
    }
}

TEST(Softmax, NanInputPropagates) {
    Tensor y = softmax_rows(Tensor::matrix(1, 2, {NAN, 0}));
    EXPECT_TRUE(std::isnan(y[0]));
}

TEST(Softmax, RowsSumToOneProperty) {
    std::mt19937_64 rng(5);
    for (int seed = 0; seed < 50; ++seed) {
        Tensor x = oracle::random_tensor<float>({6, 9}, rng, 20.0);
        Tensor y = softmax_rows(x);
        for (std::size_t r = 0; r < y.rows(); ++r) {
            double s = 0.0;
            for (std::size_t c = 0; c < y.cols(); ++c) {
                EXPECT_GE(y.at(r, c), 0.0f);
                s += y.at(r, c);
            }
            EXPECT_NEAR(s, 1.0, 1e-6);
        }
    }
}

TEST(LayerNorm, ConstantRowBecomesZero) {
    Tensor gain({4}, 1.0f), shift({4});
    Tensor y = layer_norm(Tensor::matrix(1, 4, {3, 3, 3, 3}), gain, shift);
    for (float v : y.data()) {
        EXPECT_EQ(v, 0.0f);
    }
}

TEST(LayerNorm, SymmetricPairNormalizesToUnit) {
    Tensor gain({2}, 1.0f), shift({2});
    Tensor y = layer_norm(Tensor::matrix(1, 2, {1, -1}), gain, shift);
    // variance 1, so the only change is the epsilon in the denominator
    const double expected = 1.0 / std::sqrt(1.0 + kLayerNormEpsilon);
    EXPECT_NEAR(y[0], expected, 1e-6);
    EXPECT_NEAR(y[1], -expected, 1e-6);
}

TEST(LayerNorm, MismatchedGainThrows) {
    EXPECT_THROW(layer_norm(Tensor({2, 3}), Tensor({2}), Tensor({3})), DimensionError);
}

TEST(GradCheck, QuadraticLossIsExact) {
    std::mt19937_64 rng(1);
    Tensor64 p = oracle::random_tensor<double>({7}, rng);
    Tensor64* params[] = {&p};
    auto loss = [&](bool with_grad) {
        double s = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            s += 0.5 * p[i] * p[i];
            if (with_grad) {
                p.grad()[i] += p[i];
            }
        }
        return s;
    };
    EXPECT_LT(grad_check(loss, params, 1e-4).max_relative_error, 1e-8);
}

TEST(GradCheck, RejectsNonPositiveStep) {
    Tensor64 p({1});
    Tensor64* params[] = {&p};
    EXPECT_THROW(grad_check([](bool) { return 0.0; }, params, 0.0), ConfigError);
}

TEST(GradCheck, NonFiniteLossFails) {
    Tensor64 p({1});
    Tensor64* params[] = {&p};
    EXPECT_THROW(grad_check([](bool) { return NAN; }, params, 1e-3), NumericalError);
}

TEST(GradCheck, RestoresParameters) {
    std::mt19937_64 rng(2);
    Tensor64 p = oracle::random_tensor<double>({5}, rng);
    const Tensor64 before = p;
    Tensor64* params[] = {&p};
    grad_check([&](bool) { return p[0] * p[1]; }, params, 1e-3);
    for (std::size_t i = 0; i < p.size(); ++i) {
        EXPECT_EQ(p[i], before[i]);
    }
}

TEST(Adjoints, RandomizedAgreementWithFiniteDifferences) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(seed);
        Tensor64 x = oracle::random_tensor<double>({4, 6}, rng);
        Tensor64 w = oracle::random_tensor<double>({6, 6}, rng);
        Tensor64 gain = oracle::random_tensor<double>({6}, rng);
        Tensor64 shift = oracle::random_tensor<double>({6}, rng);
        Tensor64 r = oracle::random_tensor<double>({4, 6}, rng);
        Tensor64* params[] = {&x, &w, &gain, &shift};
        // softmax(gelu(layer_norm(x)) w), weighted by r
        auto loss = [&](bool with_grad) {
            LayerNormCache<double> cache;
            Tensor64 a = layer_norm(x, gain, shift, &cache);
            Tensor64 g = gelu(a);
            Tensor64 z = matmul(g, w);
            Tensor64 y = softmax_rows(z);
            if (with_grad) {
                Tensor64 dz = softmax_rows_backward(y, r);
                Tensor64 dg(g.shape()), dw(w.shape());
                matmul_backward(g, w, dz, &dg, &dw);
                accumulate(w, dw);
                Tensor64 da = gelu_backward(a, dg);
                accumulate(x, layer_norm_backward(cache, gain, da, gain.grad(), shift.grad()));
            }
            return weighted_sum(y, r);
        };
        EXPECT_LT(grad_check(loss, params, 1e-5).max_relative_error, 1e-3) << "seed " << seed;
    }
}

TEST(Adjoints, GatherScatterAreAdjoint) {
    std::mt19937_64 rng(4);
    Tensor64 x = oracle::random_tensor<double>({5, 3}, rng);
    const std::vector<std::size_t> rows = {4, 0, 2};
    Tensor64 g = gather_rows(x, std::span<const std::size_t>(rows));
    Tensor64 r = oracle::random_tensor<double>(g.shape(), rng);
    Tensor64 back(x.shape());
    scatter_add_rows(back, std::span<const std::size_t>(rows), r);
    // <gather(x), r> == <x, scatter(r)>
    EXPECT_NEAR(weighted_sum(g, r), weighted_sum(x, back), 1e-12);
}
