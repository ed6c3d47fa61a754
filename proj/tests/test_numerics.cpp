// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>

#include "melstm/errors.hpp"
#include "melstm/numerics.hpp"
#include "test_util.hpp"

using namespace melstm;
using namespace melstm::testing;

namespace {

Matrix naive_matmul(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
            c(i, j) = s;
        }
    return c;
}

std::vector<long double> softmax_ld(std::span<const double> x) {
    long double peak = -std::numeric_limits<long double>::infinity();
    for (double v : x) peak = std::max(peak, static_cast<long double>(v));
    std::vector<long double> out;
    long double total = 0.0L;
    for (double v : x) {
        out.push_back(std::exp(static_cast<long double>(v) - peak));
        total += out.back();
    }
    for (auto& v : out) v /= total;
    return out;
}

}  // namespace

TEST(Matmul, MatchesNaiveLoopOnRandom8x8) {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        Matrix a = random_matrix(rng, 8, 8), b = random_matrix(rng, 8, 8);
        Matrix got = matmul(a, b), want = naive_matmul(a, b);
        for (std::size_t i = 0; i < got.size(); ++i) {
            EXPECT_LE(rel_err(got.values()[i], want.values()[i]), 1e-12);
        }
    }
}

TEST(Matmul, IdentityIsNeutral) {
    Rng rng(3);
    Matrix a = random_matrix(rng, 5, 5);
    EXPECT_EQ(matmul(a, Matrix::identity(5)), a);
    EXPECT_EQ(matmul(Matrix::identity(5), a), a);
}

TEST(Matmul, ShapeMismatchThrows) {
    EXPECT_THROW(matmul(Matrix(2, 3), Matrix(2, 3)), DimensionError);
    EXPECT_THROW(matvec(Matrix(2, 3), Vector(2)), DimensionError);
    EXPECT_THROW(add(Vector(2), Vector(3)), DimensionError);
}

TEST(Matvec, TransposeAndOuterAgreeWithMatmul) {
    Rng rng(5);
    Matrix w = random_matrix(rng, 4, 6);
    Vector x = random_vector(rng, 6), g = random_vector(rng, 4);
    Vector wx = matvec(w, x);
    Matrix wx_ref = matmul(w, Matrix::column(x));
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(wx[i], wx_ref(i, 0), 1e-14);
    Vector wtg = matvec_t(w, g);
    for (std::size_t j = 0; j < 6; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < 4; ++i) s += w(i, j) * g[i];
        EXPECT_NEAR(wtg[j], s, 1e-14);
    }
    Matrix acc(4, 6, 1.0);
    add_outer(acc, g, x);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 6; ++j) EXPECT_DOUBLE_EQ(acc(i, j), 1.0 + g[i] * x[j]);
}

TEST(Softmax, KnownValues) {
    Vector s = softmax(Vector{0.0, 0.0});
    EXPECT_DOUBLE_EQ(s[0], 0.5);
    EXPECT_DOUBLE_EQ(s[1], 0.5);
    Vector t = softmax(Vector{std::log(1.0), std::log(3.0)});
    EXPECT_NEAR(t[0], 0.25, 1e-15);
    EXPECT_NEAR(t[1], 0.75, 1e-15);
}

TEST(Softmax, MatchesLongDoubleOracle) {
    Rng rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        Vector x = random_vector(rng, 1 + rng.below(12), 20.0);
        Vector got = softmax(x);
        auto want = softmax_ld(x);
        for (std::size_t i = 0; i < x.size(); ++i) {
            EXPECT_LE(std::abs(got[i] - static_cast<double>(want[i])), 1e-15);
        }
    }
}

TEST(Softmax, ShiftInvariantAndStableForLargeInputs) {
    Vector a = softmax(Vector{1000.0, 1001.0, 999.0});
    Vector b = softmax(Vector{0.0, 1.0, -1.0});
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(a[i], b[i], 1e-15);
    EXPECT_TRUE(all_finite(a));
}

TEST(Softmax, RejectsNonFinite) {
    EXPECT_THROW(softmax(Vector{0.0, std::nan("")}), NumericError);
    EXPECT_THROW(softmax(Vector{std::numeric_limits<double>::infinity()}), NumericError);
    EXPECT_THROW(softmax(Vector{}), InputError);
}

TEST(Activations, ScalarValues) {
    EXPECT_DOUBLE_EQ(sigmoid(0.0), 0.5);
    EXPECT_NEAR(sigmoid(2.0), 1.0 / (1.0 + std::exp(-2.0)), 1e-16);
    EXPECT_NEAR(sigmoid(-800.0), 0.0, 1e-300);
    EXPECT_DOUBLE_EQ(sigmoid(800.0), 1.0);
    Vector t = tanh(Vector{0.0, 0.5});
    EXPECT_DOUBLE_EQ(t[0], 0.0);
    EXPECT_DOUBLE_EQ(t[1], std::tanh(0.5));
}

TEST(Rng, SameSeedSameStream) {
    Rng a(42), b(42), c(43);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next_u64();
        EXPECT_EQ(x, b.next_u64());
        differs |= x != c.next_u64();
    }
    EXPECT_TRUE(differs);
}

TEST(Rng, KnownFirstDraws) {
    // splitmix64(0) seeding followed by xoshiro256**, computed independently.
    Rng rng(0);
    const auto& s = rng.state();
    EXPECT_EQ(s[0], 0xe220a8397b1dcdafULL);
    EXPECT_EQ(s[1], 0x6e789e6aa1b965f4ULL);
    EXPECT_EQ(s[2], 0x06c45d188009454fULL);
    EXPECT_EQ(s[3], 0xf88bb8a8724c81ecULL);
}

TEST(Rng, BelowAndUniformStayInRange) {
    Rng rng(9);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 2000; ++i) {
        const auto k = rng.below(7);
        ASSERT_LT(k, 7u);
        seen.insert(k);
        const double u = rng.uniform(-0.1, 0.1);
        ASSERT_GE(u, -0.1);
        ASSERT_LT(u, 0.1);
    }
    EXPECT_EQ(seen.size(), 7u);
}

TEST(Rng, StateRoundTrip) {
    Rng a(5);
    a.next_u64();
    Rng b(0);
    b.set_state(a.state());
    for (int i = 0; i < 10; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, ShuffleIsPermutation) {
    Rng rng(1);
    std::vector<int> v(50);
    for (int i = 0; i < 50; ++i) v[i] = i;
    rng.shuffle(v);
    std::vector<int> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 50; ++i) EXPECT_EQ(sorted[i], i);
}

TEST(InitUniform, BoundsAndErrors) {
    Rng rng(2);
    Matrix m = init_uniform(rng, 30, 30, 0.1);
    for (double v : m.values()) {
        EXPECT_GE(v, -0.1);
        EXPECT_LE(v, 0.1);
    }
    EXPECT_THROW(init_uniform(rng, 2, 2, 0.0), ContractError);
}

TEST(FiniteDiff, MatchesAnalyticCubic) {
    Rng rng(8);
    Matrix x = random_matrix(rng, 3, 4);
    auto f = [&] {
        double s = 0.0;
        for (double v : x.values()) s += v * v * v;
        return s;
    };
    Matrix* params[] = {&x};
    const Matrix before = x;
    auto g = finite_diff_grad(f, params, 1e-5);
    EXPECT_EQ(x, before);
    // Central differences of x³ carry a bias of exactly ε².
    for (std::size_t i = 0; i < x.size(); ++i) {
        EXPECT_NEAR(g[0].values()[i], 3.0 * x.values()[i] * x.values()[i], 2e-10);
    }
}

TEST(FiniteDiff, SquareAtThree) {
    Matrix x{{3.0}};
    Matrix* params[] = {&x};
    auto g = finite_diff_grad([&] { return x(0, 0) * x(0, 0); }, params, 1e-5);
    EXPECT_NEAR(g[0](0, 0), 6.0, 1e-6);
}

TEST(FiniteDiff, RejectsBadEpsilonAndNonFiniteObjective) {
    Matrix x(1, 1, 1.0);
    Matrix* params[] = {&x};
    EXPECT_THROW(finite_diff_grad([&] { return x(0, 0); }, params, 1e-9), ContractError);
    EXPECT_THROW(finite_diff_grad([&] { return x(0, 0); }, params, 0.1), ContractError);
    EXPECT_THROW(finite_diff_grad([&] { return std::log(x(0, 0) - 1.0); }, params, 1e-5), NumericError);
}

TEST(MaxRelativeError, UsesFlooredDenominator) {
    Matrix a{{1.0, 2.0}}, b{{1.1, 2.0}};
    EXPECT_NEAR(max_relative_error(a, b), 0.1 / 1.1, 1e-15);
    Matrix c{{0.0}}, d{{1e-10}};
    EXPECT_NEAR(max_relative_error(c, d), 1e-2, 1e-15);
}
