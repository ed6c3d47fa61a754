// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major linear algebra, the seeded generator, parameter slots and
// the central-difference gradient oracle. Everything runs in double.
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace melstm {

using Vector = std::vector<double>;

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);
    static Matrix column(std::span<const double> values);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    void fill(double v);
    bool same_shape(const Matrix& other) const noexcept {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }
    std::string shape() const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// xoshiro256** seeded through splitmix64. The draw sequence depends only on
// the seed, never on the platform's standard library.
class Rng {
public:
    using State = std::array<std::uint64_t, 4>;

    explicit Rng(std::uint64_t seed = 0);

    std::uint64_t next_u64();
    /// Uniform in [0, 1) with 53 random bits.
    double uniform01();
    double uniform(double lo, double hi);
    /// Uniform integer in [0, n); n must be positive.
    std::uint64_t below(std::uint64_t n);
    bool bernoulli(double p) { return uniform01() < p; }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

    const State& state() const noexcept { return state_; }
    void set_state(const State& s) noexcept { state_ = s; }

private:
    State state_{};
};

/// Trainable tensor together with its gradient and Adagrad accumulator.
struct GradSlot {
    Matrix value;
    Matrix grad;
    Matrix accum;

    GradSlot() = default;
    GradSlot(std::size_t rows, std::size_t cols);
    explicit GradSlot(Matrix init);

    void zero_grad() { grad.fill(0.0); }
};

using Param = std::shared_ptr<GradSlot>;

Param make_param(Matrix init);

// Products. matvec computes W·x, matvec_t computes Wᵀ·g and add_outer does G += a·bᵀ.
Matrix matmul(const Matrix& a, const Matrix& b);
Vector matvec(const Matrix& w, std::span<const double> x);
Vector matvec_t(const Matrix& w, std::span<const double> g);
void add_outer(Matrix& g, std::span<const double> a, std::span<const double> b);

// Entrywise operations. Binary forms require equal shapes.
Vector add(std::span<const double> a, std::span<const double> b);
Vector sub(std::span<const double> a, std::span<const double> b);
Vector mul(std::span<const double> a, std::span<const double> b);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix mul(const Matrix& a, const Matrix& b);
void add_into(std::span<double> acc, std::span<const double> x);

double sigmoid(double x);
Vector sigmoid(std::span<const double> x);
Vector tanh(std::span<const double> x);
Matrix sigmoid(const Matrix& m);
Matrix tanh(const Matrix& m);

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);

/// Max-subtracted softmax. Throws NumericError on non-finite input.
Vector softmax(std::span<const double> scores);

Matrix init_uniform(Rng& rng, std::size_t rows, std::size_t cols, double half_width);

bool all_finite(std::span<const double> values);

/// Central differences (f(θ+εe) - f(θ-εe)) / 2ε over every coordinate of
/// every tensor in `params`. The tensors are perturbed in place and restored
/// exactly; `f` must read them and nothing else that changes.
std::vector<Matrix> finite_diff_grad(const std::function<double()>& f,
                                     std::span<Matrix* const> params, double epsilon);

/// |a - b| / max(|a|, |b|, 1e-8), maximised over all entries.
double max_relative_error(const Matrix& analytic, const Matrix& numeric);

}  // namespace melstm
