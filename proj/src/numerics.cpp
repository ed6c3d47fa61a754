// SPDX-License-Identifier: Apache-2.0
#include "melstm/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "melstm/errors.hpp"

namespace melstm {

namespace {

void require_same_length(std::span<const double> a, std::span<const double> b, const char* op) {
    if (a.size() != b.size()) {
        std::ostringstream os;
        os << op << ": length mismatch " << a.size() << " vs " << b.size();
        throw DimensionError(os.str());
    }
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + ": shape mismatch " + a.shape() + " vs " + b.shape());
    }
}

std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) throw DimensionError("Matrix: ragged initializer");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::column(std::span<const double> values) {
    Matrix m(values.size(), 1);
    std::copy(values.begin(), values.end(), m.data_.begin());
    return m;
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

std::string Matrix::shape() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
}

Rng::Rng(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& s : state_) s = splitmix64(x);
}

std::uint64_t Rng::next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

double Rng::uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) throw ContractError("Rng::below: empty range");
    // Rejection sampling keeps the result unbiased.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % n;
}

GradSlot::GradSlot(std::size_t rows, std::size_t cols)
    : value(rows, cols), grad(rows, cols), accum(rows, cols) {}

GradSlot::GradSlot(Matrix init)
    : value(std::move(init)), grad(value.rows(), value.cols()), accum(value.rows(), value.cols()) {}

Param make_param(Matrix init) { return std::make_shared<GradSlot>(std::move(init)); }

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: cannot multiply " + a.shape() + " by " + b.shape());
    }
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto out_row = out.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            auto b_row = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
        }
    }
    return out;
}

Vector matvec(const Matrix& w, std::span<const double> x) {
    if (w.cols() != x.size()) {
        throw DimensionError("matvec: cannot multiply " + w.shape() + " by vector of length " +
                             std::to_string(x.size()));
    }
    Vector out(w.rows());
    for (std::size_t i = 0; i < w.rows(); ++i) {
        auto r = w.row(i);
        double s = 0.0;
        for (std::size_t j = 0; j < r.size(); ++j) s += r[j] * x[j];
        out[i] = s;
    }
    return out;
}

Vector matvec_t(const Matrix& w, std::span<const double> g) {
    if (w.rows() != g.size()) {
        throw DimensionError("matvec_t: cannot multiply transpose of " + w.shape() +
                             " by vector of length " + std::to_string(g.size()));
    }
    Vector out(w.cols(), 0.0);
    for (std::size_t i = 0; i < w.rows(); ++i) {
        const double gi = g[i];
        if (gi == 0.0) continue;
        auto r = w.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) out[j] += gi * r[j];
    }
    return out;
}

void add_outer(Matrix& g, std::span<const double> a, std::span<const double> b) {
    if (g.rows() != a.size() || g.cols() != b.size()) {
        throw DimensionError("add_outer: " + g.shape() + " does not match " +
                             std::to_string(a.size()) + "x" + std::to_string(b.size()));
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double ai = a[i];
        if (ai == 0.0) continue;
        auto r = g.row(i);
        for (std::size_t j = 0; j < b.size(); ++j) r[j] += ai * b[j];
    }
}

Vector add(std::span<const double> a, std::span<const double> b) {
    require_same_length(a, b, "add");
    Vector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

Vector sub(std::span<const double> a, std::span<const double> b) {
    require_same_length(a, b, "sub");
    Vector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

Vector mul(std::span<const double> a, std::span<const double> b) {
    require_same_length(a, b, "mul");
    Vector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
    return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "add");
    Matrix out(a.rows(), a.cols());
    auto o = out.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = a.values()[i] + b.values()[i];
    return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "sub");
    Matrix out(a.rows(), a.cols());
    auto o = out.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = a.values()[i] - b.values()[i];
    return out;
}

Matrix mul(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "mul");
    Matrix out(a.rows(), a.cols());
    auto o = out.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = a.values()[i] * b.values()[i];
    return out;
}

void add_into(std::span<double> acc, std::span<const double> x) {
    require_same_length(acc, x, "add_into");
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += x[i];
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Vector sigmoid(std::span<const double> x) {
    Vector out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = sigmoid(x[i]);
    return out;
}

Vector tanh(std::span<const double> x) {
    Vector out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::tanh(x[i]);
    return out;
}

Matrix sigmoid(const Matrix& m) {
    Matrix out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.size(); ++i) out.values()[i] = sigmoid(m.values()[i]);
    return out;
}

Matrix tanh(const Matrix& m) {
    Matrix out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.size(); ++i) out.values()[i] = std::tanh(m.values()[i]);
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    require_same_length(a, b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

Vector softmax(std::span<const double> scores) {
    if (scores.empty()) throw InputError("softmax: empty input");
    if (!all_finite(scores)) throw NumericError("softmax: non-finite score");
    const double peak = *std::max_element(scores.begin(), scores.end());
    Vector out(scores.size());
    double total = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out[i] = std::exp(scores[i] - peak);
        total += out[i];
    }
    for (double& v : out) v /= total;
    return out;
}

Matrix init_uniform(Rng& rng, std::size_t rows, std::size_t cols, double half_width) {
    if (!(half_width > 0.0)) throw ContractError("init_uniform: half_width must be positive");
    Matrix m(rows, cols);
    for (double& v : m.values()) v = rng.uniform(-half_width, half_width);
    return m;
}

bool all_finite(std::span<const double> values) {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

std::vector<Matrix> finite_diff_grad(const std::function<double()>& f,
                                     std::span<Matrix* const> params, double epsilon) {
    if (!(epsilon >= 1e-7 && epsilon <= 1e-3)) {
        throw ContractError("finite_diff_grad: epsilon outside [1e-7, 1e-3]");
    }
    std::vector<Matrix> grads;
    grads.reserve(params.size());
    for (std::size_t p = 0; p < params.size(); ++p) {
        Matrix& m = *params[p];
        Matrix g(m.rows(), m.cols());
        for (std::size_t i = 0; i < m.size(); ++i) {
            double& coord = m.values()[i];
            const double saved = coord;
            coord = saved + epsilon;
            const double plus = f();
            coord = saved - epsilon;
            const double minus = f();
            coord = saved;
            if (!std::isfinite(plus) || !std::isfinite(minus)) {
                throw NumericError("finite_diff_grad: non-finite objective at tensor " +
                                   std::to_string(p) + " coordinate " + std::to_string(i));
            }
            g.values()[i] = (plus - minus) / (2.0 * epsilon);
        }
        grads.push_back(std::move(g));
    }
    return grads;
}

double max_relative_error(const Matrix& analytic, const Matrix& numeric) {
    require_same_shape(analytic, numeric, "max_relative_error");
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double a = analytic.values()[i];
        const double b = numeric.values()[i];
        const double denom = std::max({std::abs(a), std::abs(b), 1e-8});
        worst = std::max(worst, std::abs(a - b) / denom);
    }
    return worst;
}

}  // namespace melstm
