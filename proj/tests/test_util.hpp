// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "melstm/numerics.hpp"

namespace melstm::testing {

inline Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
    return init_uniform(rng, rows, cols, scale);
}

inline Vector random_vector(Rng& rng, std::size_t n, double scale = 1.0) {
    Vector v(n);
    for (auto& x : v) x = rng.uniform(-scale, scale);
    return v;
}

inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

// Worst relative error between analytic gradients and central differences of `f`.
inline double gradient_error(const std::function<double()>& f, const std::vector<Param>& params,
                             double eps = 1e-5) {
    std::vector<Matrix*> values;
    for (const auto& p : params) values.push_back(&p->value);
    const auto numeric = finite_diff_grad(f, values, eps);
    double worst = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        worst = std::max(worst, max_relative_error(params[i]->grad, numeric[i]));
    }
    return worst;
}

inline std::string temp_path(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "melstm_tests";
    std::filesystem::create_directories(dir);
    return (dir / name).string();
}

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void spit(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
}

}  // namespace melstm::testing
