// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "melstm/external_memory.hpp"
#include "melstm/multitask.hpp"

namespace melstm {

struct GradCheckDims {
    std::size_t hidden = 4;
    std::size_t segments = 3;
    std::size_t segment_size = 4;
    std::size_t embedding = 3;
    std::size_t length = 6;
    std::size_t classes = 2;
    std::size_t vocab = 10;
    Align align = Align::Cosine;
    double init_half_width = 1.0;
    double l2 = 0.0;
};

struct TensorCheck {
    std::string name;
    std::size_t coordinates = 0;
    double max_relative_error = 0.0;
    std::size_t worst_index = 0;
    double analytic = 0.0;  // at worst_index
    double numeric = 0.0;
};

struct GradCheckReport {
    ArchKind kind = ArchKind::SingleLstm;
    std::size_t tasks = 0;
    std::vector<TensorCheck> tensors;

    double max_error() const;
    bool passed(double tolerance = 1e-4) const { return max_error() < tolerance; }
};

/// Builds a small model of `kind` (one task for the single kinds, two for
/// arc1/arc2), draws random sequences and labels, and compares the analytic
/// gradient of the joint objective with central differences on every
/// parameter tensor.
GradCheckReport run_gradcheck(ArchKind kind, const GradCheckDims& dims, std::uint64_t seed,
                              double epsilon = 1e-5);

}  // namespace melstm
