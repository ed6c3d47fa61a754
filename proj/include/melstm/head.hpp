// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>

#include "melstm/numerics.hpp"

namespace melstm {

/// Task-specific softmax output layer.
struct ClassifierHead {
    Param weight;  // C × d
    Param bias;    // C × 1

    static ClassifierHead create(std::size_t classes, std::size_t hidden, Rng& rng, double half_width);
    std::size_t classes() const { return weight->value.rows(); }
    std::size_t hidden() const { return weight->value.cols(); }
};

/// softmax(W h + b).
Vector predict(const ClassifierHead& head, std::span<const double> h);

/// -log(pred[label] + 1e-12). Throws InputError on an out-of-range label.
double cross_entropy(std::span<const double> pred, std::size_t label);

/// Gradient of scale · cross_entropy(predict(head, h), label): accumulates
/// the head gradients and returns dL/dh.
Vector head_backward(const ClassifierHead& head, std::span<const double> h, std::span<const double> pred,
                     std::size_t label, double scale);

std::size_t argmax(std::span<const double> values);

}  // namespace melstm
