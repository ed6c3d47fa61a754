// SPDX-License-Identifier: Apache-2.0
#include "melstm/head.hpp"

#include <algorithm>
#include <cmath>

#include "melstm/errors.hpp"

namespace melstm {

namespace {
constexpr double kLogFloor = 1e-12;
}

ClassifierHead ClassifierHead::create(std::size_t classes, std::size_t hidden, Rng& rng,
                                      double half_width) {
    if (classes < 2) throw ConfigError("classifier head needs at least 2 classes");
    return {make_param(init_uniform(rng, classes, hidden, half_width)),
            make_param(init_uniform(rng, classes, 1, half_width))};
}

Vector predict(const ClassifierHead& head, std::span<const double> h) {
    Vector logits = matvec(head.weight->value, h);
    add_into(logits, head.bias->value.values());
    return softmax(logits);
}

double cross_entropy(std::span<const double> pred, std::size_t label) {
    if (label >= pred.size()) {
        throw InputError("cross_entropy: label " + std::to_string(label) + " outside " +
                         std::to_string(pred.size()) + " classes");
    }
    return -std::log(pred[label] + kLogFloor);
}

Vector head_backward(const ClassifierHead& head, std::span<const double> h, std::span<const double> pred,
                     std::size_t label, double scale) {
    if (label >= pred.size()) throw InputError("head_backward: label out of range");
    // d/dz of -log(p_y + δ) is (p_y / (p_y + δ)) · (p - onehot(y)).
    const double factor = scale * pred[label] / (pred[label] + kLogFloor);
    Vector grad_logits(pred.begin(), pred.end());
    grad_logits[label] -= 1.0;
    for (double& g : grad_logits) g *= factor;
    add_outer(head.weight->grad, grad_logits, h);
    add_into(head.bias->grad.values(), grad_logits);
    return matvec_t(head.weight->value, grad_logits);
}

std::size_t argmax(std::span<const double> values) {
    return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

}  // namespace melstm
