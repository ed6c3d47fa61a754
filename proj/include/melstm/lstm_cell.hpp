// SPDX-License-Identifier: Apache-2.0
//
// LSTM without peepholes. The packed affine map produces the four gate
// pre-activations in the fixed block order [cand; out; in; forget], from the
// concatenated input [x; h_prev]:
//
//   [cand; out; in; forget] = [tanh; σ; σ; σ](W [x; h_prev] + b)
//   c = cand ⊙ in + c_prev ⊙ forget
//   h = out ⊙ tanh(c)
#pragma once

#include <cstddef>
#include <span>

#include "melstm/numerics.hpp"

namespace melstm {

struct LstmParams {
    std::size_t hidden = 0;
    std::size_t input = 0;
    Param weight;  // 4·hidden × (input + hidden), columns [x; h_prev]
    Param bias;    // 4·hidden × 1

    static LstmParams create(std::size_t hidden, std::size_t input, Rng& rng, double half_width);
    static LstmParams zeros(std::size_t hidden, std::size_t input);
};

struct LstmState {
    Vector h;
    Vector c;

    static LstmState zeros(std::size_t hidden) { return {Vector(hidden, 0.0), Vector(hidden, 0.0)}; }
};

/// Gate activations and the new cell, before the output nonlinearity.
struct LstmGateCache {
    const GradSlot* owner = nullptr;
    Vector x;
    Vector h_prev;
    Vector c_prev;
    Vector cand;
    Vector out;
    Vector in;
    Vector forget;
    Vector c;
};

struct LstmCache {
    LstmGateCache gates;
    Vector tanh_c;
};

struct LstmStepResult {
    LstmState next;
    LstmCache cache;
};

struct LstmStepGrads {
    Vector h_prev;
    Vector c_prev;
    Vector x;
};

/// Computes gates and c_t; shared by the vanilla and memory-enhanced cells.
LstmGateCache lstm_gates(const LstmParams& params, const LstmState& prev, std::span<const double> x);

/// Reverse of lstm_gates given dL/dc_t (total) and dL/d out_t. Accumulates
/// into the parameter gradients.
LstmStepGrads lstm_gates_backward(const LstmParams& params, const LstmGateCache& cache,
                                  std::span<const double> grad_c, std::span<const double> grad_out);

LstmStepResult lstm_step(const LstmParams& params, const LstmState& prev, std::span<const double> x);

/// grad_c is the gradient arriving at c_t from the next step.
LstmStepGrads lstm_backward(const LstmParams& params, const LstmCache& cache,
                            std::span<const double> grad_h, std::span<const double> grad_c);

}  // namespace melstm
