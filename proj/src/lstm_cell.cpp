// SPDX-License-Identifier: Apache-2.0
#include "melstm/lstm_cell.hpp"

#include <cmath>

#include "melstm/errors.hpp"

namespace melstm {

namespace {

void check_cache(const LstmParams& params, const LstmGateCache& cache) {
    if (cache.owner != params.weight.get() || cache.c.size() != params.hidden ||
        cache.x.size() != params.input) {
        throw ContractError("lstm backward: cache was not produced by these parameters");
    }
}

}  // namespace

LstmParams LstmParams::create(std::size_t hidden, std::size_t input, Rng& rng, double half_width) {
    LstmParams p;
    p.hidden = hidden;
    p.input = input;
    p.weight = make_param(init_uniform(rng, 4 * hidden, input + hidden, half_width));
    p.bias = make_param(init_uniform(rng, 4 * hidden, 1, half_width));
    return p;
}

LstmParams LstmParams::zeros(std::size_t hidden, std::size_t input) {
    LstmParams p;
    p.hidden = hidden;
    p.input = input;
    p.weight = make_param(Matrix(4 * hidden, input + hidden));
    p.bias = make_param(Matrix(4 * hidden, 1));
    return p;
}

LstmGateCache lstm_gates(const LstmParams& params, const LstmState& prev, std::span<const double> x) {
    const std::size_t d = params.hidden;
    if (x.size() != params.input) {
        throw DimensionError("lstm_step: input length " + std::to_string(x.size()) + ", expected " +
                             std::to_string(params.input));
    }
    if (prev.h.size() != d || prev.c.size() != d) {
        throw DimensionError("lstm_step: state length does not match hidden size " + std::to_string(d));
    }

    Vector xh(x.begin(), x.end());
    xh.insert(xh.end(), prev.h.begin(), prev.h.end());
    Vector pre = matvec(params.weight->value, xh);
    add_into(pre, params.bias->value.values());

    LstmGateCache cache;
    cache.owner = params.weight.get();
    cache.x.assign(x.begin(), x.end());
    cache.h_prev = prev.h;
    cache.c_prev = prev.c;
    cache.cand.resize(d);
    cache.out.resize(d);
    cache.in.resize(d);
    cache.forget.resize(d);
    cache.c.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
        cache.cand[j] = std::tanh(pre[j]);
        cache.out[j] = sigmoid(pre[d + j]);
        cache.in[j] = sigmoid(pre[2 * d + j]);
        cache.forget[j] = sigmoid(pre[3 * d + j]);
        cache.c[j] = cache.cand[j] * cache.in[j] + prev.c[j] * cache.forget[j];
    }
    return cache;
}

LstmStepGrads lstm_gates_backward(const LstmParams& params, const LstmGateCache& cache,
                                  std::span<const double> grad_c, std::span<const double> grad_out) {
    check_cache(params, cache);
    const std::size_t d = params.hidden;
    if (grad_c.size() != d || grad_out.size() != d) {
        throw DimensionError("lstm backward: gradient length does not match hidden size");
    }

    Vector grad_pre(4 * d);
    LstmStepGrads grads;
    grads.c_prev.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
        const double dc = grad_c[j];
        const double cand = cache.cand[j], o = cache.out[j], i = cache.in[j], f = cache.forget[j];
        grad_pre[j] = dc * i * (1.0 - cand * cand);
        grad_pre[d + j] = grad_out[j] * o * (1.0 - o);
        grad_pre[2 * d + j] = dc * cand * i * (1.0 - i);
        grad_pre[3 * d + j] = dc * cache.c_prev[j] * f * (1.0 - f);
        grads.c_prev[j] = dc * f;
    }

    Vector xh = cache.x;
    xh.insert(xh.end(), cache.h_prev.begin(), cache.h_prev.end());
    add_outer(params.weight->grad, grad_pre, xh);
    add_into(params.bias->grad.values(), grad_pre);

    Vector grad_xh = matvec_t(params.weight->value, grad_pre);
    grads.x.assign(grad_xh.begin(), grad_xh.begin() + static_cast<std::ptrdiff_t>(params.input));
    grads.h_prev.assign(grad_xh.begin() + static_cast<std::ptrdiff_t>(params.input), grad_xh.end());
    return grads;
}

LstmStepResult lstm_step(const LstmParams& params, const LstmState& prev, std::span<const double> x) {
    LstmStepResult result;
    result.cache.gates = lstm_gates(params, prev, x);
    const auto& g = result.cache.gates;
    result.cache.tanh_c = tanh(g.c);
    result.next.c = g.c;
    result.next.h = mul(g.out, result.cache.tanh_c);
    return result;
}

LstmStepGrads lstm_backward(const LstmParams& params, const LstmCache& cache,
                            std::span<const double> grad_h, std::span<const double> grad_c) {
    check_cache(params, cache.gates);
    const std::size_t d = params.hidden;
    if (grad_h.size() != d || grad_c.size() != d) {
        throw DimensionError("lstm_backward: gradient length does not match hidden size");
    }
    Vector grad_out(d), grad_c_total(d);
    for (std::size_t j = 0; j < d; ++j) {
        const double tc = cache.tanh_c[j];
        grad_out[j] = grad_h[j] * tc;
        grad_c_total[j] = grad_c[j] + grad_h[j] * cache.gates.out[j] * (1.0 - tc * tc);
    }
    return lstm_gates_backward(params, cache.gates, grad_c_total, grad_out);
}

}  // namespace melstm
