// SPDX-License-Identifier: Apache-2.0
#include "melstm/me_lstm.hpp"

#include <cmath>

#include "melstm/errors.hpp"

namespace melstm {

FusionParams FusionParams::create(std::size_t hidden, std::size_t segment_size, Rng& rng,
                                  double half_width) {
    FusionParams p;
    p.proj = make_param(init_uniform(rng, hidden, segment_size, half_width));
    p.gate_read = make_param(init_uniform(rng, hidden, segment_size, half_width));
    p.gate_cell = make_param(init_uniform(rng, hidden, hidden, half_width));
    return p;
}

Vector fusion_forward(const FusionParams& params, std::span<const double> read, std::span<const double> cell,
                      FusionCache& cache) {
    cache.read.assign(read.begin(), read.end());
    cache.cell.assign(cell.begin(), cell.end());
    cache.gate = sigmoid(add(matvec(params.gate_read->value, read), matvec(params.gate_cell->value, cell)));
    cache.projected = matvec(params.proj->value, read);
    return mul(cache.gate, cache.projected);
}

FusionGrads fusion_backward(const FusionParams& params, const FusionCache& cache,
                            std::span<const double> grad_contribution) {
    const std::size_t d = cache.gate.size();
    if (grad_contribution.size() != d) throw DimensionError("fusion_backward: gradient length mismatch");
    Vector grad_proj(d), grad_gate_pre(d);
    for (std::size_t j = 0; j < d; ++j) {
        const double g = cache.gate[j];
        grad_proj[j] = grad_contribution[j] * g;
        grad_gate_pre[j] = grad_contribution[j] * cache.projected[j] * g * (1.0 - g);
    }
    add_outer(params.proj->grad, grad_proj, cache.read);
    add_outer(params.gate_read->grad, grad_gate_pre, cache.read);
    add_outer(params.gate_cell->grad, grad_gate_pre, cache.cell);

    FusionGrads out;
    out.read = matvec_t(params.proj->value, grad_proj);
    add_into(out.read, matvec_t(params.gate_read->value, grad_gate_pre));
    out.cell = matvec_t(params.gate_cell->value, grad_gate_pre);
    return out;
}

MeLstmParams MeLstmParams::create(std::size_t hidden, std::size_t input, const MemoryConfig& memory,
                                  Rng& rng, double half_width) {
    MeLstmParams p;
    p.cell = LstmParams::create(hidden, input, rng, half_width);
    p.memory = MemoryInterfaceParams::create(memory, hidden, rng, half_width);
    p.fusion = FusionParams::create(hidden, memory.segment_size, rng, half_width);
    return p;
}

void MeLstmParams::validate() const {
    const std::size_t d = cell.hidden, m = memory.config.segment_size;
    if (memory.input != d) throw DimensionError("ME-LSTM: memory interface input must equal hidden size");
    if (fusion.proj->value.rows() != d || fusion.proj->value.cols() != m ||
        fusion.gate_read->value.rows() != d || fusion.gate_read->value.cols() != m ||
        fusion.gate_cell->value.rows() != d || fusion.gate_cell->value.cols() != d) {
        throw DimensionError("ME-LSTM: fusion parameter shapes do not match hidden/segment sizes");
    }
}

MeLstmStepResult me_lstm_step(const MeLstmParams& params, const LstmState& prev, const MemoryState& mem,
                              std::span<const double> x, std::size_t t) {
    MeLstmStepResult out;
    auto& cache = out.cache;

    const MemoryReadResult rd = memory_read(params.memory, mem, cache.memory);
    cache.gates = lstm_gates(params.cell, prev, x);
    const Vector contribution = fusion_forward(params.fusion, rd.read, cache.gates.c, cache.fusion);
    cache.tanh_s = tanh(add(cache.gates.c, contribution));

    out.state.c = cache.gates.c;
    out.state.h = mul(cache.gates.out, cache.tanh_s);
    out.memory = memory_write(params.memory, out.state.h, cache.memory);

    out.trace.t = t;
    out.trace.alpha = rd.alpha;
    out.trace.gate = cache.fusion.gate;
    out.trace.h = out.state.h;
    out.trace.read_norm = norm(rd.read);
    return out;
}

MeLstmStepGrads me_lstm_backward(const MeLstmParams& params, const MeLstmCache& cache,
                                 std::span<const double> grad_h, std::span<const double> grad_c,
                                 const Matrix& grad_mem_next, std::span<const double> grad_key_next) {
    const std::size_t d = params.cell.hidden;
    if (grad_h.size() != d || grad_c.size() != d) {
        throw DimensionError("me_lstm_backward: gradient length does not match hidden size");
    }
    MemoryWriteGrads wg = memory_write_backward(params.memory, cache.memory, grad_mem_next, grad_key_next);

    Vector grad_out(d), grad_s(d);
    for (std::size_t j = 0; j < d; ++j) {
        const double hj = grad_h[j] + wg.source[j];
        const double ts = cache.tanh_s[j];
        grad_out[j] = hj * ts;
        grad_s[j] = hj * cache.gates.out[j] * (1.0 - ts * ts);
    }
    FusionGrads fg = fusion_backward(params.fusion, cache.fusion, grad_s);
    Vector grad_c_total = add(grad_c, grad_s);
    add_into(grad_c_total, fg.cell);

    LstmStepGrads lg = lstm_gates_backward(params.cell, cache.gates, grad_c_total, grad_out);
    MemoryStepGrads mg = memory_read_backward(params.memory, cache.memory, std::move(wg), fg.read);

    return {std::move(lg.h_prev), std::move(lg.c_prev), std::move(lg.x), std::move(mg.mem),
            std::move(mg.prev_key)};
}

Encoding encode_sequence(const MeLstmParams& params, const MemoryState& initial,
                         std::span<const Vector> inputs) {
    if (inputs.empty()) throw InputError("encode_sequence: empty sequence");
    Encoding enc;
    enc.traces.reserve(inputs.size());
    enc.caches.reserve(inputs.size());
    LstmState state = LstmState::zeros(params.cell.hidden);
    MemoryState memory = initial;
    for (std::size_t t = 0; t < inputs.size(); ++t) {
        MeLstmStepResult step = me_lstm_step(params, state, memory, inputs[t], t);
        state = std::move(step.state);
        memory = std::move(step.memory);
        enc.traces.push_back(std::move(step.trace));
        enc.caches.push_back(std::move(step.cache));
    }
    enc.h_final = state.h;
    enc.final_state = std::move(state);
    enc.final_memory = std::move(memory);
    return enc;
}

SequenceGrads backward_sequence(const MeLstmParams& params, const Encoding& encoding,
                                std::span<const double> grad_h_final) {
    const std::size_t d = params.cell.hidden;
    const auto& cfg = params.memory.config;
    Vector grad_h(grad_h_final.begin(), grad_h_final.end());
    Vector grad_c(d, 0.0);
    Matrix grad_mem(cfg.segments, cfg.segment_size);
    Vector grad_key(cfg.segment_size, 0.0);

    SequenceGrads out;
    out.inputs.resize(encoding.caches.size());
    for (std::size_t t = encoding.caches.size(); t-- > 0;) {
        MeLstmStepGrads g = me_lstm_backward(params, encoding.caches[t], grad_h, grad_c, grad_mem, grad_key);
        grad_h = std::move(g.h_prev);
        grad_c = std::move(g.c_prev);
        grad_mem = std::move(g.mem);
        grad_key = std::move(g.prev_key);
        out.inputs[t] = std::move(g.x);
    }
    // The initial key is a constant zero vector, so grad_key stops here.
    out.initial_mem = std::move(grad_mem);
    return out;
}

}  // namespace melstm
