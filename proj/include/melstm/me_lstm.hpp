// SPDX-License-Identifier: Apache-2.0
//
// Memory-enhanced LSTM with deep fusion. One step:
//
//   α_t = attention(M_{t-1}, k_{t-1})          r_t = α_tᵀ M_{t-1}
//   gates, c_t as in the vanilla cell
//   g_t = σ(W_r r_t + W_c c_t)
//   h_t = o_t ⊙ tanh(c_t + g_t ⊙ (W_f r_t))
//   (k_t, e_t, a_t) emitted from h_t;  M_t = write(M_{t-1}, α_t, e_t, a_t)
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "melstm/external_memory.hpp"
#include "melstm/lstm_cell.hpp"
#include "melstm/numerics.hpp"

namespace melstm {

struct FusionParams {
    Param proj;       // W_f, d × M
    Param gate_read;  // W_r, d × M
    Param gate_cell;  // W_c, d × d

    static FusionParams create(std::size_t hidden, std::size_t segment_size, Rng& rng, double half_width);
};

struct FusionCache {
    Vector read;
    Vector cell;
    Vector gate;
    Vector projected;  // W_f r
};

/// Returns g ⊙ (W_f r) and fills the cache.
Vector fusion_forward(const FusionParams& params, std::span<const double> read, std::span<const double> cell,
                      FusionCache& cache);

struct FusionGrads {
    Vector read;
    Vector cell;
};

FusionGrads fusion_backward(const FusionParams& params, const FusionCache& cache,
                            std::span<const double> grad_contribution);

struct MeLstmParams {
    LstmParams cell;
    MemoryInterfaceParams memory;
    FusionParams fusion;

    static MeLstmParams create(std::size_t hidden, std::size_t input, const MemoryConfig& memory,
                               Rng& rng, double half_width);
    void validate() const;
};

/// Per-step introspection record.
struct StepTrace {
    std::size_t t = 0;
    Vector alpha;
    Vector gate;
    Vector alpha_shared;  // second memory (local-global hybrid only)
    Vector gate_shared;
    Vector h;
    Vector class_scores;  // filled by consumers that apply a head
    double read_norm = 0.0;
};

struct MeLstmCache {
    LstmGateCache gates;
    MemoryStepCache memory;
    FusionCache fusion;
    Vector tanh_s;  // tanh(c_t + g_t ⊙ W_f r_t)
};

struct MeLstmStepResult {
    LstmState state;
    MemoryState memory;
    StepTrace trace;
    MeLstmCache cache;
};

MeLstmStepResult me_lstm_step(const MeLstmParams& params, const LstmState& prev, const MemoryState& mem,
                              std::span<const double> x, std::size_t t = 0);

struct MeLstmStepGrads {
    Vector h_prev;
    Vector c_prev;
    Vector x;
    Matrix mem;
    Vector prev_key;
};

MeLstmStepGrads me_lstm_backward(const MeLstmParams& params, const MeLstmCache& cache,
                                 std::span<const double> grad_h, std::span<const double> grad_c,
                                 const Matrix& grad_mem_next, std::span<const double> grad_key_next);

struct Encoding {
    Vector h_final;
    LstmState final_state;
    MemoryState final_memory;
    std::vector<StepTrace> traces;
    std::vector<MeLstmCache> caches;
};

/// Folds me_lstm_step over the inputs from a zero LSTM state and `initial`.
Encoding encode_sequence(const MeLstmParams& params, const MemoryState& initial,
                         std::span<const Vector> inputs);

struct SequenceGrads {
    std::vector<Vector> inputs;
    Matrix initial_mem;
};

/// BPTT for a loss that depends on h_T only.
SequenceGrads backward_sequence(const MeLstmParams& params, const Encoding& encoding,
                                std::span<const double> grad_h_final);

}  // namespace melstm
