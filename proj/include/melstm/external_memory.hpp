// SPDX-License-Identifier: Apache-2.0
//
// Content-addressed external memory: a K×M matrix of K segments. An
// interface emits key, erase and add vectors from a source vector; the key
// addresses the segments through an alignment score followed by a softmax
// over the K segments; the resulting distribution drives both the read and
// the erase/add write.
#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "melstm/numerics.hpp"

namespace melstm {

enum class Align { Cosine, Additive };

std::string to_string(Align align);
Align parse_align(const std::string& name);

/// Floor of the cosine denominator.
inline constexpr double kCosineEpsilon = 1e-8;

struct MemoryConfig {
    std::size_t segments = 50;      // K
    std::size_t segment_size = 20;  // M
    Align align = Align::Cosine;

    void validate() const;
    friend bool operator==(const MemoryConfig&, const MemoryConfig&) = default;
};

struct MemoryState {
    Matrix mem;      // K × M
    Vector prev_key; // M, key used to address at the next step
};

struct MemoryInterfaceParams {
    MemoryConfig config;
    std::size_t input = 0;  // length of the vector the keys are emitted from
    Param emit_weight;      // 3M × input, rows [key; erase; add]
    Param emit_bias;        // 3M × 1
    Param align_v;          // M × 1, additive alignment only
    Param align_w;          // M × 2M, additive alignment only
    Param mem_init;         // K × M, learned initial memory

    static MemoryInterfaceParams create(const MemoryConfig& config, std::size_t input, Rng& rng,
                                        double half_width);
    /// mem_init and zero key.
    MemoryState initial_state() const;
};

struct MemoryKeys {
    Vector key;    // tanh, (-1, 1)
    Vector erase;  // σ, (0, 1)
    Vector add;    // tanh, (-1, 1)
};

/// [key; erase; add] = [tanh; σ; tanh](W source + b).
MemoryKeys emit_keys(const MemoryInterfaceParams& params, std::span<const double> source);

/// Returns dL/dsource and accumulates the interface gradients.
Vector emit_keys_backward(const MemoryInterfaceParams& params, std::span<const double> source,
                          const MemoryKeys& keys, std::span<const double> grad_key,
                          std::span<const double> grad_erase, std::span<const double> grad_add);

/// cosine: x·y / max(‖x‖‖y‖, ε), 0 when either vector is zero; additive: vᵀ tanh(W_a [x; y]).
double align_score(const MemoryInterfaceParams& params, std::span<const double> mem_row,
                   std::span<const double> key);

struct AttentionCache {
    Matrix mem;
    Vector key;
    Vector alpha;
    Matrix hidden;  // additive alignment: tanh(W_a [row; key]) per segment
};

/// Softmax over the K alignment scores of `key` against the rows of `mem`.
Vector attention(const MemoryInterfaceParams& params, const Matrix& mem, std::span<const double> key,
                 AttentionCache* cache = nullptr);

struct AttentionGrads {
    Matrix mem;
    Vector key;
};

AttentionGrads attention_backward(const MemoryInterfaceParams& params, const AttentionCache& cache,
                                  std::span<const double> grad_alpha);

/// r = αᵀ M. Throws ContractError unless α sums to 1 within 1e-9.
Vector read(const Matrix& mem, std::span<const double> alpha);

/// Accumulates dL/dM (α ⊗ grad_r) and dL/dα (M grad_r).
void read_backward(const Matrix& mem, std::span<const double> alpha, std::span<const double> grad_read,
                   Matrix& grad_mem, std::span<double> grad_alpha);

/// M'[k,j] = M[k,j]·(1 - α_k e_j) + α_k a_j.
Matrix write(const Matrix& mem, std::span<const double> alpha, const MemoryKeys& keys);

struct WriteGrads {
    Matrix mem;
    Vector alpha;
    Vector erase;
    Vector add;
};

WriteGrads write_backward(const Matrix& mem, std::span<const double> alpha, const MemoryKeys& keys,
                          const Matrix& grad_mem_next);

/// Everything one addressed read + write through an interface retains for
/// the backward pass.
struct MemoryStepCache {
    const GradSlot* owner = nullptr;
    AttentionCache attention;
    Vector read;
    Vector source;
    MemoryKeys keys;
};

struct MemoryReadResult {
    Vector alpha;
    Vector read;
};

/// Addresses `state.mem` with `state.prev_key` and reads from it.
MemoryReadResult memory_read(const MemoryInterfaceParams& params, const MemoryState& state,
                             MemoryStepCache& cache);

/// Emits keys from `source`, writes with the cached α and returns the next
/// state (whose prev_key is the emitted key).
MemoryState memory_write(const MemoryInterfaceParams& params, std::span<const double> source,
                         MemoryStepCache& cache);

struct MemoryStepGrads {
    Matrix mem;       // dL/dM_{t-1}
    Vector prev_key;  // dL/dk_{t-1}
    Vector source;    // dL/dsource (the vector keys were emitted from)
};

/// Write half of the reverse pass: gradients reaching M_{t-1} and α_t
/// through the write, and dL/dsource through the emitted keys.
struct MemoryWriteGrads {
    Matrix mem;
    Vector alpha;
    Vector source;
};

MemoryWriteGrads memory_write_backward(const MemoryInterfaceParams& params, const MemoryStepCache& cache,
                                       const Matrix& grad_mem_next, std::span<const double> grad_key_next);

/// Read half: folds grad_read through the read and the addressing, on top of
/// what the write half produced.
MemoryStepGrads memory_read_backward(const MemoryInterfaceParams& params, const MemoryStepCache& cache,
                                     MemoryWriteGrads write_grads, std::span<const double> grad_read);

/// Reverse of memory_read + memory_write. grad_mem_next and grad_key_next
/// arrive from the following step, grad_read from the consumer of r_t.
MemoryStepGrads memory_backward(const MemoryInterfaceParams& params, const MemoryStepCache& cache,
                                const Matrix& grad_mem_next, std::span<const double> grad_key_next,
                                std::span<const double> grad_read);

}  // namespace melstm
