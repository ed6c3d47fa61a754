// SPDX-License-Identifier: Apache-2.0
//
// Sharing topologies over task-specific encoders:
//
//   single-lstm     independent vanilla LSTMs
//   single-me-lstm  independent ME-LSTMs, each with its own memory
//   arc1            task-specific LSTM cells; one global memory, its
//                   interface and the fusion parameters shared by all tasks
//   arc2            per-task local memory + fusion, cascading into a shared
//                   global memory that is addressed and written from the
//                   local read vector and fused through a second gate
//
// Shared tensors are the same GradSlot object in every task's view.
//
// Memory lifetime: every sequence starts from the learned initial memories
// (mem_init) and a zero key. Tasks therefore share memory content through
// the shared parameters; the step functions below also accept explicit
// memory states so callers can thread one global memory through several
// tasks' steps.
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "melstm/external_memory.hpp"
#include "melstm/head.hpp"
#include "melstm/lstm_cell.hpp"
#include "melstm/me_lstm.hpp"
#include "melstm/numerics.hpp"

namespace melstm {

enum class ArchKind { SingleLstm, SingleMeLstm, Arc1, Arc2 };

std::string to_string(ArchKind kind);
ArchKind parse_arch_kind(const std::string& name);

struct ArchitectureConfig {
    ArchKind kind = ArchKind::Arc1;
    std::vector<std::size_t> classes;  // one entry per task
    std::size_t vocab_size = 2;
    std::size_t embedding_dim = 100;
    std::size_t hidden = 100;
    MemoryConfig memory;        // global memory (arc1/arc2) or the per-task memory (single-me-lstm)
    MemoryConfig local_memory;  // arc2 only
    bool share_embeddings = true;  // multi-task kinds only
    bool global_write = true;      // arc2 only; false ablates the global write
    double init_half_width = 0.1;

    std::size_t tasks() const { return classes.size(); }
    bool multitask() const { return kind == ArchKind::Arc1 || kind == ArchKind::Arc2; }
    void validate() const;
};

struct TaskModel {
    std::size_t id = 0;
    LstmParams cell;
    // single-me-lstm: own memory; arc1: the shared global memory; arc2: local memory.
    std::optional<MemoryInterfaceParams> memory;
    std::optional<FusionParams> fusion;
    // arc2 only, shared across tasks.
    std::optional<MemoryInterfaceParams> global_memory;
    std::optional<FusionParams> global_fusion;
    ClassifierHead head;
    Param embedding;  // vocab × embedding_dim

    MeLstmParams me_params() const;
};

struct NamedParam {
    std::string name;
    Param param;
};

class Model {
public:
    /// Arc kinds need two or more tasks unless `allow_single_task` is set,
    /// which exists for the degenerate-sharing reduction checks.
    static Model build(const ArchitectureConfig& config, Rng& rng, bool allow_single_task = false);

    const ArchitectureConfig& config() const noexcept { return config_; }
    const std::vector<TaskModel>& tasks() const noexcept { return tasks_; }
    const TaskModel& task(std::size_t id) const;

    /// Every distinct trainable tensor once, in a fixed order.
    const std::vector<NamedParam>& parameters() const noexcept { return params_; }
    /// Throws InputError for an unknown name.
    Param find(const std::string& name) const;
    /// Number of scalar trainable values.
    std::size_t parameter_count() const;
    void zero_grads();

private:
    ArchitectureConfig config_;
    std::vector<TaskModel> tasks_;
    std::vector<NamedParam> params_;
};

struct Arc2Cache {
    LstmGateCache gates;
    MemoryStepCache local;
    FusionCache local_fusion;
    AttentionCache global_attention;
    MemoryKeys global_keys;
    Vector global_source;  // local read vector the global keys come from
    FusionCache global_fusion;
    Vector tanh_s;
    bool global_write = true;
};

struct Arc1StepResult {
    LstmState state;
    MemoryState global;
    StepTrace trace;
    MeLstmCache cache;
};

/// ME-LSTM step of task `task` against the shared global memory.
Arc1StepResult arc1_step(const Model& model, std::size_t task, const LstmState& prev,
                         const MemoryState& global, std::span<const double> x, std::size_t t = 0);

struct Arc2StepResult {
    LstmState state;
    MemoryState local;
    MemoryState global;
    StepTrace trace;
    Arc2Cache cache;
};

/// (1) α^(m) on the local memory with the local previous key, r^(m);
/// (2) global keys emitted from r^(m), α^(s) on the global memory, r^(s);
/// (3) h = o ⊙ tanh(c + g^(m) ⊙ W_f^(m) r^(m) + g^(s) ⊙ W_f^(s) r^(s));
/// (4) local write from h; (5) global write with α^(s) and the global keys.
Arc2StepResult arc2_step(const Model& model, std::size_t task, const LstmState& prev, const MemoryState& local,
                         const MemoryState& global, std::span<const double> x, std::size_t t = 0);

struct Arc2StepGrads {
    Vector h_prev;
    Vector c_prev;
    Vector x;
    Matrix local_mem;
    Vector local_key;
    Matrix global_mem;
};

Arc2StepGrads arc2_backward(const TaskModel& task, const Arc2Cache& cache, std::span<const double> grad_h,
                            std::span<const double> grad_c, const Matrix& grad_local_next,
                            std::span<const double> grad_local_key_next, const Matrix& grad_global_next);

/// Forward record of one task-encoded sequence.
struct TaskTape {
    std::size_t task = 0;
    std::vector<std::size_t> tokens;
    std::vector<LstmCache> lstm;
    Encoding me;
    std::vector<Arc2Cache> arc2;
    std::vector<StepTrace> traces;
    Vector h_final;
};

/// Encodes token ids for `task` from the initial states. Empty input throws InputError.
TaskTape encode(const Model& model, std::size_t task, std::span<const std::size_t> tokens);

/// BPTT from dL/dh_T into every parameter the encoding touched (embedding
/// rows and initial memories included).
void backward(const Model& model, const TaskTape& tape, std::span<const double> grad_h_final);

}  // namespace melstm
