// SPDX-License-Identifier: Apache-2.0
#include "melstm/multitask.hpp"

#include "melstm/errors.hpp"

namespace melstm {

std::string to_string(ArchKind kind) {
    switch (kind) {
        case ArchKind::SingleLstm: return "single-lstm";
        case ArchKind::SingleMeLstm: return "single-me-lstm";
        case ArchKind::Arc1: return "arc1";
        case ArchKind::Arc2: return "arc2";
    }
    return "unknown";
}

ArchKind parse_arch_kind(const std::string& name) {
    if (name == "single-lstm") return ArchKind::SingleLstm;
    if (name == "single-me-lstm") return ArchKind::SingleMeLstm;
    if (name == "arc1") return ArchKind::Arc1;
    if (name == "arc2") return ArchKind::Arc2;
    throw ConfigError("unknown architecture '" + name +
                      "' (expected single-lstm, single-me-lstm, arc1 or arc2)");
}

void ArchitectureConfig::validate() const {
    if (classes.empty()) throw ConfigError("architecture: at least one task is required");
    for (std::size_t c : classes) {
        if (c < 2) throw ConfigError("architecture: every task needs at least 2 classes");
    }
    if (hidden < 1) throw ConfigError("architecture: hidden must be >= 1");
    if (embedding_dim < 1) throw ConfigError("architecture: embedding_dim must be >= 1");
    if (vocab_size < 1) throw ConfigError("architecture: vocab_size must be >= 1");
    if (!(init_half_width > 0.0)) throw ConfigError("architecture: init_half_width must be positive");
    if (kind != ArchKind::SingleLstm) memory.validate();
    if (kind == ArchKind::Arc2) local_memory.validate();
}

MeLstmParams TaskModel::me_params() const {
    if (!memory || !fusion) throw ContractError("task model has no memory path");
    return {cell, *memory, *fusion};
}

namespace {

void push_memory(std::vector<NamedParam>& out, const std::string& prefix, const MemoryInterfaceParams& m) {
    out.push_back({prefix + ".emit_weight", m.emit_weight});
    out.push_back({prefix + ".emit_bias", m.emit_bias});
    if (m.align_v) {
        out.push_back({prefix + ".align_v", m.align_v});
        out.push_back({prefix + ".align_w", m.align_w});
    }
    out.push_back({prefix + ".mem_init", m.mem_init});
}

void push_fusion(std::vector<NamedParam>& out, const std::string& prefix, const FusionParams& f) {
    out.push_back({prefix + ".proj", f.proj});
    out.push_back({prefix + ".gate_read", f.gate_read});
    out.push_back({prefix + ".gate_cell", f.gate_cell});
}

}  // namespace

Model Model::build(const ArchitectureConfig& config, Rng& rng, bool allow_single_task) {
    config.validate();
    if (config.multitask() && config.tasks() < 2 && !allow_single_task) {
        throw ConfigError("architecture: " + to_string(config.kind) + " requires at least 2 tasks");
    }
    const double hw = config.init_half_width;
    const std::size_t d = config.hidden;

    Model model;
    model.config_ = config;
    auto& params = model.params_;

    Param shared_embedding;
    const bool share_embedding = config.multitask() && config.share_embeddings;
    if (share_embedding) {
        shared_embedding = make_param(init_uniform(rng, config.vocab_size, config.embedding_dim, hw));
        params.push_back({"embedding", shared_embedding});
    }

    std::optional<MemoryInterfaceParams> shared_memory;
    std::optional<FusionParams> shared_fusion;
    if (config.kind == ArchKind::Arc1) {
        shared_memory = MemoryInterfaceParams::create(config.memory, d, rng, hw);
        shared_fusion = FusionParams::create(d, config.memory.segment_size, rng, hw);
        push_memory(params, "shared.memory", *shared_memory);
        push_fusion(params, "shared.fusion", *shared_fusion);
    } else if (config.kind == ArchKind::Arc2) {
        shared_memory = MemoryInterfaceParams::create(config.memory, config.local_memory.segment_size, rng, hw);
        shared_fusion = FusionParams::create(d, config.memory.segment_size, rng, hw);
        push_memory(params, "shared.global_memory", *shared_memory);
        push_fusion(params, "shared.global_fusion", *shared_fusion);
    }

    for (std::size_t m = 0; m < config.tasks(); ++m) {
        const std::string prefix = "task" + std::to_string(m);
        TaskModel task;
        task.id = m;
        if (share_embedding) {
            task.embedding = shared_embedding;
        } else {
            task.embedding = make_param(init_uniform(rng, config.vocab_size, config.embedding_dim, hw));
            params.push_back({prefix + ".embedding", task.embedding});
        }
        task.cell = LstmParams::create(d, config.embedding_dim, rng, hw);
        params.push_back({prefix + ".cell.weight", task.cell.weight});
        params.push_back({prefix + ".cell.bias", task.cell.bias});

        switch (config.kind) {
            case ArchKind::SingleLstm: break;
            case ArchKind::SingleMeLstm:
                task.memory = MemoryInterfaceParams::create(config.memory, d, rng, hw);
                task.fusion = FusionParams::create(d, config.memory.segment_size, rng, hw);
                push_memory(params, prefix + ".memory", *task.memory);
                push_fusion(params, prefix + ".fusion", *task.fusion);
                break;
            case ArchKind::Arc1:
                task.memory = shared_memory;
                task.fusion = shared_fusion;
                break;
            case ArchKind::Arc2:
                task.memory = MemoryInterfaceParams::create(config.local_memory, d, rng, hw);
                task.fusion = FusionParams::create(d, config.local_memory.segment_size, rng, hw);
                push_memory(params, prefix + ".local_memory", *task.memory);
                push_fusion(params, prefix + ".local_fusion", *task.fusion);
                task.global_memory = shared_memory;
                task.global_fusion = shared_fusion;
                break;
        }
        task.head = ClassifierHead::create(config.classes[m], d, rng, hw);
        params.push_back({prefix + ".head.weight", task.head.weight});
        params.push_back({prefix + ".head.bias", task.head.bias});
        model.tasks_.push_back(std::move(task));
    }
    return model;
}

const TaskModel& Model::task(std::size_t id) const {
    if (id >= tasks_.size()) throw InputError("unknown task id " + std::to_string(id));
    return tasks_[id];
}

Param Model::find(const std::string& name) const {
    for (const auto& p : params_) {
        if (p.name == name) return p.param;
    }
    throw InputError("no parameter named '" + name + "'");
}

std::size_t Model::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.param->value.size();
    return n;
}

void Model::zero_grads() {
    for (auto& p : params_) p.param->zero_grad();
}

Arc1StepResult arc1_step(const Model& model, std::size_t task, const LstmState& prev,
                         const MemoryState& global, std::span<const double> x, std::size_t t) {
    if (model.config().kind != ArchKind::Arc1) throw ContractError("arc1_step on a non-arc1 model");
    MeLstmStepResult r = me_lstm_step(model.task(task).me_params(), prev, global, x, t);
    return {std::move(r.state), std::move(r.memory), std::move(r.trace), std::move(r.cache)};
}

Arc2StepResult arc2_step(const Model& model, std::size_t task, const LstmState& prev, const MemoryState& local,
                         const MemoryState& global, std::span<const double> x, std::size_t t) {
    if (model.config().kind != ArchKind::Arc2) throw ContractError("arc2_step on a non-arc2 model");
    const TaskModel& tm = model.task(task);
    const auto& gmem = *tm.global_memory;

    Arc2StepResult out;
    auto& cache = out.cache;
    cache.global_write = model.config().global_write;

    const MemoryReadResult local_read = memory_read(*tm.memory, local, cache.local);

    cache.global_source = local_read.read;
    cache.global_keys = emit_keys(gmem, local_read.read);
    const Vector global_alpha = attention(gmem, global.mem, cache.global_keys.key, &cache.global_attention);
    const Vector global_read = read(global.mem, global_alpha);

    cache.gates = lstm_gates(tm.cell, prev, x);
    const Vector local_u = fusion_forward(*tm.fusion, local_read.read, cache.gates.c, cache.local_fusion);
    const Vector global_u = fusion_forward(*tm.global_fusion, global_read, cache.gates.c, cache.global_fusion);
    cache.tanh_s = tanh(add(add(cache.gates.c, local_u), global_u));

    out.state.c = cache.gates.c;
    out.state.h = mul(cache.gates.out, cache.tanh_s);
    out.local = memory_write(*tm.memory, out.state.h, cache.local);
    if (cache.global_write) {
        out.global.mem = write(global.mem, global_alpha, cache.global_keys);
        out.global.prev_key = cache.global_keys.key;
    } else {
        out.global = global;
    }

    out.trace.t = t;
    out.trace.alpha = local_read.alpha;
    out.trace.gate = cache.local_fusion.gate;
    out.trace.alpha_shared = global_alpha;
    out.trace.gate_shared = cache.global_fusion.gate;
    out.trace.h = out.state.h;
    out.trace.read_norm = norm(local_read.read);
    return out;
}

Arc2StepGrads arc2_backward(const TaskModel& task, const Arc2Cache& cache, std::span<const double> grad_h,
                            std::span<const double> grad_c, const Matrix& grad_local_next,
                            std::span<const double> grad_local_key_next, const Matrix& grad_global_next) {
    const std::size_t d = task.cell.hidden;
    const auto& gmem = *task.global_memory;
    const auto& gatt = cache.global_attention;
    const std::size_t gm = gmem.config.segment_size;

    MemoryWriteGrads local_w = memory_write_backward(*task.memory, cache.local, grad_local_next, grad_local_key_next);

    Matrix grad_global;
    Vector grad_global_alpha(gmem.config.segments, 0.0);
    Vector grad_global_erase(gm, 0.0), grad_global_add(gm, 0.0);
    if (cache.global_write) {
        WriteGrads wg = write_backward(gatt.mem, gatt.alpha, cache.global_keys, grad_global_next);
        grad_global = std::move(wg.mem);
        grad_global_alpha = std::move(wg.alpha);
        grad_global_erase = std::move(wg.erase);
        grad_global_add = std::move(wg.add);
    } else {
        grad_global = grad_global_next;
    }

    Vector grad_out(d), grad_s(d);
    for (std::size_t j = 0; j < d; ++j) {
        const double hj = grad_h[j] + local_w.source[j];
        const double ts = cache.tanh_s[j];
        grad_out[j] = hj * ts;
        grad_s[j] = hj * cache.gates.out[j] * (1.0 - ts * ts);
    }
    FusionGrads local_f = fusion_backward(*task.fusion, cache.local_fusion, grad_s);
    FusionGrads global_f = fusion_backward(*task.global_fusion, cache.global_fusion, grad_s);
    Vector grad_c_total = add(grad_c, grad_s);
    add_into(grad_c_total, local_f.cell);
    add_into(grad_c_total, global_f.cell);
    LstmStepGrads lg = lstm_gates_backward(task.cell, cache.gates, grad_c_total, grad_out);

    read_backward(gatt.mem, gatt.alpha, global_f.read, grad_global, grad_global_alpha);
    AttentionGrads ag = attention_backward(gmem, gatt, grad_global_alpha);
    add_into(grad_global.values(), ag.mem.values());
    Vector grad_local_read = emit_keys_backward(gmem, cache.global_source, cache.global_keys, ag.key,
                                                grad_global_erase, grad_global_add);
    add_into(grad_local_read, local_f.read);

    MemoryStepGrads local_g = memory_read_backward(*task.memory, cache.local, std::move(local_w), grad_local_read);

    return {std::move(lg.h_prev), std::move(lg.c_prev), std::move(lg.x), std::move(local_g.mem),
            std::move(local_g.prev_key), std::move(grad_global)};
}

namespace {

std::vector<Vector> lookup(const TaskModel& task, std::span<const std::size_t> tokens) {
    const Matrix& table = task.embedding->value;
    std::vector<Vector> inputs;
    inputs.reserve(tokens.size());
    for (std::size_t id : tokens) {
        if (id >= table.rows()) throw InputError("token id " + std::to_string(id) + " outside vocabulary");
        auto row = table.row(id);
        inputs.emplace_back(row.begin(), row.end());
    }
    return inputs;
}

void scatter(const TaskModel& task, std::size_t token, std::span<const double> grad) {
    add_into(task.embedding->grad.row(token), grad);
}

}  // namespace

TaskTape encode(const Model& model, std::size_t task, std::span<const std::size_t> tokens) {
    if (tokens.empty()) throw InputError("encode: empty sequence");
    const TaskModel& tm = model.task(task);
    const std::vector<Vector> inputs = lookup(tm, tokens);

    TaskTape tape;
    tape.task = task;
    tape.tokens.assign(tokens.begin(), tokens.end());

    switch (model.config().kind) {
        case ArchKind::SingleLstm: {
            LstmState state = LstmState::zeros(tm.cell.hidden);
            for (std::size_t t = 0; t < inputs.size(); ++t) {
                LstmStepResult r = lstm_step(tm.cell, state, inputs[t]);
                state = std::move(r.next);
                StepTrace trace;
                trace.t = t;
                trace.h = state.h;
                tape.traces.push_back(std::move(trace));
                tape.lstm.push_back(std::move(r.cache));
            }
            tape.h_final = state.h;
            break;
        }
        case ArchKind::SingleMeLstm:
        case ArchKind::Arc1: {
            tape.me = encode_sequence(tm.me_params(), tm.memory->initial_state(), inputs);
            tape.traces = tape.me.traces;
            tape.h_final = tape.me.h_final;
            break;
        }
        case ArchKind::Arc2: {
            LstmState state = LstmState::zeros(tm.cell.hidden);
            MemoryState local = tm.memory->initial_state();
            MemoryState global = tm.global_memory->initial_state();
            for (std::size_t t = 0; t < inputs.size(); ++t) {
                Arc2StepResult r = arc2_step(model, task, state, local, global, inputs[t], t);
                state = std::move(r.state);
                local = std::move(r.local);
                global = std::move(r.global);
                tape.traces.push_back(std::move(r.trace));
                tape.arc2.push_back(std::move(r.cache));
            }
            tape.h_final = state.h;
            break;
        }
    }
    return tape;
}

void backward(const Model& model, const TaskTape& tape, std::span<const double> grad_h_final) {
    const TaskModel& tm = model.task(tape.task);
    const std::size_t d = tm.cell.hidden;
    if (grad_h_final.size() != d) throw DimensionError("backward: gradient length does not match hidden size");

    switch (model.config().kind) {
        case ArchKind::SingleLstm: {
            Vector grad_h(grad_h_final.begin(), grad_h_final.end());
            Vector grad_c(d, 0.0);
            for (std::size_t t = tape.lstm.size(); t-- > 0;) {
                LstmStepGrads g = lstm_backward(tm.cell, tape.lstm[t], grad_h, grad_c);
                scatter(tm, tape.tokens[t], g.x);
                grad_h = std::move(g.h_prev);
                grad_c = std::move(g.c_prev);
            }
            break;
        }
        case ArchKind::SingleMeLstm:
        case ArchKind::Arc1: {
            SequenceGrads g = backward_sequence(tm.me_params(), tape.me, grad_h_final);
            for (std::size_t t = 0; t < g.inputs.size(); ++t) scatter(tm, tape.tokens[t], g.inputs[t]);
            add_into(tm.memory->mem_init->grad.values(), g.initial_mem.values());
            break;
        }
        case ArchKind::Arc2: {
            const auto& lc = tm.memory->config;
            const auto& gc = tm.global_memory->config;
            Vector grad_h(grad_h_final.begin(), grad_h_final.end());
            Vector grad_c(d, 0.0);
            Matrix grad_local(lc.segments, lc.segment_size);
            Vector grad_local_key(lc.segment_size, 0.0);
            Matrix grad_global(gc.segments, gc.segment_size);
            for (std::size_t t = tape.arc2.size(); t-- > 0;) {
                Arc2StepGrads g = arc2_backward(tm, tape.arc2[t], grad_h, grad_c, grad_local, grad_local_key,
                                                grad_global);
                scatter(tm, tape.tokens[t], g.x);
                grad_h = std::move(g.h_prev);
                grad_c = std::move(g.c_prev);
                grad_local = std::move(g.local_mem);
                grad_local_key = std::move(g.local_key);
                grad_global = std::move(g.global_mem);
            }
            add_into(tm.memory->mem_init->grad.values(), grad_local.values());
            add_into(tm.global_memory->mem_init->grad.values(), grad_global.values());
            break;
        }
    }
}

}  // namespace melstm
