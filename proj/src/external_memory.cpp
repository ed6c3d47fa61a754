// SPDX-License-Identifier: Apache-2.0
#include "melstm/external_memory.hpp"

#include <algorithm>
#include <cmath>

#include "melstm/errors.hpp"

namespace melstm {

std::string to_string(Align align) { return align == Align::Cosine ? "cosine" : "additive"; }

Align parse_align(const std::string& name) {
    if (name == "cosine") return Align::Cosine;
    if (name == "additive") return Align::Additive;
    throw ConfigError("unknown alignment '" + name + "' (expected cosine or additive)");
}

void MemoryConfig::validate() const {
    if (segments < 1) throw ConfigError("memory: segments must be >= 1");
    if (segment_size < 1) throw ConfigError("memory: segment_size must be >= 1");
}

MemoryInterfaceParams MemoryInterfaceParams::create(const MemoryConfig& config, std::size_t input,
                                                    Rng& rng, double half_width) {
    config.validate();
    const std::size_t m = config.segment_size;
    MemoryInterfaceParams p;
    p.config = config;
    p.input = input;
    p.emit_weight = make_param(init_uniform(rng, 3 * m, input, half_width));
    p.emit_bias = make_param(init_uniform(rng, 3 * m, 1, half_width));
    if (config.align == Align::Additive) {
        p.align_v = make_param(init_uniform(rng, m, 1, half_width));
        p.align_w = make_param(init_uniform(rng, m, 2 * m, half_width));
    }
    p.mem_init = make_param(init_uniform(rng, config.segments, m, half_width));
    return p;
}

MemoryState MemoryInterfaceParams::initial_state() const {
    return {mem_init->value, Vector(config.segment_size, 0.0)};
}

MemoryKeys emit_keys(const MemoryInterfaceParams& params, std::span<const double> source) {
    if (source.size() != params.input) {
        throw DimensionError("emit_keys: source length " + std::to_string(source.size()) +
                             ", expected " + std::to_string(params.input));
    }
    const std::size_t m = params.config.segment_size;
    Vector pre = matvec(params.emit_weight->value, source);
    add_into(pre, params.emit_bias->value.values());
    MemoryKeys keys{Vector(m), Vector(m), Vector(m)};
    for (std::size_t j = 0; j < m; ++j) {
        keys.key[j] = std::tanh(pre[j]);
        keys.erase[j] = sigmoid(pre[m + j]);
        keys.add[j] = std::tanh(pre[2 * m + j]);
    }
    return keys;
}

Vector emit_keys_backward(const MemoryInterfaceParams& params, std::span<const double> source,
                          const MemoryKeys& keys, std::span<const double> grad_key,
                          std::span<const double> grad_erase, std::span<const double> grad_add) {
    const std::size_t m = params.config.segment_size;
    Vector grad_pre(3 * m);
    for (std::size_t j = 0; j < m; ++j) {
        grad_pre[j] = grad_key[j] * (1.0 - keys.key[j] * keys.key[j]);
        grad_pre[m + j] = grad_erase[j] * keys.erase[j] * (1.0 - keys.erase[j]);
        grad_pre[2 * m + j] = grad_add[j] * (1.0 - keys.add[j] * keys.add[j]);
    }
    add_outer(params.emit_weight->grad, grad_pre, source);
    add_into(params.emit_bias->grad.values(), grad_pre);
    return matvec_t(params.emit_weight->value, grad_pre);
}

namespace {

double cosine(std::span<const double> x, std::span<const double> y) {
    return dot(x, y) / std::max(norm(x) * norm(y), kCosineEpsilon);
}

// Accumulates d cos(x, y) / dx scaled by `upstream` into grad_x.
void cosine_grad_wrt(std::span<const double> x, std::span<const double> y, double upstream,
                     std::span<double> grad_x) {
    const double nx = norm(x), ny = norm(y);
    const double denom = std::max(nx * ny, kCosineEpsilon);
    const double s = dot(x, y);
    // Below the guard the score is linear in x.
    const double radial = nx * ny > kCosineEpsilon ? s * ny / (denom * denom * nx) : 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        grad_x[j] += upstream * (y[j] / denom - radial * x[j]);
    }
}

Vector concat(std::span<const double> a, std::span<const double> b) {
    Vector v(a.begin(), a.end());
    v.insert(v.end(), b.begin(), b.end());
    return v;
}

}  // namespace

double align_score(const MemoryInterfaceParams& params, std::span<const double> mem_row,
                   std::span<const double> key) {
    const std::size_t m = params.config.segment_size;
    if (mem_row.size() != m || key.size() != m) {
        throw DimensionError("align_score: expected vectors of length " + std::to_string(m));
    }
    if (params.config.align == Align::Cosine) return cosine(mem_row, key);
    Vector hidden = tanh(matvec(params.align_w->value, concat(mem_row, key)));
    return dot(params.align_v->value.values(), hidden);
}

Vector attention(const MemoryInterfaceParams& params, const Matrix& mem, std::span<const double> key,
                 AttentionCache* cache) {
    const auto& cfg = params.config;
    if (mem.rows() != cfg.segments || mem.cols() != cfg.segment_size) {
        throw DimensionError("attention: memory " + mem.shape() + " does not match config " +
                             std::to_string(cfg.segments) + "x" + std::to_string(cfg.segment_size));
    }
    if (key.size() != cfg.segment_size) throw DimensionError("attention: key length mismatch");

    Vector scores(cfg.segments);
    Matrix hidden;
    if (cfg.align == Align::Additive) hidden = Matrix(cfg.segments, cfg.segment_size);
    for (std::size_t k = 0; k < cfg.segments; ++k) {
        if (cfg.align == Align::Cosine) {
            scores[k] = cosine(mem.row(k), key);
        } else {
            Vector u = tanh(matvec(params.align_w->value, concat(mem.row(k), key)));
            std::copy(u.begin(), u.end(), hidden.row(k).begin());
            scores[k] = dot(params.align_v->value.values(), u);
        }
    }
    Vector alpha = softmax(scores);
    if (cache) {
        cache->mem = mem;
        cache->key.assign(key.begin(), key.end());
        cache->alpha = alpha;
        cache->hidden = std::move(hidden);
    }
    return alpha;
}

AttentionGrads attention_backward(const MemoryInterfaceParams& params, const AttentionCache& cache,
                                  std::span<const double> grad_alpha) {
    const auto& cfg = params.config;
    const std::size_t k_count = cfg.segments, m = cfg.segment_size;
    if (cache.alpha.size() != k_count || grad_alpha.size() != k_count) {
        throw ContractError("attention_backward: cache does not match memory config");
    }
    const double mean = dot(cache.alpha, grad_alpha);
    AttentionGrads grads{Matrix(k_count, m), Vector(m, 0.0)};
    for (std::size_t k = 0; k < k_count; ++k) {
        const double grad_score = cache.alpha[k] * (grad_alpha[k] - mean);
        if (grad_score == 0.0) continue;
        auto row = cache.mem.row(k);
        if (cfg.align == Align::Cosine) {
            cosine_grad_wrt(row, cache.key, grad_score, grads.mem.row(k));
            cosine_grad_wrt(cache.key, row, grad_score, grads.key);
        } else {
            auto u = cache.hidden.row(k);
            const auto v = params.align_v->value.values();
            Vector grad_pre(m);
            for (std::size_t j = 0; j < m; ++j) {
                params.align_v->grad.values()[j] += grad_score * u[j];
                grad_pre[j] = grad_score * v[j] * (1.0 - u[j] * u[j]);
            }
            add_outer(params.align_w->grad, grad_pre, concat(row, cache.key));
            Vector grad_in = matvec_t(params.align_w->value, grad_pre);
            auto grad_row = grads.mem.row(k);
            for (std::size_t j = 0; j < m; ++j) {
                grad_row[j] += grad_in[j];
                grads.key[j] += grad_in[m + j];
            }
        }
    }
    return grads;
}

Vector read(const Matrix& mem, std::span<const double> alpha) {
    if (alpha.size() != mem.rows()) {
        throw DimensionError("read: alpha length " + std::to_string(alpha.size()) + " vs memory " +
                             mem.shape());
    }
    double total = 0.0;
    for (double a : alpha) total += a;
    if (std::abs(total - 1.0) > 1e-9) {
        throw ContractError("read: alpha is not a distribution (sum " + std::to_string(total) + ")");
    }
    return matvec_t(mem, alpha);
}

void read_backward(const Matrix& mem, std::span<const double> alpha, std::span<const double> grad_read,
                   Matrix& grad_mem, std::span<double> grad_alpha) {
    add_outer(grad_mem, alpha, grad_read);
    Vector ga = matvec(mem, grad_read);
    add_into(grad_alpha, ga);
}

Matrix write(const Matrix& mem, std::span<const double> alpha, const MemoryKeys& keys) {
    if (alpha.size() != mem.rows() || keys.erase.size() != mem.cols() || keys.add.size() != mem.cols()) {
        throw DimensionError("write: operands do not match memory " + mem.shape());
    }
    Matrix next(mem.rows(), mem.cols());
    for (std::size_t k = 0; k < mem.rows(); ++k) {
        for (std::size_t j = 0; j < mem.cols(); ++j) {
            next(k, j) = mem(k, j) * (1.0 - alpha[k] * keys.erase[j]) + alpha[k] * keys.add[j];
        }
    }
    return next;
}

WriteGrads write_backward(const Matrix& mem, std::span<const double> alpha, const MemoryKeys& keys,
                          const Matrix& grad_mem_next) {
    if (!grad_mem_next.same_shape(mem)) throw DimensionError("write_backward: gradient shape mismatch");
    const std::size_t kc = mem.rows(), m = mem.cols();
    WriteGrads g{Matrix(kc, m), Vector(kc, 0.0), Vector(m, 0.0), Vector(m, 0.0)};
    for (std::size_t k = 0; k < kc; ++k) {
        for (std::size_t j = 0; j < m; ++j) {
            const double up = grad_mem_next(k, j);
            if (up == 0.0) continue;
            g.mem(k, j) = up * (1.0 - alpha[k] * keys.erase[j]);
            g.alpha[k] += up * (keys.add[j] - mem(k, j) * keys.erase[j]);
            g.erase[j] -= up * mem(k, j) * alpha[k];
            g.add[j] += up * alpha[k];
        }
    }
    return g;
}

MemoryReadResult memory_read(const MemoryInterfaceParams& params, const MemoryState& state,
                             MemoryStepCache& cache) {
    cache.owner = params.emit_weight.get();
    MemoryReadResult out;
    out.alpha = attention(params, state.mem, state.prev_key, &cache.attention);
    out.read = read(state.mem, out.alpha);
    cache.read = out.read;
    return out;
}

MemoryState memory_write(const MemoryInterfaceParams& params, std::span<const double> source,
                         MemoryStepCache& cache) {
    if (cache.owner != params.emit_weight.get()) {
        throw ContractError("memory_write: no matching memory_read for these parameters");
    }
    cache.source.assign(source.begin(), source.end());
    cache.keys = emit_keys(params, source);
    MemoryState next;
    next.mem = write(cache.attention.mem, cache.attention.alpha, cache.keys);
    next.prev_key = cache.keys.key;
    return next;
}

namespace {

void check_step_cache(const MemoryInterfaceParams& params, const MemoryStepCache& cache) {
    if (cache.owner != params.emit_weight.get() || cache.keys.key.size() != params.config.segment_size) {
        throw ContractError("memory backward: cache was not produced by these parameters");
    }
}

}  // namespace

MemoryWriteGrads memory_write_backward(const MemoryInterfaceParams& params, const MemoryStepCache& cache,
                                       const Matrix& grad_mem_next, std::span<const double> grad_key_next) {
    check_step_cache(params, cache);
    const auto& att = cache.attention;
    WriteGrads wg = write_backward(att.mem, att.alpha, cache.keys, grad_mem_next);
    MemoryWriteGrads out;
    out.source = emit_keys_backward(params, cache.source, cache.keys, grad_key_next, wg.erase, wg.add);
    out.mem = std::move(wg.mem);
    out.alpha = std::move(wg.alpha);
    return out;
}

MemoryStepGrads memory_read_backward(const MemoryInterfaceParams& params, const MemoryStepCache& cache,
                                     MemoryWriteGrads write_grads, std::span<const double> grad_read) {
    check_step_cache(params, cache);
    const auto& att = cache.attention;
    MemoryStepGrads out;
    out.mem = std::move(write_grads.mem);
    out.source = std::move(write_grads.source);
    read_backward(att.mem, att.alpha, grad_read, out.mem, write_grads.alpha);
    AttentionGrads ag = attention_backward(params, att, write_grads.alpha);
    add_into(out.mem.values(), ag.mem.values());
    out.prev_key = std::move(ag.key);
    return out;
}

MemoryStepGrads memory_backward(const MemoryInterfaceParams& params, const MemoryStepCache& cache,
                                const Matrix& grad_mem_next, std::span<const double> grad_key_next,
                                std::span<const double> grad_read) {
    return memory_read_backward(params, cache,
                                memory_write_backward(params, cache, grad_mem_next, grad_key_next), grad_read);
}

}  // namespace melstm
