// SPDX-License-Identifier: Apache-2.0
#include "melstm/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "melstm/errors.hpp"
#include "melstm/head.hpp"

namespace melstm {

void TrainConfig::validate(std::size_t tasks) const {
    if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be positive");
    if (!(l2 >= 0.0)) throw ConfigError("train.l2 must be non-negative");
    if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (eval_every < 1) throw ConfigError("train.eval_every must be >= 1");
    if (!task_weights.empty()) {
        if (task_weights.size() != tasks) throw ConfigError("train.task_weights needs one weight per task");
        for (double w : task_weights) {
            if (!(w >= 0.0)) throw ConfigError("train.task_weights must be non-negative");
        }
    }
}

std::vector<double> TrainConfig::weights(std::size_t tasks) const {
    return task_weights.empty() ? std::vector<double>(tasks, 1.0) : task_weights;
}

double joint_loss(std::span<const double> task_losses, std::span<const double> weights) {
    if (task_losses.size() != weights.size()) {
        throw DimensionError("joint_loss: " + std::to_string(task_losses.size()) + " losses for " +
                             std::to_string(weights.size()) + " weights");
    }
    double phi = 0.0;
    for (std::size_t m = 0; m < weights.size(); ++m) phi += weights[m] * task_losses[m];
    return phi;
}

double l2_penalty(const Model& model, double l2) {
    if (l2 == 0.0) return 0.0;
    double s = 0.0;
    for (const auto& p : model.parameters()) {
        for (double v : p.param->value.values()) s += v * v;
    }
    return 0.5 * l2 * s;
}

namespace {

std::vector<double> batch_losses(const Model& model, std::span<const TaskBatch> batches, std::size_t tasks,
                                 std::span<const double> weights) {
    std::vector<double> losses(tasks, 0.0);
    for (const auto& batch : batches) {
        if (batch.task >= tasks) throw InputError("batch for unknown task");
        if (batch.examples.empty() || weights[batch.task] == 0.0) continue;
        const TaskModel& tm = model.task(batch.task);
        double sum = 0.0;
        for (const Example* ex : batch.examples) {
            TaskTape tape = encode(model, batch.task, ex->tokens);
            sum += cross_entropy(predict(tm.head, tape.h_final), ex->label);
        }
        losses[batch.task] += sum / double(batch.examples.size());
    }
    return losses;
}

}  // namespace

double objective(const Model& model, std::span<const TaskBatch> batches, std::span<const double> weights,
                 double l2) {
    const std::size_t tasks = model.tasks().size();
    if (weights.size() != tasks) throw DimensionError("objective: one weight per task required");
    return joint_loss(batch_losses(model, batches, tasks, weights), weights) + l2_penalty(model, l2);
}

double compute_gradients(Model& model, std::span<const TaskBatch> batches, std::span<const double> weights,
                         double l2, BatchStats* stats) {
    const std::size_t tasks = model.tasks().size();
    if (weights.size() != tasks) throw DimensionError("compute_gradients: one weight per task required");
    model.zero_grads();
    if (stats) {
        stats->loss_sum.assign(tasks, 0.0);
        stats->correct.assign(tasks, 0);
        stats->seen.assign(tasks, 0);
    }

    std::vector<double> losses(tasks, 0.0);
    for (const auto& batch : batches) {
        if (batch.task >= tasks) throw InputError("batch for unknown task");
        if (batch.examples.empty() || weights[batch.task] == 0.0) continue;
        const TaskModel& tm = model.task(batch.task);
        const double scale = weights[batch.task] / double(batch.examples.size());
        double sum = 0.0;
        for (const Example* ex : batch.examples) {
            TaskTape tape = encode(model, batch.task, ex->tokens);
            const Vector pred = predict(tm.head, tape.h_final);
            const double loss = cross_entropy(pred, ex->label);
            sum += loss;
            if (stats) {
                stats->loss_sum[batch.task] += loss;
                stats->correct[batch.task] += argmax(pred) == ex->label ? 1 : 0;
                stats->seen[batch.task] += 1;
            }
            const Vector grad_h = head_backward(tm.head, tape.h_final, pred, ex->label, scale);
            backward(model, tape, grad_h);
        }
        losses[batch.task] += sum / double(batch.examples.size());
    }

    if (l2 != 0.0) {
        for (const auto& p : model.parameters()) {
            auto g = p.param->grad.values();
            auto v = p.param->value.values();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += l2 * v[i];
        }
    }
    return joint_loss(losses, weights) + l2_penalty(model, l2);
}

double clip_gradients(Model& model, double max_norm) {
    double sq = 0.0;
    for (const auto& p : model.parameters()) {
        for (double g : p.param->grad.values()) sq += g * g;
    }
    const double total = std::sqrt(sq);
    if (max_norm > 0.0 && total > max_norm) {
        const double scale = max_norm / total;
        for (const auto& p : model.parameters()) {
            for (double& g : p.param->grad.values()) g *= scale;
        }
    }
    return total;
}

void adagrad_update(GradSlot& slot, double lr) {
    auto v = slot.value.values();
    auto g = slot.grad.values();
    auto a = slot.accum.values();
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (g[i] == 0.0) continue;
        a[i] += g[i] * g[i];
        v[i] -= lr * g[i] / (std::sqrt(a[i]) + kAdagradEpsilon);
        g[i] = 0.0;
    }
}

void apply_adagrad(Model& model, double lr) {
    for (const auto& p : model.parameters()) adagrad_update(*p.param, lr);
}

EvalResult evaluate(const Model& model, std::size_t task, const Corpus& split) {
    const TaskModel& tm = model.task(task);
    EvalResult r;
    r.class_total.assign(tm.head.classes(), 0);
    r.class_correct.assign(tm.head.classes(), 0);
    for (const auto& ex : split.examples) {
        TaskTape tape = encode(model, task, ex.tokens);
        const Vector pred = predict(tm.head, tape.h_final);
        r.loss += cross_entropy(pred, ex.label);
        const bool ok = argmax(pred) == ex.label;
        r.correct += ok ? 1 : 0;
        r.class_total.at(ex.label) += 1;
        r.class_correct[ex.label] += ok ? 1 : 0;
        r.total += 1;
    }
    if (r.total > 0) {
        r.accuracy = double(r.correct) / double(r.total);
        r.loss /= double(r.total);
    }
    return r;
}

std::string to_json_line(const MetricRecord& record) {
    nlohmann::ordered_json j;
    j["epoch"] = record.epoch;
    j["task"] = record.task;
    j["split"] = record.split;
    j["loss"] = record.loss;
    j["accuracy"] = record.accuracy;
    j["wall_ms"] = record.wall_ms;
    return j.dump();
}

namespace {

struct Snapshot {
    std::vector<Matrix> values;
    std::vector<Matrix> accums;
};

Snapshot take_snapshot(const Model& model) {
    Snapshot s;
    for (const auto& p : model.parameters()) {
        s.values.push_back(p.param->value);
        s.accums.push_back(p.param->accum);
    }
    return s;
}

void restore(Model& model, const Snapshot& s) {
    const auto& params = model.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
        params[i].param->value = s.values[i];
        params[i].param->accum = s.accums[i];
    }
}

}  // namespace

TrainReport train(Model& model, const std::vector<TaskData>& data, const TrainConfig& config, Rng& rng,
                  const TrainOptions& options) {
    const std::size_t tasks = model.tasks().size();
    if (data.size() != tasks) throw ConfigError("train: " + std::to_string(data.size()) + " datasets for " +
                                                std::to_string(tasks) + " tasks");
    config.validate(tasks);
    for (const auto& d : data) {
        if (d.train.empty()) throw ConfigError("train: task '" + d.name + "' has an empty training split");
    }
    const std::vector<double> weights = config.weights(tasks);
    const bool has_dev = std::any_of(data.begin(), data.end(), [](const TaskData& d) { return d.dev.has_value(); });

    std::size_t steps_per_epoch = 0;
    for (const auto& d : data) {
        steps_per_epoch = std::max(steps_per_epoch, (d.train.size() + config.batch_size - 1) / config.batch_size);
    }

    TrainReport report;
    auto emit = [&](MetricRecord rec) {
        if (options.on_record) options.on_record(rec);
        report.records.push_back(std::move(rec));
    };

    std::optional<Snapshot> best;
    std::size_t since_best = 0;
    using Clock = std::chrono::steady_clock;

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto start = Clock::now();
        std::vector<std::vector<std::size_t>> order(tasks);
        for (std::size_t m = 0; m < tasks; ++m) {
            order[m].resize(data[m].train.size());
            std::iota(order[m].begin(), order[m].end(), 0);
            rng.shuffle(order[m]);
        }

        std::vector<double> loss_sum(tasks, 0.0);
        std::vector<std::size_t> correct(tasks, 0), seen(tasks, 0);
        for (std::size_t step = 0; step < steps_per_epoch; ++step) {
            std::vector<TaskBatch> batches(tasks);
            for (std::size_t m = 0; m < tasks; ++m) {
                batches[m].task = m;
                const auto& ex = data[m].train.examples;
                for (std::size_t b = 0; b < config.batch_size && b < ex.size(); ++b) {
                    const std::size_t pos = (step * config.batch_size + b) % ex.size();
                    batches[m].examples.push_back(&ex[order[m][pos]]);
                }
            }
            BatchStats stats;
            const double phi = compute_gradients(model, batches, weights, config.l2, &stats);
            if (!std::isfinite(phi)) {
                throw NumericError("training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                                   ", step " + std::to_string(step + 1));
            }
            clip_gradients(model, config.clip_norm);
            apply_adagrad(model, config.learning_rate);
            ++report.steps;
            for (std::size_t m = 0; m < tasks; ++m) {
                loss_sum[m] += stats.loss_sum[m];
                correct[m] += stats.correct[m];
                seen[m] += stats.seen[m];
            }
        }
        report.epochs_run = epoch;

        const bool eval_now = epoch % config.eval_every == 0 || epoch == config.epochs;
        std::vector<std::optional<EvalResult>> dev(tasks);
        if (eval_now) {
            for (std::size_t m = 0; m < tasks; ++m) {
                if (data[m].dev) dev[m] = evaluate(model, m, *data[m].dev);
            }
        }
        const auto wall = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count();
        const std::int64_t wall_ms = options.record_wall_time ? static_cast<std::int64_t>(wall) : 0;

        for (std::size_t m = 0; m < tasks; ++m) {
            const double n = seen[m] > 0 ? double(seen[m]) : 1.0;
            emit({epoch, data[m].name, "train", loss_sum[m] / n, double(correct[m]) / n, wall_ms});
            if (dev[m]) emit({epoch, data[m].name, "dev", dev[m]->loss, dev[m]->accuracy, wall_ms});
        }

        if (has_dev && eval_now) {
            double mean = 0.0;
            std::size_t count = 0;
            for (const auto& r : dev) {
                if (r) {
                    mean += r->accuracy;
                    ++count;
                }
            }
            mean /= double(count);
            if (!report.best_epoch || mean > report.best_dev_accuracy) {
                report.best_epoch = epoch;
                report.best_dev_accuracy = mean;
                best = take_snapshot(model);
                since_best = 0;
            } else {
                since_best += config.eval_every;
                if (since_best >= config.patience) break;
            }
        }
    }
    if (best) restore(model, *best);
    return report;
}

}  // namespace melstm
