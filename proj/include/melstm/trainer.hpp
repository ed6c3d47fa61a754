// SPDX-License-Identifier: Apache-2.0
//
// Joint objective φ = Σ_m λ_m L_m + (l2/2)·Σ‖θ‖², where L_m is the mean
// cross-entropy of task m's mini-batch, minimised with Adagrad.
//
// One joint step visits the tasks round-robin by index, one mini-batch each,
// accumulates all gradients, clips them to a global norm and applies one
// Adagrad update to every parameter. An epoch is as many joint steps as the
// largest task needs to cover its training split; smaller tasks wrap around
// their own shuffled order.
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "melstm/data_io.hpp"
#include "melstm/multitask.hpp"
#include "melstm/numerics.hpp"

namespace melstm {

inline constexpr double kAdagradEpsilon = 1e-6;

struct TrainConfig {
    double learning_rate = 0.01;
    double l2 = 0.0;
    std::size_t batch_size = 16;
    std::vector<double> task_weights;  // empty means 1 for every task
    std::size_t epochs = 20;
    std::uint64_t seed = 1;
    double clip_norm = 5.0;  // <= 0 disables clipping
    std::size_t patience = 10;
    std::size_t eval_every = 1;

    void validate(std::size_t tasks) const;
    std::vector<double> weights(std::size_t tasks) const;
};

struct TaskBatch {
    std::size_t task = 0;
    std::vector<const Example*> examples;
};

double joint_loss(std::span<const double> task_losses, std::span<const double> weights);
double l2_penalty(const Model& model, double l2);

/// φ for the given batches, forward only.
double objective(const Model& model, std::span<const TaskBatch> batches, std::span<const double> weights,
                 double l2);

struct BatchStats {
    std::vector<double> loss_sum;  // per task, summed over examples
    std::vector<std::size_t> correct;
    std::vector<std::size_t> seen;
};

/// Zeroes all gradients, then accumulates ∂φ/∂θ. Returns φ.
double compute_gradients(Model& model, std::span<const TaskBatch> batches, std::span<const double> weights,
                         double l2, BatchStats* stats = nullptr);

/// Scales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before scaling.
double clip_gradients(Model& model, double max_norm);

/// accum += g²; θ -= lr·g / (√accum + 1e-6); g = 0.
void adagrad_update(GradSlot& slot, double lr);
void apply_adagrad(Model& model, double lr);

struct EvalResult {
    double accuracy = 0.0;
    double loss = 0.0;
    std::size_t correct = 0;
    std::size_t total = 0;
    std::vector<std::size_t> class_total;
    std::vector<std::size_t> class_correct;
};

EvalResult evaluate(const Model& model, std::size_t task, const Corpus& split);

struct TaskData {
    std::string name;
    Corpus train;
    std::optional<Corpus> dev;
    std::optional<Corpus> test;
};

struct MetricRecord {
    std::size_t epoch = 0;
    std::string task;
    std::string split;
    double loss = 0.0;
    double accuracy = 0.0;
    std::int64_t wall_ms = 0;
};

/// One JSON object, keys {epoch, task, split, loss, accuracy, wall_ms}.
std::string to_json_line(const MetricRecord& record);

struct TrainReport {
    std::vector<MetricRecord> records;
    std::size_t epochs_run = 0;
    std::size_t steps = 0;
    std::optional<std::size_t> best_epoch;
    double best_dev_accuracy = 0.0;
};

struct TrainOptions {
    std::function<void(const MetricRecord&)> on_record;
    bool record_wall_time = false;
};

/// Trains in place. `rng` drives the per-epoch shuffles. With dev splits,
/// training stops after `patience` epochs without a gain in mean dev
/// accuracy and the best parameters are restored. Throws NumericError if
/// the loss becomes non-finite.
TrainReport train(Model& model, const std::vector<TaskData>& data, const TrainConfig& config, Rng& rng,
                  const TrainOptions& options = {});

}  // namespace melstm
