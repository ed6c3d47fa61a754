// SPDX-License-Identifier: Apache-2.0
#include "melstm/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "melstm/trainer.hpp"

namespace melstm {

double GradCheckReport::max_error() const {
    double worst = 0.0;
    for (const auto& t : tensors) worst = std::max(worst, t.max_relative_error);
    return worst;
}

GradCheckReport run_gradcheck(ArchKind kind, const GradCheckDims& dims, std::uint64_t seed, double epsilon) {
    const bool multi = kind == ArchKind::Arc1 || kind == ArchKind::Arc2;
    const std::size_t tasks = multi ? 2 : 1;

    ArchitectureConfig cfg;
    cfg.kind = kind;
    cfg.classes.assign(tasks, dims.classes);
    cfg.vocab_size = dims.vocab;
    cfg.embedding_dim = dims.embedding;
    cfg.hidden = dims.hidden;
    cfg.memory = {dims.segments, dims.segment_size, dims.align};
    cfg.local_memory = {dims.segments, dims.segment_size, dims.align};
    cfg.init_half_width = dims.init_half_width;

    Rng rng(seed);
    Model model = Model::build(cfg, rng);

    // Two sequences per task so the batch mean is exercised too.
    std::vector<Example> examples;
    for (std::size_t m = 0; m < tasks; ++m) {
        for (std::size_t n = 0; n < 2; ++n) {
            Example ex;
            ex.label = static_cast<std::size_t>(rng.below(dims.classes));
            for (std::size_t t = 0; t < dims.length; ++t) ex.tokens.push_back(rng.below(dims.vocab));
            examples.push_back(std::move(ex));
        }
    }
    std::vector<TaskBatch> batches(tasks);
    for (std::size_t m = 0; m < tasks; ++m) {
        batches[m].task = m;
        batches[m].examples = {&examples[2 * m], &examples[2 * m + 1]};
    }
    std::vector<double> weights(tasks, 1.0);
    if (tasks > 1) weights[1] = 0.7;

    compute_gradients(model, batches, weights, dims.l2);

    std::vector<Matrix*> values;
    for (const auto& p : model.parameters()) values.push_back(&p.param->value);
    const auto numeric =
        finite_diff_grad([&] { return objective(model, batches, weights, dims.l2); }, values, epsilon);

    GradCheckReport report;
    report.kind = kind;
    report.tasks = tasks;
    const auto& params = model.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
        TensorCheck check{params[i].name, params[i].param->value.size()};
        const auto a = params[i].param->grad.values();
        const auto n = numeric[i].values();
        for (std::size_t j = 0; j < a.size(); ++j) {
            const double err = std::abs(a[j] - n[j]) / std::max({std::abs(a[j]), std::abs(n[j]), 1e-8});
            if (err > check.max_relative_error || j == 0) {
                check.max_relative_error = err;
                check.worst_index = j;
                check.analytic = a[j];
                check.numeric = n[j];
            }
        }
        report.tensors.push_back(std::move(check));
    }
    return report;
}

}  // namespace melstm
