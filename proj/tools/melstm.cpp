// SPDX-License-Identifier: Apache-2.0
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "melstm/commands.hpp"

using namespace melstm;

int main(int argc, char** argv) {
    CLI::App app{"Memory-enhanced LSTM multi-task trainer"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions global;
    std::uint64_t seed = 0;
    app.add_option("--config", global.config, "Run configuration (JSON)");
    auto* seed_opt = app.add_option("--seed", seed, "Override the configured seed");
    app.add_option("--out", global.out, "Output directory or file");

    auto* train = app.add_subcommand("train", "Train and write metrics.jsonl and model.ckpt");

    EvalOptions eval;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
    eval_cmd->add_option("--checkpoint", eval.checkpoint)->required();
    eval_cmd->add_option("--input", eval.input, "Corpus file; default is the config's splits");
    eval_cmd->add_option("--task", eval.task);
    eval_cmd->add_option("--split", eval.split)->check(CLI::IsMember({"train", "dev", "test"}));

    const std::map<std::string, ArchKind> kinds{{"single-lstm", ArchKind::SingleLstm},
                                                {"single-me-lstm", ArchKind::SingleMeLstm},
                                                {"arc1", ArchKind::Arc1},
                                                {"arc2", ArchKind::Arc2}};
    const std::map<std::string, Align> aligns{{"cosine", Align::Cosine}, {"additive", Align::Additive}};

    ArchKind gc_kind = ArchKind::Arc1;
    GradCheckDims dims;
    auto* gradcheck = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
    gradcheck->add_option("--arch", gc_kind)->required()->transform(CLI::CheckedTransformer(kinds));
    gradcheck->add_option("--hidden", dims.hidden)->check(CLI::Range(1, 8));
    gradcheck->add_option("--segments", dims.segments)->check(CLI::Range(1, 8));
    gradcheck->add_option("--segment-size", dims.segment_size)->check(CLI::Range(1, 8));
    gradcheck->add_option("--embedding", dims.embedding)->check(CLI::Range(1, 8));
    gradcheck->add_option("--length", dims.length)->check(CLI::Range(1, 8));
    gradcheck->add_option("--classes", dims.classes)->check(CLI::Range(2, 8));
    gradcheck->add_option("--align", dims.align)->transform(CLI::CheckedTransformer(aligns));

    TraceOptions trace;
    auto* trace_cmd = app.add_subcommand("trace", "Write per-step probabilities, gates and attention");
    trace_cmd->add_option("--checkpoint", trace.checkpoint)->required();
    trace_cmd->add_option("--input", trace.input)->required();
    trace_cmd->add_option("--task", trace.task);

    BenchOptions bench;
    auto* bench_cmd = app.add_subcommand("bench", "Time one epoch of every architecture");
    bench_cmd->add_option("--hidden", bench.hidden);
    bench_cmd->add_option("--embedding", bench.embedding_dim);
    bench_cmd->add_option("--segments", bench.memory.segments);
    bench_cmd->add_option("--segment-size", bench.memory.segment_size);
    bench_cmd->add_option("--examples", bench.examples, "Examples per task");
    bench_cmd->add_option("--epochs", bench.epochs, "Timed epochs after one warm-up");

    SynthSpec spec;
    auto* synth = app.add_subcommand("synth", "Generate related synthetic tasks");
    synth->add_option("--tasks", spec.tasks);
    synth->add_option("--strength", spec.strength)->check(CLI::Range(0.0, 1.0));
    synth->add_option("--vocab", spec.vocab_size);
    synth->add_option("--min-length", spec.min_length);
    synth->add_option("--max-length", spec.max_length);
    synth->add_option("--size", spec.size, "Examples per task");
    synth->add_option("--informative", spec.informative);
    synth->add_option("--patterns", spec.patterns);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }
    if (*seed_opt) global.seed = seed;

    if (*train) return cmd_train(global, std::cout, std::cerr);
    if (*eval_cmd) return cmd_eval(global, eval, std::cout, std::cerr);
    if (*gradcheck) {
        return guarded([&] { return cmd_gradcheck(gc_kind, dims, global.seed.value_or(1), std::cout); }, std::cerr);
    }
    if (*trace_cmd) {
        trace.output = global.out;
        return cmd_trace(trace, std::cout, std::cerr);
    }
    if (*bench_cmd) {
        if (global.seed) bench.seed = *global.seed;
        return guarded([&] { return cmd_bench(bench, std::cout); }, std::cerr);
    }
    if (*synth) {
        if (global.seed) spec.seed = *global.seed;
        if (global.out.empty()) {
            std::cerr << "config error: --out: required\n";
            return kExitConfig;
        }
        return guarded(
            [&] {
                spec.validate();
                return cmd_synth(spec, global.out, std::cout);
            },
            std::cerr);
    }
    return kExitConfig;
}
