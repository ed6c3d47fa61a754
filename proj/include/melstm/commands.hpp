// SPDX-License-Identifier: Apache-2.0
//
// Subcommands of the `melstm` tool, callable in-process. Each returns the
// process exit code: 0 success, 1 runtime failure, 2 configuration error.
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "melstm/data_io.hpp"
#include "melstm/gradcheck.hpp"
#include "melstm/multitask.hpp"
#include "melstm/synth.hpp"

namespace melstm {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;

struct GlobalOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
};

/// Runs `body`, mapping ConfigError to 2 and any other exception to 1 with
/// the message on `err`.
int guarded(const std::function<int()>& body, std::ostream& err);

/// Writes <out>/metrics.jsonl and <out>/model.ckpt. Test-split results are
/// appended to the metrics log after training.
int cmd_train(const GlobalOptions& opts, std::ostream& out, std::ostream& err);

struct EvalOptions {
    std::string checkpoint;
    std::string input;  // corpus file; otherwise the config's splits
    std::string task;   // name, required with `input` when the model has several tasks
    std::string split = "test";
};

/// One JSON line per evaluated task: {task, split, accuracy, loss, correct, total}.
int cmd_eval(const GlobalOptions& opts, const EvalOptions& eval, std::ostream& out, std::ostream& err);

/// Prints the max relative error per tensor; 0 iff all are below 1e-4.
int cmd_gradcheck(ArchKind kind, const GradCheckDims& dims, std::uint64_t seed, std::ostream& out);

struct TraceRecord {
    std::size_t example_id = 0;
    std::vector<std::string> tokens;
    std::vector<Vector> probs;  // head applied to h_t at every step
    std::vector<Vector> gate;
    std::vector<Vector> gate_shared;  // arc2 only
    std::vector<Vector> alpha;
    std::vector<Vector> alpha_shared;  // arc2 only
};

TraceRecord trace_example(const Model& model, std::size_t task, const Example& example, const Vocabulary& vocab,
                          std::size_t example_id);
/// {example_id, tokens, probs, gate, gate_shared?, alpha, alpha_shared?}
std::string to_json_line(const TraceRecord& record);

struct TraceOptions {
    std::string checkpoint;
    std::string input;
    std::string output;
    std::string task;
};

int cmd_trace(const TraceOptions& trace, std::ostream& out, std::ostream& err);

struct BenchOptions {
    std::size_t hidden = 100;
    std::size_t embedding_dim = 100;
    MemoryConfig memory{50, 20, Align::Cosine};
    std::size_t tasks = 2;
    std::size_t examples = 64;  // per task
    std::size_t epochs = 3;     // timed, after one warm-up epoch
    std::uint64_t seed = 1;
    std::vector<ArchKind> kinds{ArchKind::SingleLstm, ArchKind::SingleMeLstm, ArchKind::Arc1, ArchKind::Arc2};
};

struct BenchResult {
    ArchKind kind = ArchKind::SingleLstm;
    std::vector<double> epoch_ms;
    double mean_ms = 0.0;
};

/// Trains every kind on the same synthetic data with identical dimensions
/// and steps, timing each epoch.
std::vector<BenchResult> run_bench(const BenchOptions& options);

int cmd_bench(const BenchOptions& options, std::ostream& out);

/// Writes <out>/<task>.txt per task and <out>/synth.json with the spec.
int cmd_synth(const SynthSpec& spec, const std::string& out_dir, std::ostream& out);

}  // namespace melstm
