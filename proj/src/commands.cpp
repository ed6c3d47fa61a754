// SPDX-License-Identifier: Apache-2.0
#include "melstm/commands.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "melstm/checkpoint.hpp"
#include "melstm/config.hpp"
#include "melstm/errors.hpp"
#include "melstm/trainer.hpp"

namespace melstm {

namespace fs = std::filesystem;

namespace {

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw InputError("cannot create directory " + dir + ": " + ec.message());
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw InputError("cannot write " + path);
    return f;
}

std::size_t resolve_task(const std::vector<std::string>& names, const std::string& task) {
    if (task.empty()) {
        if (names.size() == 1) return 0;
        throw ConfigError("--task: required for a model with " + std::to_string(names.size()) + " tasks");
    }
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == task) return i;
    }
    throw ConfigError("--task: unknown task '" + task + "'");
}

Json eval_json(const std::string& task, const std::string& split, const EvalResult& r) {
    Json j;
    j["task"] = task;
    j["split"] = split;
    j["accuracy"] = r.accuracy;
    j["loss"] = r.loss;
    j["correct"] = r.correct;
    j["total"] = r.total;
    return j;
}

Json matrix_json(const std::vector<Vector>& rows) {
    Json j = Json::array();
    for (const auto& r : rows) j.push_back(r);
    return j;
}

}  // namespace

int guarded(const std::function<int()>& body, std::ostream& err) {
    try {
        return body();
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}

int cmd_train(const GlobalOptions& opts, std::ostream& out, std::ostream& err) {
    return guarded(
        [&] {
            if (opts.config.empty()) throw ConfigError("--config: required");
            RunConfig rc = load_run_config(opts.config);
            if (opts.seed) {
                rc.seed = *opts.seed;
                rc.train.seed = *opts.seed;
            }
            if (!opts.out.empty()) rc.output_dir = opts.out;
            PreparedRun run = prepare_run(rc);

            Rng rng(run.config.train.seed);
            Model model = Model::build(run.config.architecture, rng);
            if (run.embeddings) apply_embeddings(model, *run.embeddings);

            ensure_dir(run.config.output_dir);
            const std::string metrics_path = (fs::path(run.config.output_dir) / "metrics.jsonl").string();
            std::ofstream metrics = open_out(metrics_path);
            TrainOptions options;
            options.record_wall_time = run.config.log_wall_time;
            options.on_record = [&](const MetricRecord& r) { metrics << to_json_line(r) << "\n" << std::flush; };

            TrainReport report = train(model, run.data, run.config.train, rng, options);

            const std::size_t final_epoch = report.best_epoch.value_or(report.epochs_run);
            std::vector<std::string> names;
            for (std::size_t m = 0; m < run.data.size(); ++m) {
                names.push_back(run.data[m].name);
                if (!run.data[m].test) continue;
                EvalResult r = evaluate(model, m, *run.data[m].test);
                MetricRecord rec{final_epoch, run.data[m].name, "test", r.loss, r.accuracy, 0};
                metrics << to_json_line(rec) << "\n";
                out << run.data[m].name << " test accuracy " << std::fixed << std::setprecision(4) << r.accuracy
                    << "\n";
            }
            const std::string ckpt_path = (fs::path(run.config.output_dir) / "model.ckpt").string();
            save_checkpoint(ckpt_path, capture(model, run.vocab, run.config.train, names, rng, report.steps));
            out << "epochs " << report.epochs_run << ", steps " << report.steps << ", checkpoint " << ckpt_path
                << "\n";
            return kExitOk;
        },
        err);
}

int cmd_eval(const GlobalOptions& opts, const EvalOptions& eval, std::ostream& out, std::ostream& err) {
    return guarded(
        [&] {
            if (eval.checkpoint.empty()) throw ConfigError("--checkpoint: required");
            const Checkpoint ckpt = load_checkpoint(eval.checkpoint);
            const Model model = restore_model(ckpt);
            if (!eval.input.empty()) {
                const std::size_t task = resolve_task(ckpt.task_names, eval.task);
                Vocabulary vocab = ckpt.vocab;
                const Corpus corpus = load_corpus(eval.input, vocab, false);
                out << eval_json(ckpt.task_names[task], eval.input, evaluate(model, task, corpus)).dump() << "\n";
                return kExitOk;
            }
            if (opts.config.empty()) throw ConfigError("--config or --input: one is required");
            if (eval.split != "train" && eval.split != "dev" && eval.split != "test") {
                throw ConfigError("--split: expected train, dev or test");
            }
            RunConfig rc = load_run_config(opts.config);
            if (opts.seed) rc.seed = *opts.seed;
            const PreparedRun run = prepare_run(rc);
            require_vocabulary(ckpt, run.vocab);
            if (run.data.size() != ckpt.task_names.size()) {
                throw VersionError("config has " + std::to_string(run.data.size()) + " tasks, checkpoint " +
                                   std::to_string(ckpt.task_names.size()));
            }
            for (std::size_t m = 0; m < run.data.size(); ++m) {
                const TaskData& td = run.data[m];
                const Corpus* split = eval.split == "train" ? &td.train
                                      : eval.split == "dev"  ? (td.dev ? &*td.dev : nullptr)
                                                             : (td.test ? &*td.test : nullptr);
                if (!split || split->empty()) continue;
                out << eval_json(td.name, eval.split, evaluate(model, m, *split)).dump() << "\n";
            }
            return kExitOk;
        },
        err);
}

int cmd_gradcheck(ArchKind kind, const GradCheckDims& dims, std::uint64_t seed, std::ostream& out) {
    const GradCheckReport report = run_gradcheck(kind, dims, seed);
    out << "architecture " << to_string(kind) << ", tasks " << report.tasks << ", seed " << seed << "\n";
    for (const auto& t : report.tensors) {
        out << std::left << std::setw(36) << t.name << std::right << std::setw(8) << t.coordinates << "  "
            << std::scientific << std::setprecision(3) << t.max_relative_error << (t.max_relative_error < 1e-4 ? "" : "  FAIL")
            << "\n";
    }
    out << "max " << std::scientific << std::setprecision(3) << report.max_error() << " "
        << (report.passed() ? "PASS" : "FAIL") << "\n";
    return report.passed() ? kExitOk : kExitFailure;
}

TraceRecord trace_example(const Model& model, std::size_t task, const Example& example, const Vocabulary& vocab,
                          std::size_t example_id) {
    const TaskTape tape = encode(model, task, example.tokens);
    const ClassifierHead& head = model.task(task).head;
    TraceRecord r;
    r.example_id = example_id;
    for (std::size_t id : example.tokens) r.tokens.push_back(vocab.token(id));
    for (const auto& st : tape.traces) {
        r.probs.push_back(predict(head, st.h));
        r.gate.push_back(st.gate);
        r.alpha.push_back(st.alpha);
        if (model.config().kind == ArchKind::Arc2) {
            r.gate_shared.push_back(st.gate_shared);
            r.alpha_shared.push_back(st.alpha_shared);
        }
    }
    return r;
}

std::string to_json_line(const TraceRecord& record) {
    Json j;
    j["example_id"] = record.example_id;
    j["tokens"] = record.tokens;
    j["probs"] = matrix_json(record.probs);
    j["gate"] = matrix_json(record.gate);
    if (!record.gate_shared.empty()) j["gate_shared"] = matrix_json(record.gate_shared);
    j["alpha"] = matrix_json(record.alpha);
    if (!record.alpha_shared.empty()) j["alpha_shared"] = matrix_json(record.alpha_shared);
    return j.dump();
}

int cmd_trace(const TraceOptions& trace, std::ostream& out, std::ostream& err) {
    return guarded(
        [&] {
            if (trace.checkpoint.empty()) throw ConfigError("--checkpoint: required");
            if (trace.input.empty()) throw ConfigError("--input: required");
            if (trace.output.empty()) throw ConfigError("--out: required");
            const Checkpoint ckpt = load_checkpoint(trace.checkpoint);
            const Model model = restore_model(ckpt);
            const std::size_t task = resolve_task(ckpt.task_names, trace.task);
            Vocabulary vocab = ckpt.vocab;
            const Corpus corpus = load_corpus(trace.input, vocab, false);
            std::ofstream f = open_out(trace.output);
            for (std::size_t i = 0; i < corpus.size(); ++i) {
                f << to_json_line(trace_example(model, task, corpus.examples[i], vocab, i)) << "\n";
            }
            out << "traced " << corpus.size() << " examples to " << trace.output << "\n";
            return kExitOk;
        },
        err);
}

std::vector<BenchResult> run_bench(const BenchOptions& options) {
    SynthSpec spec;
    spec.tasks = options.tasks;
    spec.size = options.examples;
    spec.seed = options.seed;
    const SynthData synth = synth_tasks(spec);
    std::vector<TaskData> data;
    for (const auto& c : synth.tasks) data.push_back({c.task, c, std::nullopt, std::nullopt});

    TrainConfig tc;
    tc.epochs = 1;
    tc.seed = options.seed;

    std::vector<BenchResult> results;
    for (ArchKind kind : options.kinds) {
        ArchitectureConfig cfg;
        cfg.kind = kind;
        cfg.classes.assign(options.tasks, 2);
        cfg.vocab_size = synth.vocab.size();
        cfg.embedding_dim = options.embedding_dim;
        cfg.hidden = options.hidden;
        cfg.memory = options.memory;
        cfg.local_memory = options.memory;
        Rng rng(options.seed);
        Model model = Model::build(cfg, rng, true);

        BenchResult r;
        r.kind = kind;
        train(model, data, tc, rng);  // warm-up
        for (std::size_t e = 0; e < options.epochs; ++e) {
            const auto start = std::chrono::steady_clock::now();
            train(model, data, tc, rng);
            r.epoch_ms.push_back(
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());
        }
        for (double ms : r.epoch_ms) r.mean_ms += ms;
        if (!r.epoch_ms.empty()) r.mean_ms /= double(r.epoch_ms.size());
        results.push_back(std::move(r));
    }
    return results;
}

int cmd_bench(const BenchOptions& options, std::ostream& out) {
    const auto results = run_bench(options);
    double baseline = 0.0;
    for (const auto& r : results) {
        if (r.kind == ArchKind::SingleLstm) baseline = r.mean_ms;
    }
    for (const auto& r : results) {
        Json j;
        j["architecture"] = to_string(r.kind);
        j["hidden"] = options.hidden;
        j["segments"] = options.memory.segments;
        j["segment_size"] = options.memory.segment_size;
        j["examples_per_task"] = options.examples;
        j["epoch_ms"] = r.epoch_ms;
        j["mean_epoch_ms"] = r.mean_ms;
        if (baseline > 0.0) j["ratio_to_single_lstm"] = r.mean_ms / baseline;
        out << j.dump() << "\n";
    }
    return kExitOk;
}

int cmd_synth(const SynthSpec& spec, const std::string& out_dir, std::ostream& out) {
    const SynthData data = synth_tasks(spec);
    ensure_dir(out_dir);
    for (const auto& corpus : data.tasks) {
        const std::string path = (fs::path(out_dir) / (corpus.task + ".txt")).string();
        save_corpus(path, corpus, data.vocab);
        out << corpus.task << ": " << corpus.size() << " examples -> " << path << "\n";
    }
    std::ofstream spec_file = open_out((fs::path(out_dir) / "synth.json").string());
    spec_file << to_json(spec).dump(2) << "\n";
    return kExitOk;
}

}  // namespace melstm
