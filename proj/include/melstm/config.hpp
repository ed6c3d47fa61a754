// SPDX-License-Identifier: Apache-2.0
//
// Run configuration: one JSON document.
//
//   {
//     "seed": 1,
//     "output_dir": "runs/arc1",
//     "max_length": 400,
//     "embeddings": "glove.100d.txt",          optional
//     "log_wall_time": false,
//     "architecture": { "kind": "arc1", "embedding_dim": 100, "hidden": 100,
//                       "memory": {"segments": 50, "segment_size": 20, "align": "cosine"},
//                       "local_memory": {...}, "share_embeddings": true,
//                       "global_write": true, "init_half_width": 0.1 },
//     "train": { "learning_rate": 0.01, "l2": 0, "batch_size": 16, "epochs": 20,
//                "clip_norm": 5, "patience": 10, "eval_every": 1 },
//     "tasks": [ { "name": "movie", "weight": 1.0,
//                  "train": "a.train", "dev": "a.dev", "test": "a.test" },
//                { "name": "subj", "data": "subj.txt",
//                  "split": {"scheme": "kfold", "folds": 10, "fold": 0} } ],
//     "synth": { "tasks": 2, "strength": 0.8, ... }    instead of "tasks"
//     "split": { "scheme": "fractions", "fractions": [0.7, 0.2, 0.1] }
//   }
//
// Relative paths resolve against the config file's directory. Unknown keys
// are rejected. Every error names the offending field.
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "melstm/data_io.hpp"
#include "melstm/multitask.hpp"
#include "melstm/synth.hpp"
#include "melstm/trainer.hpp"

namespace melstm {

using Json = nlohmann::ordered_json;

struct SplitScheme {
    enum class Kind { Fixed, Fractions, KFold };
    Kind kind = Kind::Fractions;
    double train = 0.7;
    double dev = 0.2;
    double test = 0.1;
    std::size_t folds = 10;
    std::size_t fold = 0;
};

struct TaskSpec {
    std::string name;
    double weight = 1.0;
    // Fixed scheme: separate files. Otherwise `data` is split by `split`.
    std::string train;
    std::string dev;
    std::string test;
    std::string data;
    SplitScheme split;
};

struct RunConfig {
    std::uint64_t seed = 1;
    std::string output_dir = "run";
    std::size_t max_length = 400;
    std::string embeddings;
    bool log_wall_time = false;
    ArchitectureConfig architecture;  // classes and vocab_size are filled in by prepare_run
    TrainConfig train;
    std::vector<TaskSpec> tasks;
    std::optional<SynthSpec> synth;
    SplitScheme synth_split;
};

Json to_json(const MemoryConfig& c);
Json to_json(const ArchitectureConfig& c);
Json to_json(const TrainConfig& c);
Json to_json(const SynthSpec& s);

// `field` prefixes error messages, e.g. "architecture.memory".
MemoryConfig memory_config_from_json(const Json& j, const std::string& field);
ArchitectureConfig architecture_from_json(const Json& j, const std::string& field);
TrainConfig train_config_from_json(const Json& j, const std::string& field);
SynthSpec synth_spec_from_json(const Json& j, const std::string& field);

/// Parses and validates; `base_dir` resolves relative paths, which must exist.
RunConfig parse_run_config(const std::string& text, const std::string& base_dir);
RunConfig load_run_config(const std::string& path);

struct PreparedRun {
    RunConfig config;
    Vocabulary vocab;
    std::vector<TaskData> data;
    std::optional<EmbeddingTable> embeddings;
};

/// Loads or generates every task's splits, builds the vocabulary from the
/// training data and fills the architecture's class counts and vocab size.
PreparedRun prepare_run(const RunConfig& config);

/// Copies a pretrained table into every embedding tensor of `model`.
void apply_embeddings(Model& model, const EmbeddingTable& table);

}  // namespace melstm
