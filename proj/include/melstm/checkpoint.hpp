// SPDX-License-Identifier: Apache-2.0
//
// Binary checkpoint, little-endian:
//
//   "MELSTMCK"  u32 version
//   u64 n, n bytes of JSON: architecture, train config, task names, gate order
//   u64 vocabulary hash, u64 token count, then per token u64 length + bytes
//   4 × u64 RNG state, u64 step counter
//   u64 tensor count, then per tensor:
//     u64 name length + bytes, u64 rows, u64 cols, rows·cols f64 values,
//     rows·cols f64 Adagrad accumulators
//
// Doubles are stored as their IEEE-754 bit patterns, so save → load → save
// reproduces the file byte for byte.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "melstm/data_io.hpp"
#include "melstm/multitask.hpp"
#include "melstm/numerics.hpp"
#include "melstm/trainer.hpp"

namespace melstm {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TensorRecord {
    std::string name;
    Matrix value;
    Matrix accum;
};

struct Checkpoint {
    ArchitectureConfig architecture;
    TrainConfig train;
    std::vector<std::string> task_names;
    Vocabulary vocab;
    Rng::State rng{};
    std::uint64_t step = 0;
    std::vector<TensorRecord> tensors;
};

Checkpoint capture(const Model& model, const Vocabulary& vocab, const TrainConfig& train,
                   const std::vector<std::string>& task_names, const Rng& rng, std::uint64_t step);

std::string serialize(const Checkpoint& ckpt);
/// Throws VersionError on a foreign or newer file, InputError when truncated.
Checkpoint deserialize(const std::string& bytes, const std::string& source = "checkpoint");

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

/// Rebuilds the model and copies every tensor and accumulator. Throws
/// VersionError if names or shapes disagree with the architecture.
Model restore_model(const Checkpoint& ckpt);

/// Throws VersionError unless `vocab` is the checkpoint's vocabulary.
void require_vocabulary(const Checkpoint& ckpt, const Vocabulary& vocab);

}  // namespace melstm
