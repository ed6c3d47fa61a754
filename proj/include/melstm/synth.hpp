// SPDX-License-Identifier: Apache-2.0
//
// Related binary classification tasks for desk-scale multi-task runs.
//
// The vocabulary is split into filler tokens `w<i>` and pattern pools. There
// is one shared pool (tokens `s<c>_<i>`) and one pool per task
// (`t<m>c<c>_<i>`); every pool holds `patterns` tokens per class c ∈ {0,1}.
// An example of task m draws its label uniformly, fills a random-length
// sequence with filler, then places `informative` pattern tokens of its
// label at distinct random positions. Each pattern token comes from the
// shared pool with probability `strength` and from task m's pool otherwise.
//
// strength 1 makes every task depend on the same tokens; strength 0 makes
// the tasks' label-bearing vocabularies disjoint.
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "melstm/data_io.hpp"

namespace melstm {

struct SynthSpec {
    std::size_t tasks = 2;
    double strength = 0.8;
    std::size_t vocab_size = 1000;  // generated tokens, excluding <unk>/<pad>
    std::size_t min_length = 8;
    std::size_t max_length = 16;
    std::size_t size = 700;  // examples per task
    std::size_t informative = 2;
    std::size_t patterns = 0;  // per class per pool; 0 derives vocab_size / (4·(tasks+1))
    std::uint64_t seed = 1;

    std::size_t patterns_per_class() const;
    void validate() const;
};

struct SynthData {
    Vocabulary vocab;
    std::vector<Corpus> tasks;
};

SynthData synth_tasks(const SynthSpec& spec);

/// True for pattern (label-bearing) tokens of the generator's vocabulary.
bool is_informative_token(const std::string& token);

}  // namespace melstm
