// SPDX-License-Identifier: Apache-2.0
#include "melstm/synth.hpp"

#include <algorithm>
#include <array>

#include "melstm/errors.hpp"

namespace melstm {

std::size_t SynthSpec::patterns_per_class() const {
    return patterns != 0 ? patterns : vocab_size / (4 * (tasks + 1));
}

void SynthSpec::validate() const {
    if (tasks < 1) throw ConfigError("synth: tasks must be >= 1");
    if (!(strength >= 0.0 && strength <= 1.0)) throw ConfigError("synth: strength must lie in [0, 1]");
    if (informative == 0) throw ConfigError("synth: informative tokens per example must be >= 1");
    if (patterns_per_class() == 0) throw ConfigError("synth: zero pattern tokens per class");
    if (min_length < informative || min_length > max_length) {
        throw ConfigError("synth: need informative <= min_length <= max_length");
    }
    if (2 * patterns_per_class() * (tasks + 1) >= vocab_size) {
        throw ConfigError("synth: vocab_size leaves no filler tokens");
    }
    if (size == 0) throw ConfigError("synth: size must be >= 1");
}

SynthData synth_tasks(const SynthSpec& spec) {
    spec.validate();
    const std::size_t p = spec.patterns_per_class();
    const std::size_t fillers = spec.vocab_size - 2 * p * (spec.tasks + 1);

    SynthData data;
    std::vector<std::size_t> filler_ids;
    for (std::size_t i = 0; i < fillers; ++i) filler_ids.push_back(data.vocab.add("w" + std::to_string(i)));
    // pools[0] is shared, pools[1 + m] belongs to task m; each indexed by class.
    std::vector<std::array<std::vector<std::size_t>, 2>> pools(spec.tasks + 1);
    for (std::size_t c = 0; c < 2; ++c) {
        for (std::size_t i = 0; i < p; ++i) {
            pools[0][c].push_back(data.vocab.add("s" + std::to_string(c) + "_" + std::to_string(i)));
        }
    }
    for (std::size_t m = 0; m < spec.tasks; ++m) {
        for (std::size_t c = 0; c < 2; ++c) {
            for (std::size_t i = 0; i < p; ++i) {
                pools[1 + m][c].push_back(data.vocab.add("t" + std::to_string(m) + "c" + std::to_string(c) + "_" +
                                                         std::to_string(i)));
            }
        }
    }

    Rng rng(spec.seed);
    for (std::size_t m = 0; m < spec.tasks; ++m) {
        Corpus corpus;
        corpus.task = "task" + std::to_string(m);
        for (std::size_t n = 0; n < spec.size; ++n) {
            Example ex;
            ex.label = static_cast<std::size_t>(rng.below(2));
            const std::size_t len =
                spec.min_length + static_cast<std::size_t>(rng.below(spec.max_length - spec.min_length + 1));
            ex.tokens.resize(len);
            for (auto& t : ex.tokens) t = filler_ids[rng.below(filler_ids.size())];

            std::vector<std::size_t> positions(len);
            for (std::size_t i = 0; i < len; ++i) positions[i] = i;
            rng.shuffle(positions);
            for (std::size_t k = 0; k < spec.informative; ++k) {
                const auto& pool = rng.bernoulli(spec.strength) ? pools[0] : pools[1 + m];
                const auto& ids = pool[ex.label];
                ex.tokens[positions[k]] = ids[rng.below(ids.size())];
            }
            corpus.examples.push_back(std::move(ex));
        }
        data.tasks.push_back(std::move(corpus));
    }
    return data;
}

bool is_informative_token(const std::string& token) {
    return !token.empty() && (token[0] == 's' || token[0] == 't');
}

}  // namespace melstm
