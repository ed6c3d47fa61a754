// SPDX-License-Identifier: Apache-2.0
//
// Corpus files are UTF-8, one example per line: `label<TAB>tok tok tok`,
// labels 0-based. Embedding files hold `token v1 v2 ... v_dim` per line.
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "melstm/numerics.hpp"

namespace melstm {

class Vocabulary {
public:
    static constexpr std::size_t kUnk = 0;
    static constexpr std::size_t kPad = 1;
    static constexpr const char* kUnkToken = "<unk>";
    static constexpr const char* kPadToken = "<pad>";

    Vocabulary();
    /// Rebuilds from an id-ordered token list; the first two must be UNK and PAD.
    explicit Vocabulary(const std::vector<std::string>& tokens);

    /// Id of `token`, inserting it if new.
    std::size_t add(const std::string& token);
    /// Id of `token`, or kUnk.
    std::size_t lookup(const std::string& token) const;
    bool contains(const std::string& token) const { return index_.count(token) != 0; }
    const std::string& token(std::size_t id) const;
    std::size_t size() const noexcept { return tokens_.size(); }
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }

    /// FNV-1a over the id-ordered tokens.
    std::uint64_t hash() const;

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::size_t> index_;
};

struct Example {
    std::size_t label = 0;
    std::vector<std::size_t> tokens;

    friend bool operator==(const Example&, const Example&) = default;
};

struct Corpus {
    std::string task;
    std::vector<Example> examples;

    /// max label + 1, at least 2.
    std::size_t num_classes() const;
    bool empty() const { return examples.empty(); }
    std::size_t size() const { return examples.size(); }

    friend bool operator==(const Corpus&, const Corpus&) = default;
};

/// Reads a corpus. New tokens are added to `vocab` when `extend` is true,
/// otherwise map to UNK. Sequences longer than `max_length` (if nonzero) are
/// truncated.
Corpus load_corpus(const std::string& path, Vocabulary& vocab, bool extend = true, std::size_t max_length = 0);

/// Parses corpus text held in memory; `source` names it in error messages.
Corpus parse_corpus(const std::string& text, const std::string& source, Vocabulary& vocab, bool extend = true,
                    std::size_t max_length = 0);

void save_corpus(const std::string& path, const Corpus& corpus, const Vocabulary& vocab);

struct EmbeddingTable {
    Matrix table;  // vocab × dim
    std::size_t covered = 0;
    double coverage() const { return table.rows() == 0 ? 0.0 : double(covered) / double(table.rows()); }
};

/// Rows of tokens found in the file are copied; the rest are drawn from
/// U[-0.1, 0.1].
EmbeddingTable load_embeddings(const std::string& path, const Vocabulary& vocab, std::size_t dim, Rng& rng);

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> dev;
    std::vector<std::size_t> test;
};

/// Seeded shuffle, then contiguous train/dev/test blocks. Train and dev
/// sizes are rounded to nearest; test takes the rest.
Split split_fractions(std::size_t n, double train, double dev, double test, std::uint64_t seed);

/// Seeded shuffle dealt into `folds` folds whose sizes differ by at most one.
std::vector<std::vector<std::size_t>> kfold(std::size_t n, std::size_t folds, std::uint64_t seed);

/// Fold `index` as test, the rest as train.
Split fold_split(const std::vector<std::vector<std::size_t>>& folds, std::size_t index);

Corpus subset(const Corpus& corpus, const std::vector<std::size_t>& indices);

}  // namespace melstm
