// SPDX-License-Identifier: Apache-2.0
#include "melstm/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "melstm/errors.hpp"

namespace melstm {

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

}  // namespace

Vocabulary::Vocabulary() {
    add(kUnkToken);
    add(kPadToken);
}

Vocabulary::Vocabulary(const std::vector<std::string>& tokens) {
    if (tokens.size() < 2 || tokens[0] != kUnkToken || tokens[1] != kPadToken) {
        throw InputError("vocabulary must start with <unk>, <pad>");
    }
    for (const auto& t : tokens) {
        if (contains(t)) throw InputError("vocabulary: duplicate token '" + t + "'");
        add(t);
    }
}

std::size_t Vocabulary::add(const std::string& token) {
    auto it = index_.find(token);
    if (it != index_.end()) return it->second;
    const std::size_t id = tokens_.size();
    tokens_.push_back(token);
    index_.emplace(token, id);
    return id;
}

std::size_t Vocabulary::lookup(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(std::size_t id) const {
    if (id >= tokens_.size()) throw InputError("token id " + std::to_string(id) + " outside vocabulary");
    return tokens_[id];
}

std::uint64_t Vocabulary::hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](unsigned char c) {
        h ^= c;
        h *= 0x100000001b3ULL;
    };
    for (const auto& t : tokens_) {
        for (char c : t) mix(static_cast<unsigned char>(c));
        mix(0);
    }
    return h;
}

std::size_t Corpus::num_classes() const {
    std::size_t top = 0;
    for (const auto& e : examples) top = std::max(top, e.label);
    return std::max<std::size_t>(top + 1, 2);
}

Corpus parse_corpus(const std::string& text, const std::string& source, Vocabulary& vocab, bool extend,
                    std::size_t max_length) {
    Corpus corpus;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw ParseError(source, lineno, "expected label<TAB>text");
        const std::string label_text = line.substr(0, tab);
        std::size_t label = 0;
        auto [ptr, ec] = std::from_chars(label_text.data(), label_text.data() + label_text.size(), label);
        if (ec != std::errc() || ptr != label_text.data() + label_text.size() || label_text.empty()) {
            throw ParseError(source, lineno, "label '" + label_text + "' is not a non-negative integer");
        }
        const auto words = split_ws(line.substr(tab + 1));
        if (words.empty()) throw ParseError(source, lineno, "example has no tokens");
        Example ex;
        ex.label = label;
        for (const auto& w : words) {
            if (max_length != 0 && ex.tokens.size() >= max_length) break;
            ex.tokens.push_back(extend ? vocab.add(w) : vocab.lookup(w));
        }
        corpus.examples.push_back(std::move(ex));
    }
    if (corpus.examples.empty()) throw InputError(source + ": corpus is empty");
    return corpus;
}

Corpus load_corpus(const std::string& path, Vocabulary& vocab, bool extend, std::size_t max_length) {
    return parse_corpus(read_file(path), path, vocab, extend, max_length);
}

void save_corpus(const std::string& path, const Corpus& corpus, const Vocabulary& vocab) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path);
    for (const auto& ex : corpus.examples) {
        out << ex.label << '\t';
        for (std::size_t i = 0; i < ex.tokens.size(); ++i) {
            if (i) out << ' ';
            out << vocab.token(ex.tokens[i]);
        }
        out << '\n';
    }
}

EmbeddingTable load_embeddings(const std::string& path, const Vocabulary& vocab, std::size_t dim, Rng& rng) {
    EmbeddingTable out;
    out.table = init_uniform(rng, vocab.size(), dim, 0.1);
    std::vector<bool> seen(vocab.size(), false);

    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto fields = split_ws(line);
        if (fields.empty()) continue;
        if (fields.size() != dim + 1) {
            throw ParseError(path, lineno, "expected " + std::to_string(dim) + " values, found " +
                                               std::to_string(fields.size() - 1));
        }
        if (!vocab.contains(fields[0])) continue;
        const std::size_t id = vocab.lookup(fields[0]);
        auto row = out.table.row(id);
        for (std::size_t j = 0; j < dim; ++j) {
            const std::string& f = fields[j + 1];
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
            if (ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v)) {
                throw ParseError(path, lineno, "bad number '" + f + "'");
            }
            row[j] = v;
        }
        if (!seen[id]) {
            seen[id] = true;
            ++out.covered;
        }
    }
    return out;
}

namespace {

std::vector<std::size_t> shuffled(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    rng.shuffle(idx);
    return idx;
}

}  // namespace

Split split_fractions(std::size_t n, double train, double dev, double test, std::uint64_t seed) {
    if (train < 0 || dev < 0 || test < 0 || std::abs(train + dev + test - 1.0) > 1e-9) {
        throw ConfigError("split fractions must be non-negative and sum to 1");
    }
    if (n == 0) throw InputError("cannot split an empty corpus");
    const auto idx = shuffled(n, seed);
    const auto n_train = static_cast<std::size_t>(std::llround(train * double(n)));
    const auto n_dev = std::min(n - n_train, static_cast<std::size_t>(std::llround(dev * double(n))));
    Split s;
    s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.dev.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train),
                 idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_dev));
    s.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_dev), idx.end());
    return s;
}

std::vector<std::vector<std::size_t>> kfold(std::size_t n, std::size_t folds, std::uint64_t seed) {
    if (folds < 2) throw ConfigError("k-fold needs at least 2 folds");
    if (n < folds) {
        throw InputError("corpus of " + std::to_string(n) + " examples is smaller than " +
                         std::to_string(folds) + " folds");
    }
    const auto idx = shuffled(n, seed);
    std::vector<std::vector<std::size_t>> out(folds);
    for (std::size_t i = 0; i < n; ++i) out[i % folds].push_back(idx[i]);
    return out;
}

Split fold_split(const std::vector<std::vector<std::size_t>>& folds, std::size_t index) {
    if (index >= folds.size()) throw ConfigError("fold index out of range");
    Split s;
    for (std::size_t f = 0; f < folds.size(); ++f) {
        auto& dst = f == index ? s.test : s.train;
        dst.insert(dst.end(), folds[f].begin(), folds[f].end());
    }
    return s;
}

Corpus subset(const Corpus& corpus, const std::vector<std::size_t>& indices) {
    Corpus out;
    out.task = corpus.task;
    out.examples.reserve(indices.size());
    for (std::size_t i : indices) out.examples.push_back(corpus.examples.at(i));
    return out;
}

}  // namespace melstm
