// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "melstm/data_io.hpp"
#include "melstm/errors.hpp"
#include "melstm/synth.hpp"
#include "test_util.hpp"

using namespace melstm;
using namespace melstm::testing;

namespace {

const std::string kFixtures = MELSTM_FIXTURES;

std::size_t parse_error_line(const std::string& text) {
    Vocabulary v;
    try {
        parse_corpus(text, "mem", v);
    } catch (const ParseError& e) {
        return e.line();
    }
    return 0;
}

}  // namespace

TEST(Vocabulary, ReservedIdsAndLookup) {
    Vocabulary v;
    EXPECT_EQ(v.size(), 2u);
    EXPECT_EQ(v.token(Vocabulary::kUnk), "<unk>");
    EXPECT_EQ(v.token(Vocabulary::kPad), "<pad>");
    EXPECT_EQ(v.add("a"), 2u);
    EXPECT_EQ(v.add("a"), 2u);
    EXPECT_EQ(v.lookup("b"), Vocabulary::kUnk);
    EXPECT_THROW(v.token(9), InputError);
    EXPECT_EQ(Vocabulary(v.tokens()).hash(), v.hash());
    Vocabulary w;
    w.add("b");
    EXPECT_NE(w.hash(), v.hash());
    EXPECT_THROW(Vocabulary(std::vector<std::string>{"x", "y"}), InputError);
}

TEST(Corpus, LoadsFixture) {
    Vocabulary v;
    const Corpus c = load_corpus(kFixtures + "/tiny.txt", v);
    ASSERT_EQ(c.size(), 8u);
    EXPECT_EQ(c.num_classes(), 2u);
    EXPECT_EQ(c.examples[0].label, 1u);
    EXPECT_EQ(c.examples[0].tokens.size(), 5u);
    EXPECT_EQ(v.token(c.examples[0].tokens[0]), "the");
    EXPECT_EQ(c.examples[2].tokens[0], c.examples[2].tokens[3]);  // "great" twice
    std::size_t ones = 0;
    for (const auto& e : c.examples) ones += e.label;
    EXPECT_EQ(ones, 4u);
}

TEST(Corpus, UnknownTokensMapToUnkWithoutExtending) {
    Vocabulary v;
    load_corpus(kFixtures + "/tiny.txt", v);
    const std::size_t before = v.size();
    const Corpus c = parse_corpus("0\tgreat mystery film\n", "mem", v, false);
    EXPECT_EQ(v.size(), before);
    EXPECT_NE(c.examples[0].tokens[0], Vocabulary::kUnk);
    EXPECT_EQ(c.examples[0].tokens[1], Vocabulary::kUnk);
}

TEST(Corpus, TruncatesToMaxLength) {
    Vocabulary v;
    const Corpus c = parse_corpus("1\ta b c d e f\n", "mem", v, true, 4);
    EXPECT_EQ(c.examples[0].tokens.size(), 4u);
}

TEST(Corpus, ParseErrorsCarryLineNumbers) {
    EXPECT_EQ(parse_error_line("0\tok\nno tab here\n"), 2u);
    EXPECT_EQ(parse_error_line("0\tok\n\n-1\tbad\n"), 3u);
    EXPECT_EQ(parse_error_line("x\tbad\n"), 1u);
    EXPECT_EQ(parse_error_line("0\tfine\n1\t   \n"), 2u);
    Vocabulary v;
    try {
        parse_corpus("0\tok\n2x\tbad\n", "corpus.txt", v);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("corpus.txt:2"), std::string::npos);
    }
}

TEST(Corpus, EmptyAndMissingFiles) {
    Vocabulary v;
    EXPECT_THROW(parse_corpus("", "mem", v), InputError);
    EXPECT_THROW(parse_corpus("\n\n", "mem", v), InputError);
    EXPECT_THROW(load_corpus(kFixtures + "/does_not_exist.txt", v), InputError);
}

TEST(Corpus, SaveLoadRoundTrip) {
    Vocabulary v;
    const Corpus c = load_corpus(kFixtures + "/tiny.txt", v);
    const std::string path = temp_path("roundtrip.txt");
    save_corpus(path, c, v);
    Vocabulary v2 = v;
    const Corpus back = load_corpus(path, v2, false);
    EXPECT_EQ(back.examples, c.examples);
    EXPECT_EQ(v2.size(), v.size());
}

TEST(Embeddings, CopiesKnownRowsAndDrawsTheRest) {
    Vocabulary v;
    load_corpus(kFixtures + "/tiny.txt", v);
    Rng rng(1);
    const EmbeddingTable e = load_embeddings(kFixtures + "/tiny_emb.txt", v, 3, rng);
    EXPECT_EQ(e.table.rows(), v.size());
    EXPECT_EQ(e.covered, 2u);
    EXPECT_DOUBLE_EQ(e.coverage(), 2.0 / double(v.size()));
    const std::size_t g = v.lookup("great"), f = v.lookup("film");
    EXPECT_EQ(e.table(g, 0), 0.5);
    EXPECT_EQ(e.table(g, 1), -0.25);
    EXPECT_EQ(e.table(f, 2), -1.5);
    for (std::size_t j = 0; j < 3; ++j) {
        EXPECT_LE(std::abs(e.table(v.lookup("plot"), j)), 0.1);
    }
}

TEST(Embeddings, DimensionMismatchIsParseError) {
    Vocabulary v;
    load_corpus(kFixtures + "/tiny.txt", v);
    Rng rng(1);
    try {
        load_embeddings(kFixtures + "/tiny_emb.txt", v, 4, rng);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 1u);
    }
    const std::string path = temp_path("bad_emb.txt");
    spit(path, "great 1 2 3\nfilm 1 nan 3\n");
    EXPECT_THROW(load_embeddings(path, v, 3, rng), ParseError);
}

TEST(Splits, FractionsPartitionTheCorpus) {
    const Split s = split_fractions(1000, 0.7, 0.2, 0.1, 5);
    EXPECT_EQ(s.train.size(), 700u);
    EXPECT_EQ(s.dev.size(), 200u);
    EXPECT_EQ(s.test.size(), 100u);
    std::set<std::size_t> all(s.train.begin(), s.train.end());
    all.insert(s.dev.begin(), s.dev.end());
    all.insert(s.test.begin(), s.test.end());
    EXPECT_EQ(all.size(), 1000u);
    EXPECT_EQ(*all.rbegin(), 999u);
    EXPECT_EQ(split_fractions(1000, 0.7, 0.2, 0.1, 5).train, s.train);
    EXPECT_NE(split_fractions(1000, 0.7, 0.2, 0.1, 6).train, s.train);
    EXPECT_THROW(split_fractions(10, 0.7, 0.2, 0.2, 1), ConfigError);
    EXPECT_THROW(split_fractions(0, 0.7, 0.2, 0.1, 1), InputError);
}

TEST(Splits, KFoldDealsEveryIndexOnce) {
    const auto folds = kfold(103, 10, 2);
    ASSERT_EQ(folds.size(), 10u);
    std::vector<std::size_t> all;
    for (const auto& f : folds) {
        EXPECT_GE(f.size(), 10u);
        EXPECT_LE(f.size(), 11u);
        all.insert(all.end(), f.begin(), f.end());
    }
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < all.size(); ++i) EXPECT_EQ(all[i], i);
    const Split s = fold_split(folds, 3);
    EXPECT_EQ(s.test, folds[3]);
    EXPECT_EQ(s.train.size() + s.test.size(), 103u);
    EXPECT_TRUE(s.dev.empty());
    EXPECT_THROW(fold_split(folds, 10), ConfigError);
    EXPECT_THROW(kfold(5, 10, 1), InputError);
    EXPECT_THROW(kfold(5, 1, 1), ConfigError);
}

TEST(Splits, SubsetPicksIndices) {
    Vocabulary v;
    const Corpus c = load_corpus(kFixtures + "/tiny.txt", v);
    const Corpus s = subset(c, {7, 0});
    ASSERT_EQ(s.size(), 2u);
    EXPECT_EQ(s.examples[0], c.examples[7]);
    EXPECT_EQ(s.examples[1], c.examples[0]);
    EXPECT_THROW(subset(c, {8}), std::out_of_range);
}

TEST(Synth, DeterministicForSeed) {
    SynthSpec spec;
    spec.size = 50;
    const SynthData a = synth_tasks(spec), b = synth_tasks(spec);
    ASSERT_EQ(a.tasks.size(), 2u);
    EXPECT_EQ(a.tasks[0].examples, b.tasks[0].examples);
    EXPECT_EQ(a.vocab.tokens(), b.vocab.tokens());
    spec.seed = 2;
    EXPECT_NE(synth_tasks(spec).tasks[0].examples, a.tasks[0].examples);
}

TEST(Synth, ExamplesMatchGeneratorSettings) {
    SynthSpec spec;
    spec.tasks = 3;
    spec.size = 200;
    spec.informative = 3;
    const SynthData data = synth_tasks(spec);
    EXPECT_EQ(data.vocab.size(), spec.vocab_size + 2);
    for (std::size_t m = 0; m < 3; ++m) {
        std::size_t ones = 0;
        for (const auto& ex : data.tasks[m].examples) {
            ones += ex.label;
            EXPECT_GE(ex.tokens.size(), spec.min_length);
            EXPECT_LE(ex.tokens.size(), spec.max_length);
            std::size_t informative = 0;
            for (std::size_t id : ex.tokens) {
                const std::string& tok = data.vocab.token(id);
                if (!is_informative_token(tok)) continue;
                ++informative;
                // Pattern tokens encode their class right before the index suffix.
                const std::string cls = tok[0] == 's' ? tok.substr(1, tok.find('_') - 1)
                                                      : tok.substr(tok.find('c') + 1, tok.find('_') - tok.find('c') - 1);
                EXPECT_EQ(cls, std::to_string(ex.label)) << tok;
                if (tok[0] == 't') {
                    EXPECT_EQ(tok.substr(1, tok.find('c') - 1), std::to_string(m)) << tok;
                }
            }
            EXPECT_EQ(informative, 3u);
        }
        EXPECT_GT(ones, 60u);
        EXPECT_LT(ones, 140u);
    }
}

TEST(Synth, StrengthControlsSharedVocabulary) {
    auto informative_tokens = [](const SynthData& d, std::size_t task) {
        std::set<std::string> out;
        for (const auto& ex : d.tasks[task].examples) {
            for (std::size_t id : ex.tokens) {
                if (is_informative_token(d.vocab.token(id))) out.insert(d.vocab.token(id));
            }
        }
        return out;
    };
    auto overlap = [&](double strength) {
        SynthSpec spec;
        spec.size = 300;
        spec.strength = strength;
        const SynthData d = synth_tasks(spec);
        const auto a = informative_tokens(d, 0), b = informative_tokens(d, 1);
        std::size_t shared = 0;
        for (const auto& t : a) shared += b.count(t);
        return shared;
    };
    EXPECT_EQ(overlap(0.0), 0u);
    EXPECT_GT(overlap(1.0), 0u);
    // At strength 1 every pattern token comes from the shared pool.
    SynthSpec spec;
    spec.strength = 1.0;
    spec.size = 100;
    const SynthData d = synth_tasks(spec);
    for (const auto& t : informative_tokens(d, 1)) EXPECT_EQ(t[0], 's') << t;
}

TEST(Synth, RejectsBadSpecs) {
    SynthSpec spec;
    spec.vocab_size = 8;
    spec.tasks = 3;
    EXPECT_THROW(synth_tasks(spec), ConfigError);
    spec = {};
    spec.strength = 1.5;
    EXPECT_THROW(synth_tasks(spec), ConfigError);
    spec = {};
    spec.informative = 9;
    EXPECT_THROW(synth_tasks(spec), ConfigError);
    spec = {};
    spec.size = 0;
    EXPECT_THROW(synth_tasks(spec), ConfigError);
}
