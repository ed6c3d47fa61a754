// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "melstm/checkpoint.hpp"
#include "melstm/errors.hpp"
#include "melstm/synth.hpp"
#include "test_util.hpp"

using namespace melstm;
using namespace melstm::testing;

namespace {

struct Trained {
    Model model;
    Vocabulary vocab;
    std::vector<TaskData> data;
    Rng rng;
    TrainReport report;
};

Trained trained(ArchKind kind, Align align = Align::Cosine) {
    SynthSpec spec;
    spec.size = 24;
    spec.vocab_size = 60;
    const SynthData sd = synth_tasks(spec);
    ArchitectureConfig c;
    c.kind = kind;
    c.classes = {2, 2};
    c.vocab_size = sd.vocab.size();
    c.embedding_dim = 5;
    c.hidden = 6;
    c.memory = {4, 3, align};
    c.local_memory = {3, 2, align};
    Rng rng(3);
    Model model = Model::build(c, rng);
    std::vector<TaskData> data;
    for (const auto& t : sd.tasks) data.push_back({t.task, t, {}, {}});
    TrainConfig tc;
    tc.epochs = 2;
    tc.batch_size = 8;
    tc.learning_rate = 0.1;
    TrainReport report = train(model, data, tc, rng);
    return {std::move(model), sd.vocab, std::move(data), rng, report};
}

Checkpoint capture_of(const Trained& t) {
    TrainConfig tc;
    tc.learning_rate = 0.1;
    return capture(t.model, t.vocab, tc, {"t0", "t1"}, t.rng, t.report.steps);
}

}  // namespace

TEST(Checkpoint, RoundTripIsByteIdenticalForEveryArchitecture) {
    for (ArchKind kind : {ArchKind::SingleLstm, ArchKind::SingleMeLstm, ArchKind::Arc1, ArchKind::Arc2}) {
        const Trained t = trained(kind, kind == ArchKind::Arc2 ? Align::Additive : Align::Cosine);
        const std::string path = temp_path("rt_" + to_string(kind) + ".ckpt");
        save_checkpoint(path, capture_of(t));
        const std::string first = slurp(path);
        const Checkpoint loaded = load_checkpoint(path);
        const Model restored = restore_model(loaded);
        save_checkpoint(path, capture(restored, loaded.vocab, loaded.train, loaded.task_names,
                                      [&] {
                                          Rng r(0);
                                          r.set_state(loaded.rng);
                                          return r;
                                      }(),
                                      loaded.step));
        EXPECT_EQ(slurp(path), first) << to_string(kind);
        EXPECT_EQ(loaded.step, t.report.steps);
        EXPECT_EQ(loaded.rng, t.rng.state());
        EXPECT_EQ(loaded.task_names, (std::vector<std::string>{"t0", "t1"}));
        EXPECT_EQ(loaded.vocab.tokens(), t.vocab.tokens());

        // Evaluation and traces agree exactly.
        for (std::size_t m = 0; m < 2; ++m) {
            const EvalResult a = evaluate(t.model, m, t.data[m].train);
            const EvalResult b = evaluate(restored, m, t.data[m].train);
            EXPECT_EQ(a.correct, b.correct);
            EXPECT_EQ(a.loss, b.loss);
            const auto& toks = t.data[m].train.examples[0].tokens;
            EXPECT_EQ(encode(t.model, m, toks).h_final, encode(restored, m, toks).h_final);
        }
        const auto& params = restored.parameters();
        for (std::size_t i = 0; i < params.size(); ++i) {
            EXPECT_EQ(params[i].param->accum, t.model.parameters()[i].param->accum);
        }
    }
}

TEST(Checkpoint, RejectsForeignAndNewerFiles) {
    const Trained t = trained(ArchKind::Arc1);
    std::string bytes = serialize(capture_of(t));
    EXPECT_NO_THROW(deserialize(bytes));

    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    EXPECT_THROW(deserialize(bad_magic), VersionError);

    std::string newer = bytes;
    newer[8] = static_cast<char>(kCheckpointVersion + 1);
    EXPECT_THROW(deserialize(newer), VersionError);

    EXPECT_THROW(deserialize(bytes.substr(0, bytes.size() - 3)), InputError);
    EXPECT_THROW(deserialize(bytes.substr(0, 5)), Error);
    EXPECT_THROW(deserialize(bytes + "x"), VersionError);
    EXPECT_THROW(load_checkpoint(temp_path("absent.ckpt")), InputError);
}

TEST(Checkpoint, VocabularyMustMatch) {
    const Trained t = trained(ArchKind::SingleMeLstm);
    const Checkpoint ckpt = capture_of(t);
    EXPECT_NO_THROW(require_vocabulary(ckpt, t.vocab));
    Vocabulary other = t.vocab;
    other.add("something-new");
    EXPECT_THROW(require_vocabulary(ckpt, other), VersionError);
}

TEST(Checkpoint, ShapeOrNameMismatchIsVersionError) {
    const Trained t = trained(ArchKind::Arc2);
    Checkpoint ckpt = capture_of(t);
    Checkpoint renamed = ckpt;
    renamed.tensors[0].name = "bogus";
    EXPECT_THROW(restore_model(renamed), VersionError);
    Checkpoint reshaped = ckpt;
    reshaped.architecture.hidden = 7;
    EXPECT_THROW(restore_model(reshaped), VersionError);
    Checkpoint dropped = ckpt;
    dropped.tensors.pop_back();
    EXPECT_THROW(restore_model(dropped), VersionError);
}
