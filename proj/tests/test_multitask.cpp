// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <map>
#include <set>

#include "melstm/errors.hpp"
#include "melstm/gradcheck.hpp"
#include "melstm/multitask.hpp"
#include "test_util.hpp"

using namespace melstm;
using namespace melstm::testing;

namespace {

ArchitectureConfig small_config(ArchKind kind, std::size_t tasks) {
    ArchitectureConfig c;
    c.kind = kind;
    c.classes.assign(tasks, 3);
    c.vocab_size = 12;
    c.embedding_dim = 4;
    c.hidden = 5;
    c.memory = {3, 4, Align::Cosine};
    c.local_memory = {4, 3, Align::Cosine};
    c.init_half_width = 0.5;
    return c;
}

std::vector<std::size_t> random_tokens(Rng& rng, std::size_t n, std::size_t vocab) {
    std::vector<std::size_t> t;
    for (std::size_t i = 0; i < n; ++i) t.push_back(rng.below(vocab));
    return t;
}

// Copies every tensor of `from` into `to` after renaming.
void copy_renamed(const Model& from, Model& to, const std::map<std::string, std::string>& prefixes) {
    for (const auto& np : from.parameters()) {
        std::string name = np.name;
        for (const auto& [src, dst] : prefixes) {
            if (name.rfind(src, 0) == 0) {
                name = dst + name.substr(src.size());
                break;
            }
        }
        Param target = to.find(name);
        ASSERT_EQ(target->value.rows(), np.param->value.rows()) << name;
        ASSERT_EQ(target->value.cols(), np.param->value.cols()) << name;
        target->value = np.param->value;
    }
}

}  // namespace

TEST(Model, ArcKindsTieSharedTensors) {
    Rng rng(1);
    Model arc1 = Model::build(small_config(ArchKind::Arc1, 3), rng);
    EXPECT_EQ(arc1.task(0).memory->emit_weight, arc1.task(2).memory->emit_weight);
    EXPECT_EQ(arc1.task(0).fusion->proj, arc1.task(1).fusion->proj);
    EXPECT_EQ(arc1.task(0).embedding, arc1.task(1).embedding);
    EXPECT_NE(arc1.task(0).cell.weight, arc1.task(1).cell.weight);
    EXPECT_NE(arc1.task(0).head.weight, arc1.task(1).head.weight);

    Model arc2 = Model::build(small_config(ArchKind::Arc2, 2), rng);
    EXPECT_EQ(arc2.task(0).global_memory->mem_init, arc2.task(1).global_memory->mem_init);
    EXPECT_EQ(arc2.task(0).global_fusion->gate_read, arc2.task(1).global_fusion->gate_read);
    EXPECT_NE(arc2.task(0).memory->mem_init, arc2.task(1).memory->mem_init);
    EXPECT_NE(arc2.task(0).fusion->proj, arc2.task(1).fusion->proj);

    Model single = Model::build(small_config(ArchKind::SingleMeLstm, 2), rng);
    EXPECT_NE(single.task(0).memory->mem_init, single.task(1).memory->mem_init);
    EXPECT_NE(single.task(0).embedding, single.task(1).embedding);
}

TEST(Model, ParametersAreDistinctAndNamed) {
    Rng rng(2);
    for (ArchKind kind : {ArchKind::SingleLstm, ArchKind::SingleMeLstm, ArchKind::Arc1, ArchKind::Arc2}) {
        Model model = Model::build(small_config(kind, 2), rng);
        std::set<std::string> names;
        std::set<GradSlot*> slots;
        for (const auto& np : model.parameters()) {
            EXPECT_TRUE(names.insert(np.name).second) << np.name;
            EXPECT_TRUE(slots.insert(np.param.get()).second) << np.name;
            EXPECT_EQ(model.find(np.name), np.param);
        }
        EXPECT_THROW(model.find("nope"), InputError);
    }
    Model arc2 = Model::build(small_config(ArchKind::Arc2, 2), rng);
    EXPECT_NO_THROW(arc2.find("shared.global_fusion.proj"));
    EXPECT_NO_THROW(arc2.find("task1.local_memory.mem_init"));
}

TEST(Model, ArcKindsNeedTwoTasks) {
    Rng rng(3);
    EXPECT_THROW(Model::build(small_config(ArchKind::Arc1, 1), rng), ConfigError);
    EXPECT_THROW(Model::build(small_config(ArchKind::Arc2, 1), rng), ConfigError);
    EXPECT_NO_THROW(Model::build(small_config(ArchKind::Arc1, 1), rng, true));
    EXPECT_NO_THROW(Model::build(small_config(ArchKind::SingleLstm, 1), rng));
    EXPECT_THROW(parse_arch_kind("arc3"), ConfigError);
    EXPECT_EQ(parse_arch_kind("single-me-lstm"), ArchKind::SingleMeLstm);
}

TEST(Reduction, Arc1WithOneTaskIsSingleMeLstm) {
    Rng rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        Model arc1 = Model::build(small_config(ArchKind::Arc1, 1), rng, true);
        Model single = Model::build(small_config(ArchKind::SingleMeLstm, 1), rng);
        copy_renamed(arc1, single,
                     {{"embedding", "task0.embedding"}, {"shared.memory", "task0.memory"},
                      {"shared.fusion", "task0.fusion"}});
        const auto tokens = random_tokens(rng, 1 + rng.below(10), 12);
        const TaskTape a = encode(arc1, 0, tokens), b = encode(single, 0, tokens);
        for (std::size_t t = 0; t < tokens.size(); ++t) {
            EXPECT_LE(max_abs_diff(a.traces[t].h, b.traces[t].h), 1e-12);
        }
        EXPECT_LE(max_abs_diff(predict(arc1.task(0).head, a.h_final), predict(single.task(0).head, b.h_final)),
                  1e-12);
    }
}

TEST(Reduction, Arc2WithoutGlobalProjectionIsSingleMeLstm) {
    Rng rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        Model arc2 = Model::build(small_config(ArchKind::Arc2, 1), rng, true);
        arc2.find("shared.global_fusion.proj")->value.fill(0.0);
        ArchitectureConfig sc = small_config(ArchKind::SingleMeLstm, 1);
        sc.memory = sc.local_memory;
        Model single = Model::build(sc, rng);
        std::map<std::string, std::string> renames{{"embedding", "task0.embedding"},
                                                   {"task0.local_memory", "task0.memory"},
                                                   {"task0.local_fusion", "task0.fusion"}};
        for (const auto& np : arc2.parameters()) {
            if (np.name.rfind("shared.", 0) == 0) continue;
            std::string name = np.name;
            for (const auto& [src, dst] : renames) {
                if (name.rfind(src, 0) == 0) name = dst + name.substr(src.size());
            }
            single.find(name)->value = np.param->value;
        }
        const auto tokens = random_tokens(rng, 1 + rng.below(10), 12);
        const TaskTape a = encode(arc2, 0, tokens), b = encode(single, 0, tokens);
        for (std::size_t t = 0; t < tokens.size(); ++t) {
            EXPECT_LE(max_abs_diff(a.traces[t].h, b.traces[t].h), 1e-12);
        }
    }
}

TEST(Reduction, ZeroProjectionsGiveVanillaLstm) {
    Rng rng(6);
    Model lstm = Model::build(small_config(ArchKind::SingleLstm, 2), rng);
    Model arc1 = Model::build(small_config(ArchKind::Arc1, 2), rng);
    arc1.find("shared.fusion.proj")->value.fill(0.0);
    for (std::size_t m = 0; m < 2; ++m) {
        const std::string p = "task" + std::to_string(m);
        lstm.find(p + ".embedding")->value = arc1.find("embedding")->value;
        lstm.find(p + ".cell.weight")->value = arc1.find(p + ".cell.weight")->value;
        lstm.find(p + ".cell.bias")->value = arc1.find(p + ".cell.bias")->value;
        const auto tokens = random_tokens(rng, 7, 12);
        EXPECT_LE(max_abs_diff(encode(lstm, m, tokens).h_final, encode(arc1, m, tokens).h_final), 1e-12);
    }
}

TEST(Gradients, EveryArchitectureMatchesFiniteDifferences) {
    for (ArchKind kind : {ArchKind::SingleLstm, ArchKind::SingleMeLstm, ArchKind::Arc1, ArchKind::Arc2}) {
        GradCheckDims dims;
        dims.length = 5;
        const GradCheckReport report = run_gradcheck(kind, dims, 7);
        EXPECT_TRUE(report.passed()) << to_string(kind) << " max " << report.max_error();
        EXPECT_FALSE(report.tensors.empty());
    }
}

TEST(Gradients, AdditiveArc2MatchesFiniteDifferences) {
    GradCheckDims dims;
    dims.align = Align::Additive;
    const GradCheckReport report = run_gradcheck(ArchKind::Arc2, dims, 3);
    EXPECT_TRUE(report.passed()) << report.max_error();
}

TEST(Gradients, EmbeddingRowsOfSeenTokensOnly) {
    Rng rng(8);
    Model model = Model::build(small_config(ArchKind::Arc2, 2), rng);
    model.zero_grads();
    const std::vector<std::size_t> tokens{1, 3, 3, 7};
    const TaskTape tape = encode(model, 1, tokens);
    backward(model, tape, random_vector(rng, 5));
    const Matrix& g = model.find("embedding")->grad;
    for (std::size_t row = 0; row < g.rows(); ++row) {
        double sum = 0.0;
        for (std::size_t col = 0; col < g.cols(); ++col) sum += std::abs(g(row, col));
        const bool seen = row == 1 || row == 3 || row == 7;
        EXPECT_EQ(sum > 0.0, seen) << row;
    }
    // Task 0's exclusive tensors are untouched by task 1's sequence.
    for (double v : model.find("task0.cell.weight")->grad.values()) EXPECT_EQ(v, 0.0);
    double shared = 0.0;
    for (double v : model.find("shared.global_memory.emit_weight")->grad.values()) shared += std::abs(v);
    EXPECT_GT(shared, 0.0);
}

TEST(Steps, GlobalMemoryIsThreadedAcrossTasks) {
    Rng rng(9);
    Model arc1 = Model::build(small_config(ArchKind::Arc1, 2), rng);
    const MemoryState g0 = arc1.task(0).memory->initial_state();
    const Vector x = random_vector(rng, 4);
    const LstmState zero = LstmState::zeros(5);
    const Arc1StepResult a = arc1_step(arc1, 0, zero, g0, x);
    EXPECT_GT(max_abs_diff(a.global.mem.values(), g0.mem.values()), 0.0);
    // Task 1 reading the memory task 0 wrote sees different content.
    const Arc1StepResult fresh = arc1_step(arc1, 1, zero, g0, x);
    const Arc1StepResult after = arc1_step(arc1, 1, zero, a.global, x);
    EXPECT_GT(max_abs_diff(fresh.state.h, after.state.h), 0.0);

    Model arc2 = Model::build(small_config(ArchKind::Arc2, 2), rng);
    const MemoryState l0 = arc2.task(0).memory->initial_state();
    const MemoryState s0 = arc2.task(0).global_memory->initial_state();
    const Arc2StepResult b = arc2_step(arc2, 0, zero, l0, s0, x);
    EXPECT_GT(max_abs_diff(b.global.mem.values(), s0.mem.values()), 0.0);
    EXPECT_EQ(b.trace.gate_shared.size(), 5u);
    EXPECT_EQ(b.trace.alpha_shared.size(), 3u);
    EXPECT_THROW(arc1_step(arc2, 0, zero, s0, x), ContractError);
}

TEST(Steps, Arc2GlobalWriteAblationFreezesGlobalMemory) {
    Rng rng(10);
    ArchitectureConfig c = small_config(ArchKind::Arc2, 2);
    c.global_write = false;
    Model model = Model::build(c, rng);
    const MemoryState s0 = model.task(0).global_memory->initial_state();
    const Arc2StepResult r = arc2_step(model, 0, LstmState::zeros(5), model.task(0).memory->initial_state(), s0,
                                       random_vector(rng, 4));
    EXPECT_EQ(r.global.mem, s0.mem);
}

TEST(Encode, RejectsEmptyAndOutOfVocabulary) {
    Rng rng(11);
    Model model = Model::build(small_config(ArchKind::Arc1, 2), rng);
    EXPECT_THROW(encode(model, 0, std::vector<std::size_t>{}), InputError);
    EXPECT_THROW(encode(model, 0, std::vector<std::size_t>{12}), InputError);
    EXPECT_THROW(model.task(2), InputError);
    const TaskTape one = encode(model, 1, std::vector<std::size_t>{4});
    EXPECT_EQ(one.traces.size(), 1u);
    for (double a : one.traces[0].alpha) EXPECT_DOUBLE_EQ(a, 1.0 / 3.0);
}
