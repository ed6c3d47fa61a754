// SPDX-License-Identifier: Apache-2.0
#include "melstm/config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>

#include "melstm/errors.hpp"

namespace melstm {

namespace fs = std::filesystem;

namespace {

// Typed access to one JSON object with field-qualified errors.
class Fields {
public:
    Fields(const Json& j, std::string field, std::set<std::string> allowed) : j_(j), field_(std::move(field)) {
        if (!j_.is_object()) throw ConfigError(field_ + ": expected an object");
        for (const auto& [key, value] : j_.items()) {
            if (!allowed.count(key)) throw ConfigError(name(key) + ": unknown key");
        }
    }

    std::string name(const std::string& key) const { return field_.empty() ? key : field_ + "." + key; }
    bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }
    const Json& at(const std::string& key) const { return j_.at(key); }

    template <typename T>
    void get(const std::string& key, T& out) const {
        if (!has(key)) return;
        const Json& v = j_.at(key);
        try {
            if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw ConfigError(name(key) + ": expected a boolean");
            } else if constexpr (std::is_integral_v<T>) {
                if (!v.is_number_integer()) throw ConfigError(name(key) + ": expected an integer");
                if constexpr (std::is_unsigned_v<T>) {
                    if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0) {
                        throw ConfigError(name(key) + ": must be non-negative");
                    }
                }
            } else if constexpr (std::is_floating_point_v<T>) {
                if (!v.is_number()) throw ConfigError(name(key) + ": expected a number");
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) throw ConfigError(name(key) + ": expected a string");
            }
            out = v.get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(name(key) + ": " + e.what());
        }
    }

private:
    const Json& j_;
    std::string field_;
};

std::string resolve(const std::string& base_dir, const std::string& path) {
    if (path.empty()) return path;
    fs::path p(path);
    if (p.is_relative() && !base_dir.empty()) p = fs::path(base_dir) / p;
    return p.lexically_normal().string();
}

void require_file(const std::string& field, const std::string& path) {
    if (!fs::is_regular_file(path)) throw ConfigError(field + ": file not found: " + path);
}

SplitScheme split_from_json(const Json& j, const std::string& field) {
    Fields f(j, field, {"scheme", "fractions", "folds", "fold"});
    SplitScheme s;
    std::string scheme = "fractions";
    f.get("scheme", scheme);
    if (scheme == "fixed") {
        s.kind = SplitScheme::Kind::Fixed;
    } else if (scheme == "fractions") {
        s.kind = SplitScheme::Kind::Fractions;
    } else if (scheme == "kfold") {
        s.kind = SplitScheme::Kind::KFold;
    } else {
        throw ConfigError(f.name("scheme") + ": unknown scheme '" + scheme + "' (fixed, fractions, kfold)");
    }
    if (f.has("fractions")) {
        std::vector<double> fr;
        try {
            fr = f.at("fractions").get<std::vector<double>>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError(f.name("fractions") + ": expected three numbers");
        }
        if (fr.size() != 3) throw ConfigError(f.name("fractions") + ": expected three numbers");
        s.train = fr[0];
        s.dev = fr[1];
        s.test = fr[2];
        if (s.train <= 0.0 || s.dev < 0.0 || s.test < 0.0 || std::abs(s.train + s.dev + s.test - 1.0) > 1e-9) {
            throw ConfigError(f.name("fractions") + ": must be non-negative, train > 0, summing to 1");
        }
    }
    f.get("folds", s.folds);
    f.get("fold", s.fold);
    if (s.kind == SplitScheme::Kind::KFold) {
        if (s.folds < 2) throw ConfigError(f.name("folds") + ": must be >= 2");
        if (s.fold >= s.folds) throw ConfigError(f.name("fold") + ": must be < folds");
    }
    return s;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void split_into(TaskData& td, const Corpus& corpus, const SplitScheme& scheme, std::uint64_t seed) {
    Split s;
    if (scheme.kind == SplitScheme::Kind::KFold) {
        s = fold_split(kfold(corpus.size(), scheme.folds, seed), scheme.fold);
    } else {
        s = split_fractions(corpus.size(), scheme.train, scheme.dev, scheme.test, seed);
    }
    td.train = subset(corpus, s.train);
    if (!s.dev.empty()) td.dev = subset(corpus, s.dev);
    if (!s.test.empty()) td.test = subset(corpus, s.test);
}

}  // namespace

Json to_json(const MemoryConfig& c) {
    return {{"segments", c.segments}, {"segment_size", c.segment_size}, {"align", to_string(c.align)}};
}

Json to_json(const ArchitectureConfig& c) {
    Json j;
    j["kind"] = to_string(c.kind);
    j["classes"] = c.classes;
    j["vocab_size"] = c.vocab_size;
    j["embedding_dim"] = c.embedding_dim;
    j["hidden"] = c.hidden;
    j["memory"] = to_json(c.memory);
    j["local_memory"] = to_json(c.local_memory);
    j["share_embeddings"] = c.share_embeddings;
    j["global_write"] = c.global_write;
    j["init_half_width"] = c.init_half_width;
    return j;
}

Json to_json(const TrainConfig& c) {
    Json j;
    j["learning_rate"] = c.learning_rate;
    j["l2"] = c.l2;
    j["batch_size"] = c.batch_size;
    j["task_weights"] = c.task_weights;
    j["epochs"] = c.epochs;
    j["seed"] = c.seed;
    j["clip_norm"] = c.clip_norm;
    j["patience"] = c.patience;
    j["eval_every"] = c.eval_every;
    return j;
}

Json to_json(const SynthSpec& s) {
    Json j;
    j["tasks"] = s.tasks;
    j["strength"] = s.strength;
    j["vocab_size"] = s.vocab_size;
    j["min_length"] = s.min_length;
    j["max_length"] = s.max_length;
    j["size"] = s.size;
    j["informative"] = s.informative;
    j["patterns"] = s.patterns;
    j["seed"] = s.seed;
    return j;
}

MemoryConfig memory_config_from_json(const Json& j, const std::string& field) {
    Fields f(j, field, {"segments", "segment_size", "align"});
    MemoryConfig c;
    f.get("segments", c.segments);
    f.get("segment_size", c.segment_size);
    if (f.has("align")) {
        std::string align;
        f.get("align", align);
        try {
            c.align = parse_align(align);
        } catch (const ConfigError& e) {
            throw ConfigError(f.name("align") + ": " + e.what());
        }
    }
    if (c.segments < 1) throw ConfigError(f.name("segments") + ": must be >= 1");
    if (c.segment_size < 1) throw ConfigError(f.name("segment_size") + ": must be >= 1");
    return c;
}

ArchitectureConfig architecture_from_json(const Json& j, const std::string& field) {
    Fields f(j, field,
             {"kind", "classes", "vocab_size", "embedding_dim", "hidden", "memory", "local_memory",
              "share_embeddings", "global_write", "init_half_width"});
    ArchitectureConfig c;
    if (f.has("kind")) {
        std::string kind;
        f.get("kind", kind);
        try {
            c.kind = parse_arch_kind(kind);
        } catch (const ConfigError& e) {
            throw ConfigError(f.name("kind") + ": " + e.what());
        }
    }
    if (f.has("classes")) {
        try {
            c.classes = f.at("classes").get<std::vector<std::size_t>>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError(f.name("classes") + ": expected a list of class counts");
        }
    }
    f.get("vocab_size", c.vocab_size);
    f.get("embedding_dim", c.embedding_dim);
    f.get("hidden", c.hidden);
    if (f.has("memory")) c.memory = memory_config_from_json(f.at("memory"), f.name("memory"));
    if (f.has("local_memory")) {
        c.local_memory = memory_config_from_json(f.at("local_memory"), f.name("local_memory"));
    }
    f.get("share_embeddings", c.share_embeddings);
    f.get("global_write", c.global_write);
    f.get("init_half_width", c.init_half_width);
    if (c.hidden < 1) throw ConfigError(f.name("hidden") + ": must be >= 1");
    if (c.embedding_dim < 1) throw ConfigError(f.name("embedding_dim") + ": must be >= 1");
    if (!(c.init_half_width > 0.0)) throw ConfigError(f.name("init_half_width") + ": must be positive");
    return c;
}

TrainConfig train_config_from_json(const Json& j, const std::string& field) {
    Fields f(j, field,
             {"learning_rate", "l2", "batch_size", "task_weights", "epochs", "seed", "clip_norm", "patience",
              "eval_every"});
    TrainConfig c;
    f.get("learning_rate", c.learning_rate);
    f.get("l2", c.l2);
    f.get("batch_size", c.batch_size);
    if (f.has("task_weights")) {
        try {
            c.task_weights = f.at("task_weights").get<std::vector<double>>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError(f.name("task_weights") + ": expected a list of numbers");
        }
    }
    f.get("epochs", c.epochs);
    f.get("seed", c.seed);
    f.get("clip_norm", c.clip_norm);
    f.get("patience", c.patience);
    f.get("eval_every", c.eval_every);
    if (!(c.learning_rate > 0.0)) throw ConfigError(f.name("learning_rate") + ": must be positive");
    if (!(c.l2 >= 0.0)) throw ConfigError(f.name("l2") + ": must be non-negative");
    if (c.batch_size < 1) throw ConfigError(f.name("batch_size") + ": must be >= 1");
    if (c.eval_every < 1) throw ConfigError(f.name("eval_every") + ": must be >= 1");
    return c;
}

SynthSpec synth_spec_from_json(const Json& j, const std::string& field) {
    Fields f(j, field,
             {"tasks", "strength", "vocab_size", "min_length", "max_length", "size", "informative", "patterns",
              "seed"});
    SynthSpec s;
    f.get("tasks", s.tasks);
    f.get("strength", s.strength);
    f.get("vocab_size", s.vocab_size);
    f.get("min_length", s.min_length);
    f.get("max_length", s.max_length);
    f.get("size", s.size);
    f.get("informative", s.informative);
    f.get("patterns", s.patterns);
    f.get("seed", s.seed);
    try {
        s.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(field + ": " + e.what());
    }
    return s;
}

RunConfig parse_run_config(const std::string& text, const std::string& base_dir) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    Fields f(j, "",
             {"seed", "output_dir", "max_length", "embeddings", "log_wall_time", "architecture", "train", "tasks",
              "synth", "split"});
    RunConfig rc;
    f.get("seed", rc.seed);
    f.get("output_dir", rc.output_dir);
    rc.output_dir = resolve(base_dir, rc.output_dir);
    f.get("max_length", rc.max_length);
    f.get("embeddings", rc.embeddings);
    rc.embeddings = resolve(base_dir, rc.embeddings);
    if (!rc.embeddings.empty()) require_file("embeddings", rc.embeddings);
    f.get("log_wall_time", rc.log_wall_time);
    if (f.has("architecture")) rc.architecture = architecture_from_json(f.at("architecture"), "architecture");
    if (f.has("train")) rc.train = train_config_from_json(f.at("train"), "train");
    if (!f.has("train") || !f.at("train").contains("seed")) rc.train.seed = rc.seed;

    if (f.has("synth") == f.has("tasks")) throw ConfigError("tasks: give exactly one of 'tasks' or 'synth'");
    if (f.has("synth")) {
        rc.synth = synth_spec_from_json(f.at("synth"), "synth");
        if (f.has("split")) rc.synth_split = split_from_json(f.at("split"), "split");
        if (rc.synth_split.kind == SplitScheme::Kind::Fixed) {
            throw ConfigError("split.scheme: synthetic tasks need fractions or kfold");
        }
    } else {
        if (f.has("split")) throw ConfigError("split: only used with 'synth'; give each task its own split");
        const Json& tasks = f.at("tasks");
        if (!tasks.is_array() || tasks.empty()) throw ConfigError("tasks: expected a non-empty list");
        std::set<std::string> names;
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            const std::string field = "tasks[" + std::to_string(i) + "]";
            Fields tf(tasks[i], field, {"name", "weight", "train", "dev", "test", "data", "split"});
            TaskSpec t;
            tf.get("name", t.name);
            if (t.name.empty()) throw ConfigError(tf.name("name") + ": required");
            if (!names.insert(t.name).second) throw ConfigError(tf.name("name") + ": duplicate task '" + t.name + "'");
            tf.get("weight", t.weight);
            if (!(t.weight >= 0.0)) throw ConfigError(tf.name("weight") + ": must be non-negative");
            tf.get("train", t.train);
            tf.get("dev", t.dev);
            tf.get("test", t.test);
            tf.get("data", t.data);
            t.train = resolve(base_dir, t.train);
            t.dev = resolve(base_dir, t.dev);
            t.test = resolve(base_dir, t.test);
            t.data = resolve(base_dir, t.data);
            if (tf.has("split")) {
                t.split = split_from_json(tf.at("split"), tf.name("split"));
            } else {
                t.split.kind = t.data.empty() ? SplitScheme::Kind::Fixed : SplitScheme::Kind::Fractions;
            }
            if (t.split.kind == SplitScheme::Kind::Fixed) {
                if (!t.data.empty()) throw ConfigError(tf.name("data") + ": not used by the fixed scheme");
                if (t.train.empty()) throw ConfigError(tf.name("train") + ": required");
                require_file(tf.name("train"), t.train);
                if (!t.dev.empty()) require_file(tf.name("dev"), t.dev);
                if (!t.test.empty()) require_file(tf.name("test"), t.test);
            } else {
                if (t.data.empty()) throw ConfigError(tf.name("data") + ": required by the split scheme");
                if (!t.train.empty() || !t.dev.empty() || !t.test.empty()) {
                    throw ConfigError(field + ": give either 'data' with a split or train/dev/test files");
                }
                require_file(tf.name("data"), t.data);
            }
            rc.tasks.push_back(std::move(t));
        }
        if (rc.train.task_weights.empty()) {
            for (const auto& t : rc.tasks) rc.train.task_weights.push_back(t.weight);
        } else if (rc.train.task_weights.size() != rc.tasks.size()) {
            throw ConfigError("train.task_weights: expected one weight per task");
        }
    }
    const std::size_t count = rc.synth ? rc.synth->tasks : rc.tasks.size();
    if (rc.architecture.multitask() && count < 2) {
        throw ConfigError("architecture.kind: " + to_string(rc.architecture.kind) + " needs at least two tasks");
    }
    try {
        rc.train.validate(count);
    } catch (const ConfigError& e) {
        throw ConfigError(std::string(e.what()));
    }
    return rc;
}

RunConfig load_run_config(const std::string& path) {
    if (!fs::is_regular_file(path)) throw ConfigError("config: file not found: " + path);
    return parse_run_config(read_text(path), fs::path(path).parent_path().string());
}

PreparedRun prepare_run(const RunConfig& config) {
    PreparedRun run;
    run.config = config;
    if (config.synth) {
        SynthData sd = synth_tasks(*config.synth);
        run.vocab = std::move(sd.vocab);
        for (std::size_t m = 0; m < sd.tasks.size(); ++m) {
            TaskData td;
            td.name = sd.tasks[m].task;
            split_into(td, sd.tasks[m], config.synth_split, config.seed + m);
            run.data.push_back(std::move(td));
        }
    } else {
        for (std::size_t m = 0; m < config.tasks.size(); ++m) {
            const TaskSpec& t = config.tasks[m];
            TaskData td;
            td.name = t.name;
            if (t.split.kind == SplitScheme::Kind::Fixed) {
                td.train = load_corpus(t.train, run.vocab, true, config.max_length);
                if (!t.dev.empty()) td.dev = load_corpus(t.dev, run.vocab, false, config.max_length);
                if (!t.test.empty()) td.test = load_corpus(t.test, run.vocab, false, config.max_length);
            } else {
                Corpus all = load_corpus(t.data, run.vocab, true, config.max_length);
                split_into(td, all, t.split, config.seed + m);
            }
            td.train.task = t.name;
            run.data.push_back(std::move(td));
        }
    }

    auto& arch = run.config.architecture;
    arch.classes.clear();
    for (const auto& td : run.data) {
        std::size_t c = td.train.num_classes();
        if (td.dev) c = std::max(c, td.dev->num_classes());
        if (td.test) c = std::max(c, td.test->num_classes());
        arch.classes.push_back(c);
    }
    arch.vocab_size = run.vocab.size();

    if (!config.embeddings.empty()) {
        Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
        run.embeddings = load_embeddings(config.embeddings, run.vocab, arch.embedding_dim, rng);
    }
    return run;
}

void apply_embeddings(Model& model, const EmbeddingTable& table) {
    for (const auto& p : model.parameters()) {
        if (p.name != "embedding" && !p.name.ends_with(".embedding")) continue;
        if (!p.param->value.same_shape(table.table)) {
            throw DimensionError("embeddings: table " + table.table.shape() + " does not match " + p.name + " " +
                                 p.param->value.shape());
        }
        p.param->value = table.table;
    }
}

}  // namespace melstm
