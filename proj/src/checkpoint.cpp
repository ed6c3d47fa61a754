// SPDX-License-Identifier: Apache-2.0
#include "melstm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "melstm/config.hpp"
#include "melstm/errors.hpp"

namespace melstm {

namespace {

constexpr char kMagic[8] = {'M', 'E', 'L', 'S', 'T', 'M', 'C', 'K'};
constexpr const char* kGateOrder = "cand,out,in,forget";

class Writer {
public:
    void bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(const std::string& s) {
        u64(s.size());
        out_.append(s);
    }
    void matrix_values(const Matrix& m) {
        for (double v : m.values()) f64(v);
    }
    std::string take() { return std::move(out_); }

private:
    std::string out_;
};

class Reader {
public:
    Reader(const std::string& in, std::string source) : in_(in), source_(std::move(source)) {}

    const char* take(std::size_t n) {
        if (n > in_.size() - pos_) {
            throw InputError(source_ + ": truncated at byte " + std::to_string(pos_));
        }
        const char* p = in_.data() + pos_;
        pos_ += n;
        return p;
    }
    std::uint32_t u32() {
        const auto* p = reinterpret_cast<const unsigned char*>(take(4));
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(p[i]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        const auto* p = reinterpret_cast<const unsigned char*>(take(8));
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[i]) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str() {
        const std::uint64_t n = u64();
        return std::string(take(n), n);
    }
    Matrix matrix(std::uint64_t rows, std::uint64_t cols) {
        if (cols != 0 && rows > (in_.size() - pos_) / 8 / cols) {
            throw InputError(source_ + ": tensor of " + std::to_string(rows) + "x" + std::to_string(cols) +
                             " exceeds the file");
        }
        Matrix m(rows, cols);
        for (double& v : m.values()) v = f64();
        return m;
    }
    bool done() const { return pos_ == in_.size(); }

private:
    const std::string& in_;
    std::string source_;
    std::size_t pos_ = 0;
};

}  // namespace

Checkpoint capture(const Model& model, const Vocabulary& vocab, const TrainConfig& train,
                   const std::vector<std::string>& task_names, const Rng& rng, std::uint64_t step) {
    Checkpoint c;
    c.architecture = model.config();
    c.train = train;
    c.task_names = task_names;
    c.vocab = vocab;
    c.rng = rng.state();
    c.step = step;
    for (const auto& p : model.parameters()) c.tensors.push_back({p.name, p.param->value, p.param->accum});
    return c;
}

std::string serialize(const Checkpoint& ckpt) {
    Writer w;
    w.bytes(kMagic, sizeof kMagic);
    w.u32(kCheckpointVersion);
    Json header;
    header["architecture"] = to_json(ckpt.architecture);
    header["train"] = to_json(ckpt.train);
    header["tasks"] = ckpt.task_names;
    header["gate_order"] = kGateOrder;
    w.str(header.dump());
    w.u64(ckpt.vocab.hash());
    w.u64(ckpt.vocab.size());
    for (const auto& t : ckpt.vocab.tokens()) w.str(t);
    for (std::uint64_t s : ckpt.rng) w.u64(s);
    w.u64(ckpt.step);
    w.u64(ckpt.tensors.size());
    for (const auto& t : ckpt.tensors) {
        w.str(t.name);
        w.u64(t.value.rows());
        w.u64(t.value.cols());
        w.matrix_values(t.value);
        w.matrix_values(t.accum);
    }
    return w.take();
}

Checkpoint deserialize(const std::string& bytes, const std::string& source) {
    Reader r(bytes, source);
    if (bytes.size() < sizeof kMagic || std::memcmp(r.take(sizeof kMagic), kMagic, sizeof kMagic) != 0) {
        throw VersionError(source + ": not a checkpoint file");
    }
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw VersionError(source + ": checkpoint version " + std::to_string(version) + ", this build reads " +
                           std::to_string(kCheckpointVersion));
    }

    Checkpoint c;
    Json header;
    try {
        header = Json::parse(r.str());
        if (header.at("gate_order").get<std::string>() != kGateOrder) {
            throw VersionError(source + ": unsupported gate order " + header.at("gate_order").dump());
        }
        c.architecture = architecture_from_json(header.at("architecture"), "architecture");
        c.train = train_config_from_json(header.at("train"), "train");
        c.task_names = header.at("tasks").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw VersionError(source + ": bad header: " + e.what());
    } catch (const ConfigError& e) {
        throw VersionError(source + ": bad header: " + e.what());
    }

    const std::uint64_t hash = r.u64();
    const std::uint64_t count = r.u64();
    std::vector<std::string> tokens;
    for (std::uint64_t i = 0; i < count; ++i) tokens.push_back(r.str());
    try {
        c.vocab = Vocabulary(tokens);
    } catch (const InputError& e) {
        throw VersionError(source + ": " + e.what());
    }
    if (c.vocab.hash() != hash) throw VersionError(source + ": vocabulary hash mismatch");

    for (auto& s : c.rng) s = r.u64();
    c.step = r.u64();
    const std::uint64_t tensors = r.u64();
    for (std::uint64_t i = 0; i < tensors; ++i) {
        TensorRecord t;
        t.name = r.str();
        const std::uint64_t rows = r.u64(), cols = r.u64();
        t.value = r.matrix(rows, cols);
        t.accum = r.matrix(rows, cols);
        c.tensors.push_back(std::move(t));
    }
    if (!r.done()) throw VersionError(source + ": trailing bytes after the last tensor");
    return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    const std::string bytes = serialize(ckpt);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw InputError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return deserialize(ss.str(), path);
}

Model restore_model(const Checkpoint& ckpt) {
    Rng rng(0);
    Model model;
    try {
        model = Model::build(ckpt.architecture, rng, true);
    } catch (const ConfigError& e) {
        throw VersionError(std::string("checkpoint architecture: ") + e.what());
    }
    const auto& params = model.parameters();
    if (params.size() != ckpt.tensors.size()) {
        throw VersionError("checkpoint holds " + std::to_string(ckpt.tensors.size()) + " tensors, architecture has " +
                           std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& t = ckpt.tensors[i];
        auto& slot = *params[i].param;
        if (t.name != params[i].name || !t.value.same_shape(slot.value) || !t.accum.same_shape(slot.value)) {
            throw VersionError("checkpoint tensor '" + t.name + "' " + t.value.shape() + " does not match '" +
                               params[i].name + "' " + slot.value.shape());
        }
        slot.value = t.value;
        slot.accum = t.accum;
        slot.zero_grad();
    }
    return model;
}

void require_vocabulary(const Checkpoint& ckpt, const Vocabulary& vocab) {
    if (ckpt.vocab.hash() != vocab.hash() || ckpt.vocab.tokens() != vocab.tokens()) {
        throw VersionError("vocabulary does not match the checkpoint (" + std::to_string(vocab.size()) + " vs " +
                           std::to_string(ckpt.vocab.size()) + " tokens)");
    }
}

}  // namespace melstm
