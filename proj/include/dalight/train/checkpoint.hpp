#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dalight/model/config_json.hpp"
#include "dalight/model/dalight3d.hpp"
#include "dalight/train/optimizer.hpp"

namespace dalight::train {

// Checkpoint container, version 1:
//   magic "DLCK", version byte 1,
//   little-endian u32 json length + a JSON blob (model config, optimizer
//   hyper-parameters, step counter, epoch, best validation score, build seed),
//   little-endian u32 tensor count, then per tensor:
//     u32 name length, name bytes, u32 rank, u32 dims[rank],
//     payload as little-endian IEEE-754 64-bit values.
// Optimizer moments are stored under "optim.m/<param>" and "optim.v/<param>".
inline constexpr char kCkptMagic[4] = {'D', 'L', 'C', 'K'};
inline constexpr uint8_t kCkptVersion = 1;

struct CheckpointMeta {
    ModelConfig model;
    AdamWConfig optim;
    int64_t step_count = 0;
    int epoch = 0;
    double best_val_dice = -1.0;
    uint64_t seed = 0;
    bool has_optimizer = false;
};

namespace detail {

inline void put_u32(std::string& buf, uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_u64(std::string& buf, uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class Reader {
public:
    explicit Reader(const std::string& bytes) : bytes_(bytes) {}

    const unsigned char* take(size_t n, const char* what) {
        if (pos_ + n > bytes_.size()) {
            throw IoError(IoErrorKind::truncated,
                          std::string("checkpoint truncated while reading ") + what +
                              ": expected " + std::to_string(pos_ + n) + " bytes, got " +
                              std::to_string(bytes_.size()));
        }
        const auto* p = reinterpret_cast<const unsigned char*>(bytes_.data()) + pos_;
        pos_ += n;
        return p;
    }

    uint32_t u32(const char* what) {
        const auto* p = take(4, what);
        return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
               (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
    }

    uint64_t u64(const char* what) {
        const auto* p = take(8, what);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
        return v;
    }

    bool done() const { return pos_ == bytes_.size(); }
    size_t pos() const { return pos_; }

private:
    const std::string& bytes_;
    size_t pos_ = 0;
};

inline void append_tensor(std::string& buf, const std::string& name, const Tensor& t) {
    put_u32(buf, static_cast<uint32_t>(name.size()));
    buf.append(name);
    put_u32(buf, static_cast<uint32_t>(t.shape().rank()));
    for (int i = 0; i < t.shape().rank(); ++i) {
        put_u32(buf, static_cast<uint32_t>(t.shape()[i]));
    }
    for (int64_t i = 0; i < t.size(); ++i) {
        put_u64(buf, std::bit_cast<uint64_t>(t[i]));
    }
}

}  // namespace detail

inline std::string encode_checkpoint(const DALightModel& model, const AdamW* opt,
                                     const CheckpointMeta& meta) {
    nlohmann::json j;
    j["model"] = meta.model;
    j["optim"] = {{"beta1", meta.optim.beta1},
                  {"beta2", meta.optim.beta2},
                  {"weight_decay", meta.optim.weight_decay},
                  {"eps", meta.optim.eps}};
    j["step_count"] = opt ? opt->step_count() : meta.step_count;
    j["epoch"] = meta.epoch;
    j["best_val_dice"] = meta.best_val_dice;
    j["seed"] = meta.seed;
    j["has_optimizer"] = opt != nullptr;
    const std::string json_text = j.dump();

    std::string buf;
    buf.append(kCkptMagic, 4);
    buf.push_back(static_cast<char>(kCkptVersion));
    detail::put_u32(buf, static_cast<uint32_t>(json_text.size()));
    buf.append(json_text);

    const auto entries = nn::collect(model);
    uint32_t count = static_cast<uint32_t>(entries.size());
    if (opt) count += static_cast<uint32_t>(2 * opt->params().size());
    detail::put_u32(buf, count);
    for (const auto& e : entries) detail::append_tensor(buf, e.name, e.tensor);
    if (opt) {
        auto& optm = const_cast<AdamW&>(*opt);
        for (size_t i = 0; i < opt->params().size(); ++i) {
            detail::append_tensor(buf, "optim.m/" + opt->params()[i].name,
                                  optm.first_moment(i));
            detail::append_tensor(buf, "optim.v/" + opt->params()[i].name,
                                  optm.second_moment(i));
        }
    }
    return buf;
}

inline void save_checkpoint(const std::string& path, const DALightModel& model, const AdamW* opt,
                            const CheckpointMeta& meta) {
    const std::string bytes = encode_checkpoint(model, opt, meta);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(IoErrorKind::write_failed, "cannot write " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError(IoErrorKind::write_failed, "short write to " + path);
}

struct DecodedCheckpoint {
    CheckpointMeta meta;
    std::map<std::string, Tensor> tensors;
};

inline DecodedCheckpoint decode_checkpoint(const std::string& bytes) {
    detail::Reader reader(bytes);
    const auto* magic = reader.take(4, "magic");
    if (std::string_view(reinterpret_cast<const char*>(magic), 4) !=
        std::string_view(kCkptMagic, 4)) {
        throw IoError(IoErrorKind::bad_magic, "bad magic bytes; not a DLCK checkpoint");
    }
    const auto* version = reader.take(1, "version");
    if (*version != kCkptVersion) {
        throw IoError(IoErrorKind::bad_version,
                      "unsupported checkpoint version " + std::to_string(*version));
    }
    const uint32_t json_len = reader.u32("json length");
    const auto* json_bytes = reader.take(json_len, "config json");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(std::string_view(reinterpret_cast<const char*>(json_bytes),
                                                   json_len));
    } catch (const nlohmann::json::exception& e) {
        throw IoError(IoErrorKind::truncated, std::string("checkpoint config unparsable: ") +
                                                  e.what());
    }

    DecodedCheckpoint out;
    out.meta.model = j.at("model").get<ModelConfig>();
    out.meta.optim.beta1 = j["optim"].value("beta1", 0.9);
    out.meta.optim.beta2 = j["optim"].value("beta2", 0.999);
    out.meta.optim.weight_decay = j["optim"].value("weight_decay", 0.01);
    out.meta.optim.eps = j["optim"].value("eps", 1e-8);
    out.meta.step_count = j.value("step_count", int64_t{0});
    out.meta.epoch = j.value("epoch", 0);
    out.meta.best_val_dice = j.value("best_val_dice", -1.0);
    out.meta.seed = j.value("seed", uint64_t{0});
    out.meta.has_optimizer = j.value("has_optimizer", false);

    const uint32_t count = reader.u32("tensor count");
    for (uint32_t t = 0; t < count; ++t) {
        const uint32_t name_len = reader.u32("tensor name length");
        const auto* name_bytes = reader.take(name_len, "tensor name");
        std::string name(reinterpret_cast<const char*>(name_bytes), name_len);
        const uint32_t rank = reader.u32("tensor rank");
        if (rank > 8) throw IoError(IoErrorKind::dimension_overflow, "implausible tensor rank");
        std::vector<int64_t> dims;
        for (uint32_t r = 0; r < rank; ++r) {
            dims.push_back(static_cast<int64_t>(reader.u32("tensor extent")));
        }
        Tensor tensor{Shape(dims)};
        for (int64_t i = 0; i < tensor.size(); ++i) {
            tensor[i] = std::bit_cast<double>(reader.u64("tensor payload"));
        }
        out.tensors.emplace(std::move(name), std::move(tensor));
    }
    if (!reader.done()) {
        throw IoError(IoErrorKind::truncated, "checkpoint has " +
                                                  std::to_string(bytes.size() - reader.pos()) +
                                                  " trailing bytes");
    }
    return out;
}

// Copies the named tensors into the model parameters; the name sets must match
// exactly, otherwise the offenders are listed.
inline void restore_model_params(DALightModel& model,
                                 const std::map<std::string, Tensor>& tensors) {
    std::string missing, extra;
    const auto entries = nn::collect(model);
    for (const auto& e : entries) {
        if (tensors.find(e.name) == tensors.end()) missing += " " + e.name;
    }
    std::map<std::string, const Tensor*> wanted;
    for (const auto& e : entries) wanted.emplace(e.name, &e.tensor);
    for (const auto& [name, tensor] : tensors) {
        if (name.rfind("optim.", 0) == 0) continue;
        if (wanted.find(name) == wanted.end()) extra += " " + name;
    }
    if (!missing.empty() || !extra.empty()) {
        throw IoError(IoErrorKind::name_mismatch,
                      "checkpoint does not match the model;" +
                          (missing.empty() ? std::string() : " missing:" + missing) +
                          (extra.empty() ? std::string() : " unexpected:" + extra));
    }
    for (const auto& e : entries) {
        const Tensor& src = tensors.at(e.name);
        if (src.shape() != e.tensor.shape()) {
            throw IoError(IoErrorKind::name_mismatch, "checkpoint tensor " + e.name +
                                                          " has shape " + src.shape().str() +
                                                          ", expected " + e.tensor.shape().str());
        }
        std::copy(src.data(), src.data() + src.size(), e.tensor.data());
    }
}

struct LoadedCheckpoint {
    CheckpointMeta meta;
    DALightModel model;
    std::optional<AdamW> optimizer;
};

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(IoErrorKind::missing_file, "cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    DecodedCheckpoint decoded = decode_checkpoint(bytes);

    LoadedCheckpoint loaded{decoded.meta, DALightModel(decoded.meta.model, decoded.meta.seed),
                            std::nullopt};
    restore_model_params(loaded.model, decoded.tensors);
    if (decoded.meta.has_optimizer) {
        loaded.optimizer.emplace(nn::collect(loaded.model), decoded.meta.optim);
        loaded.optimizer->set_step_count(decoded.meta.step_count);
        auto& opt = *loaded.optimizer;
        for (size_t i = 0; i < opt.params().size(); ++i) {
            const std::string& pname = opt.params()[i].name;
            auto m_it = decoded.tensors.find("optim.m/" + pname);
            auto v_it = decoded.tensors.find("optim.v/" + pname);
            if (m_it == decoded.tensors.end() || v_it == decoded.tensors.end()) {
                throw IoError(IoErrorKind::name_mismatch,
                              "checkpoint lacks optimizer state for " + pname);
            }
            std::copy(m_it->second.data(), m_it->second.data() + m_it->second.size(),
                      opt.first_moment(i).data());
            std::copy(v_it->second.data(), v_it->second.data() + v_it->second.size(),
                      opt.second_moment(i).data());
        }
    }
    return loaded;
}

// Restores parameters into an existing model; throws name_mismatch when the
// checkpoint was written for a different configuration.
inline void restore_into(DALightModel& model, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(IoErrorKind::missing_file, "cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    restore_model_params(model, decode_checkpoint(bytes).tensors);
}

}  // namespace dalight::train
