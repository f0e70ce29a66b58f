#include "sfdlm/training/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "json.hpp"
#include "sfdlm/errors.hpp"

namespace sfdlm::training {

namespace {

using nlohmann::json;

class Writer {
public:
    void bytes(std::string_view s) { out_.append(s); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void f64s(std::span<const double> vs) {
        for (double v : vs) f64(v);
    }
    std::string take() { return std::move(out_); }

private:
    std::string out_;
};

class Reader {
public:
    explicit Reader(std::string_view in) : in_(in) {}

    std::string_view bytes(std::size_t n) {
        need(n);
        auto s = in_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::uint64_t uint(int width) {
        need(static_cast<std::size_t>(width));
        std::uint64_t v = 0;
        for (int i = 0; i < width; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
        pos_ += static_cast<std::size_t>(width);
        return v;
    }
    std::uint32_t u32() { return static_cast<std::uint32_t>(uint(4)); }
    std::uint64_t u64() { return uint(8); }
    double f64() { return std::bit_cast<double>(u64()); }
    void f64s(std::span<double> out) {
        need(out.size() * 8);
        for (double& v : out) v = f64();
    }
    bool done() const { return pos_ == in_.size(); }

private:
    void need(std::size_t n) const {
        if (in_.size() - pos_ < n) throw InputError("checkpoint truncated at byte " + std::to_string(pos_));
    }

    std::string_view in_;
    std::size_t pos_ = 0;
};

json config_json(const model::ModelConfig& c) {
    return {{"vocab_size", c.vocab_size},         {"seq_len", c.seq_len},
            {"embed_dim", c.embed_dim},           {"unet_levels", c.unet_levels},
            {"blocks_per_level", c.blocks_per_level}, {"ssm_state_dim", c.ssm_state_dim},
            {"ssm_kernel_len", c.ssm_kernel_len}, {"fourier_hidden", c.fourier_hidden},
            {"diffusion_steps", c.diffusion_steps}, {"fourier_after_ssm", c.fourier_after_ssm}};
}

model::ModelConfig config_from(const json& j) {
    model::ModelConfig c;
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.seq_len = j.at("seq_len").get<std::size_t>();
    c.embed_dim = j.at("embed_dim").get<std::size_t>();
    c.unet_levels = j.at("unet_levels").get<std::size_t>();
    c.blocks_per_level = j.at("blocks_per_level").get<std::size_t>();
    c.ssm_state_dim = j.at("ssm_state_dim").get<std::size_t>();
    c.ssm_kernel_len = j.at("ssm_kernel_len").get<std::size_t>();
    c.fourier_hidden = j.at("fourier_hidden").get<std::size_t>();
    c.diffusion_steps = j.at("diffusion_steps").get<std::size_t>();
    c.fourier_after_ssm = j.at("fourier_after_ssm").get<bool>();
    return c;
}

json optimizer_json(const OptimizerState& o) {
    const auto& c = o.config;
    return {{"lr", c.lr},
            {"beta1", c.beta1},
            {"beta2", c.beta2},
            {"eps", c.eps},
            {"weight_decay", c.weight_decay},
            {"warmup_steps", c.warmup_steps},
            {"clip_norm", c.clip_norm},
            {"step", o.step}};
}

AdamWConfig adamw_from(const json& j) {
    AdamWConfig c;
    c.lr = j.at("lr").get<double>();
    c.beta1 = j.at("beta1").get<double>();
    c.beta2 = j.at("beta2").get<double>();
    c.eps = j.at("eps").get<double>();
    c.weight_decay = j.at("weight_decay").get<double>();
    c.warmup_steps = j.at("warmup_steps").get<std::uint64_t>();
    c.clip_norm = j.at("clip_norm").get<double>();
    return c;
}

}  // namespace

std::string serialize_checkpoint(const model::Model& model, const text::Vocab& vocab,
                                 const diffusion::NoiseSchedule& schedule, const OptimizerState& optimizer,
                                 std::uint64_t global_step) {
    const auto& params = model.parameters();
    if (optimizer.m.size() != params.size() || optimizer.v.size() != params.size())
        throw std::invalid_argument("optimizer state does not match the model");
    if (vocab.size() != model.config().vocab_size)
        throw std::invalid_argument("vocabulary size differs from the model's vocab_size");

    json header = {{"model", config_json(model.config())},
                   {"vocab", json::parse(vocab.to_json())},
                   {"betas", schedule.betas()},
                   {"global_step", global_step},
                   {"optimizer", optimizer_json(optimizer)}};
    const std::string text = header.dump();

    Writer w;
    w.bytes({kCheckpointMagic, 4});
    w.u32(kCheckpointVersion);
    w.u64(text.size());
    w.bytes(text);
    w.u64(params.size());
    for (const auto& p : params) {
        w.u32(static_cast<std::uint32_t>(p.name.size()));
        w.bytes(p.name);
        w.u32(static_cast<std::uint32_t>(p.value.rank()));
        for (auto d : p.value.shape()) w.u64(d);
        w.f64s(p.value.data());
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        w.f64s(optimizer.m[i]);
        w.f64s(optimizer.v[i]);
    }
    return w.take();
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
    Reader r(bytes);
    if (r.bytes(4) != std::string_view(kCheckpointMagic, 4)) throw InputError("not a checkpoint: bad magic bytes");
    const auto version = r.u32();
    if (version != kCheckpointVersion)
        throw InputError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                         std::to_string(kCheckpointVersion) + ")");
    const auto header_len = r.u64();
    json header;
    try {
        header = json::parse(r.bytes(header_len));
    } catch (const json::exception& e) {
        throw InputError(std::string("checkpoint header: ") + e.what());
    }

    try {
        const auto config = config_from(header.at("model"));
        auto vocab = text::Vocab::from_json(header.at("vocab").dump());
        diffusion::NoiseSchedule schedule(header.at("betas").get<std::vector<double>>());
        if (vocab.size() != config.vocab_size) throw InputError("checkpoint vocabulary size differs from model config");
        if (schedule.steps() != config.diffusion_steps) throw InputError("checkpoint schedule length differs from T");

        Checkpoint ck{model::Model(config, 0), std::move(vocab), std::move(schedule), {}, 0};
        ck.global_step = header.at("global_step").get<std::uint64_t>();
        ck.optimizer = make_optimizer(ck.model, adamw_from(header.at("optimizer")));
        ck.optimizer.step = header.at("optimizer").at("step").get<std::uint64_t>();

        const auto& params = ck.model.parameters();
        const auto count = r.u64();
        if (count != params.size())
            throw InputError("checkpoint has " + std::to_string(count) + " parameters, config implies " +
                             std::to_string(params.size()));
        for (const auto& p : params) {
            const auto name_len = r.u32();
            const auto name = r.bytes(name_len);
            if (name != p.name) throw InputError("checkpoint parameter '" + std::string(name) + "' where '" + p.name + "' expected");
            numerics::Shape shape(r.u32());
            for (auto& d : shape) d = r.u64();
            if (shape != p.value.shape())
                throw InputError("checkpoint parameter '" + p.name + "' has shape " + numerics::shape_str(shape) +
                                 ", config implies " + numerics::shape_str(p.value.shape()));
            auto value = p.value;
            r.f64s(value.mutable_data());
        }
        for (std::size_t i = 0; i < params.size(); ++i) {
            r.f64s(ck.optimizer.m[i]);
            r.f64s(ck.optimizer.v[i]);
        }
        if (!r.done()) throw InputError("checkpoint has trailing bytes");
        return ck;
    } catch (const json::exception& e) {
        throw InputError(std::string("checkpoint header: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw InputError(std::string("checkpoint: ") + e.what());
    }
}

void save_checkpoint(const std::string& path, const model::Model& model, const text::Vocab& vocab,
                     const diffusion::NoiseSchedule& schedule, const OptimizerState& optimizer,
                     std::uint64_t global_step) {
    const auto bytes = serialize_checkpoint(model, vocab, schedule, optimizer, global_step);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write checkpoint " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw InputError("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open checkpoint " + path);
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return deserialize_checkpoint(bytes);
    } catch (const InputError& e) {
        throw InputError(path + ": " + e.what());
    }
}

}  // namespace sfdlm::training
