#include "cria/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace cria {

namespace {

constexpr char kMagic[4] = {'C', 'R', 'C', 'K'};
constexpr std::uint16_t kVersion = 1;

template <typename T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

void put_str(std::string& out, const std::string& s) {
    put<std::uint16_t>(out, static_cast<std::uint16_t>(s.size()));
    out.append(s);
}

template <typename T>
T get(const std::string& in, std::size_t& off, const char* what) {
    if (off + sizeof(T) > in.size())
        throw CheckpointError("checkpoint: truncated " + std::string(what) + " at byte " + std::to_string(off));
    T v;
    std::memcpy(&v, in.data() + off, sizeof(T));
    off += sizeof(T);
    return v;
}

std::string get_str(const std::string& in, std::size_t& off, const char* what) {
    const auto len = get<std::uint16_t>(in, off, what);
    if (off + len > in.size())
        throw CheckpointError("checkpoint: truncated " + std::string(what) + " at byte " + std::to_string(off));
    std::string s = in.substr(off, len);
    off += len;
    return s;
}

void put_doubles(std::string& out, const std::vector<double>& v) {
    put<std::uint64_t>(out, v.size());
    out.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
}

std::vector<double> get_doubles(const std::string& in, std::size_t& off, const char* what) {
    const auto n = get<std::uint64_t>(in, off, what);
    if (off + n * sizeof(double) > in.size())
        throw CheckpointError("checkpoint: truncated " + std::string(what) + " at byte " + std::to_string(off));
    std::vector<double> v(n);
    std::memcpy(v.data(), in.data() + off, n * sizeof(double));
    off += n * sizeof(double);
    return v;
}

void put_tensor(std::string& out, const std::string& name, const Tensor& t) {
    put_str(out, name);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.rank()));
    for (int d : t.shape()) put<std::int32_t>(out, d);
    put_doubles(out, t.data());
}

}  // namespace

void save_checkpoint(const std::string& path, ModelParams& model, HeadParams* head, const Adam* opt,
                     const Rng& rng, std::int64_t step) {
    std::string out;
    out.append(kMagic, 4);
    put<std::uint16_t>(out, kVersion);

    put<std::int32_t>(out, model.cfg.dim);
    put<std::int32_t>(out, model.cfg.heads);
    put<std::int32_t>(out, model.cfg.layers);
    put<std::int32_t>(out, model.cfg.c_max);
    put<std::int32_t>(out, model.cfg.rope_start_index);
    put<std::uint8_t>(out, model.cfg.rope_before_embed ? 1 : 0);
    put<std::int32_t>(out, model.cfg.purify.k_c);
    put<std::int32_t>(out, model.cfg.purify.k_t);

    put<std::uint8_t>(out, head ? 1 : 0);
    if (head) {
        put<std::int32_t>(out, head->fc1_w.cols());
        put<std::int32_t>(out, head->num_classes());
        put<double>(out, head->dropout_rate);
    }

    std::uint32_t count = 0;
    model.visit([&](const std::string&, Tensor&) { ++count; });
    if (head) head->visit([&](const std::string&, Tensor&) { ++count; });
    put<std::uint32_t>(out, count);
    model.visit([&](const std::string& name, Tensor& t) { put_tensor(out, name, t); });
    if (head) head->visit([&](const std::string& name, Tensor& t) { put_tensor(out, name, t); });

    put<std::uint8_t>(out, opt ? 1 : 0);
    if (opt) {
        put<std::int64_t>(out, opt->steps());
        put<double>(out, opt->config().lr);
        put<double>(out, opt->config().beta1);
        put<double>(out, opt->config().beta2);
        put<double>(out, opt->config().eps);
        auto& slots = const_cast<Adam*>(opt)->slots();
        put<std::uint32_t>(out, static_cast<std::uint32_t>(slots.size()));
        for (auto& [name, slot] : slots) {
            put_str(out, name);
            put_doubles(out, slot.m);
            put_doubles(out, slot.v);
        }
    }

    for (std::uint64_t w : rng.state()) put<std::uint64_t>(out, w);
    put<std::int64_t>(out, step);

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointError("checkpoint: cannot open '" + path + "' for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw CheckpointError("checkpoint: short write to '" + path + "'");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CheckpointError("checkpoint: cannot open '" + path + "'");
    std::string in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (in.size() < 6 || std::memcmp(in.data(), kMagic, 4) != 0)
        throw CheckpointError("checkpoint: bad magic in '" + path + "'");
    std::size_t off = 4;
    const auto version = get<std::uint16_t>(in, off, "version");
    if (version != kVersion)
        throw CheckpointError("checkpoint: unsupported version " + std::to_string(version) + " (expected " +
                              std::to_string(kVersion) + ")");

    ModelConfig cfg;
    cfg.dim = get<std::int32_t>(in, off, "dim");
    cfg.heads = get<std::int32_t>(in, off, "heads");
    cfg.layers = get<std::int32_t>(in, off, "layers");
    cfg.c_max = get<std::int32_t>(in, off, "c_max");
    cfg.rope_start_index = get<std::int32_t>(in, off, "rope start index");
    cfg.rope_before_embed = get<std::uint8_t>(in, off, "rope order flag") != 0;
    cfg.purify.k_c = get<std::int32_t>(in, off, "purify k_c");
    cfg.purify.k_t = get<std::int32_t>(in, off, "purify k_t");

    LoadedCheckpoint ck;
    Rng scratch(0);  // structures are allocated here, then overwritten below
    ck.model = init_model(cfg, scratch);
    const bool has_head = get<std::uint8_t>(in, off, "head flag") != 0;
    if (has_head) {
        const int hidden = get<std::int32_t>(in, off, "head hidden");
        const int classes = get<std::int32_t>(in, off, "head classes");
        const double drop = get<double>(in, off, "head dropout");
        ck.head = init_head(cfg.dim, hidden, classes, drop, scratch);
    }

    std::map<std::string, Tensor> by_name;
    ck.model.visit([&](const std::string& name, Tensor& t) { by_name.emplace(name, t); });
    if (ck.head) ck.head->visit([&](const std::string& name, Tensor& t) { by_name.emplace(name, t); });

    const auto count = get<std::uint32_t>(in, off, "tensor count");
    if (count != by_name.size())
        throw CheckpointError("checkpoint: tensor count " + std::to_string(count) + " does not match the " +
                              std::to_string(by_name.size()) + " expected for these hyperparameters");
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::string name = get_str(in, off, "tensor name");
        auto it = by_name.find(name);
        if (it == by_name.end()) throw CheckpointError("checkpoint: unknown tensor '" + name + "'");
        const int rank = get<std::uint8_t>(in, off, "tensor rank");
        std::vector<int> shape(rank);
        for (int d = 0; d < rank; ++d) shape[d] = get<std::int32_t>(in, off, "tensor dim");
        if (shape != it->second.shape())
            throw CheckpointError("checkpoint: tensor '" + name + "' has shape " + shape_str(shape) +
                                  ", expected " + shape_str(it->second.shape()));
        it->second.impl->data = get_doubles(in, off, "tensor data");
        if (it->second.impl->data.size() != numel(shape))
            throw CheckpointError("checkpoint: tensor '" + name + "' data length mismatch");
    }

    const bool has_opt = get<std::uint8_t>(in, off, "optimizer flag") != 0;
    if (has_opt) {
        ck.opt_steps = get<std::int64_t>(in, off, "optimizer steps");
        ck.opt_config.lr = get<double>(in, off, "lr");
        ck.opt_config.beta1 = get<double>(in, off, "beta1");
        ck.opt_config.beta2 = get<double>(in, off, "beta2");
        ck.opt_config.eps = get<double>(in, off, "eps");
        const auto slot_count = get<std::uint32_t>(in, off, "moment count");
        for (std::uint32_t i = 0; i < slot_count; ++i) {
            const std::string name = get_str(in, off, "moment name");
            AdamSlot slot;
            slot.m = get_doubles(in, off, "first moment");
            slot.v = get_doubles(in, off, "second moment");
            ck.opt_slots.emplace(name, std::move(slot));
        }
    }

    for (auto& w : ck.rng_state) w = get<std::uint64_t>(in, off, "rng state");
    ck.step = get<std::int64_t>(in, off, "step");
    if (off != in.size())
        throw CheckpointError("checkpoint: " + std::to_string(in.size() - off) + " trailing bytes in '" + path +
                              "'");
    return ck;
}

Adam restore_optimizer(LoadedCheckpoint& ck) {
    Adam opt(ck.opt_config);
    ck.model.visit([&](const std::string& name, Tensor& t) { opt.attach(name, t); });
    if (ck.head) ck.head->visit([&](const std::string& name, Tensor& t) { opt.attach(name, t); });
    opt.set_steps(ck.opt_steps);
    for (auto& [name, slot] : ck.opt_slots) {
        auto it = opt.slots().find(name);
        if (it == opt.slots().end())
            throw CheckpointError("checkpoint: optimizer moment for unknown parameter '" + name + "'");
        if (it->second.m.size() != slot.m.size() || it->second.v.size() != slot.v.size())
            throw CheckpointError("checkpoint: optimizer moment size mismatch for '" + name + "'");
        it->second = slot;
    }
    return opt;
}

}  // namespace cria
