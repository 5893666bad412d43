#include "modiff/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

namespace modiff {
namespace {

constexpr char kCkptMagic[8] = {'M', 'D', 'F', 'C', 'K', 'P', 'T', '1'};

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::istream& is, T& v, const std::string& path) {
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("checkpoint: truncated file " + path);
}

std::string hash_hex(std::uint64_t h) {
    char buf[19];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

nlohmann::json arch_json(const TransformerConfig& a) {
    return {{"control_dim", a.control_dim}, {"d_model", a.d_model}, {"heads", a.heads},
            {"motion_dim", a.motion_dim},   {"n_dec", a.n_dec},     {"n_enc_c", a.n_enc_c},
            {"n_enc_m", a.n_enc_m},         {"n_x", a.n_x},         {"t_h", a.t_h},
            {"t_p", a.t_p}};
}

TransformerConfig arch_from_json(const nlohmann::json& j) {
    TransformerConfig a;
    a.control_dim = j.at("control_dim").get<std::size_t>();
    a.d_model = j.at("d_model").get<std::size_t>();
    a.heads = j.at("heads").get<std::size_t>();
    a.motion_dim = j.at("motion_dim").get<std::size_t>();
    a.n_dec = j.at("n_dec").get<std::size_t>();
    a.n_enc_c = j.at("n_enc_c").get<std::size_t>();
    a.n_enc_m = j.at("n_enc_m").get<std::size_t>();
    a.n_x = j.at("n_x").get<std::size_t>();
    a.t_h = j.at("t_h").get<std::size_t>();
    a.t_p = j.at("t_p").get<std::size_t>();
    return a;
}

}  // namespace

void save_checkpoint(const std::string& path, const TransformerDenoiser& denoiser,
                     const ScheduleConfig& schedule, const NormStats& norm) {
    const TinyTransformer<float>& net = denoiser.net();
    std::uint64_t sched_hash = schedule.build().content_hash();

    nlohmann::json meta;
    meta["arch"] = arch_json(net.config());
    meta["norm"] = {{"control_mu", norm.control_mu},
                    {"control_sigma", norm.control_sigma},
                    {"motion_mu", norm.motion_mu},
                    {"motion_sigma", norm.motion_sigma}};
    meta["param_count"] = net.parameter_count();
    meta["schedule"] = {{"beta_end", schedule.beta_end},
                        {"beta_start", schedule.beta_start},
                        {"hash", hash_hex(sched_hash)},
                        {"kind", schedule.kind},
                        {"steps", schedule.steps}};
    meta["train_step"] = net.step();
    std::string blob = meta.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
    out.write(kCkptMagic, sizeof(kCkptMagic));
    write_pod(out, std::uint32_t(1));  // format version
    write_pod(out, std::uint64_t(blob.size()));
    out.write(blob.data(), std::streamsize(blob.size()));
    for (std::size_t i = 0; i < net.tensor_count(); ++i) {
        const Matrix<float>& t = net.tensor(i);
        out.write(reinterpret_cast<const char*>(t.data()),
                  std::streamsize(t.size() * sizeof(float)));
    }
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCkptMagic, sizeof(magic)) != 0)
        throw std::runtime_error("checkpoint: " + path + " is not a checkpoint file");
    std::uint32_t version = 0;
    read_pod(in, version, path);
    if (version != 1)
        throw std::runtime_error("checkpoint: unsupported format version " +
                                 std::to_string(version) + " in " + path);
    std::uint64_t json_len = 0;
    read_pod(in, json_len, path);
    std::string blob(json_len, '\0');
    in.read(blob.data(), std::streamsize(json_len));
    if (!in) throw std::runtime_error("checkpoint: truncated file " + path);

    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(blob);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("checkpoint: bad metadata in " + path + ": " + e.what());
    }

    LoadedCheckpoint loaded;
    try {
        loaded.meta.arch = arch_from_json(meta.at("arch"));
        const auto& js = meta.at("schedule");
        loaded.meta.schedule.steps = js.at("steps").get<std::size_t>();
        loaded.meta.schedule.beta_start = js.at("beta_start").get<double>();
        loaded.meta.schedule.beta_end = js.at("beta_end").get<double>();
        loaded.meta.schedule.kind = js.at("kind").get<std::string>();
        loaded.meta.train_step = meta.at("train_step").get<std::size_t>();
        const auto& jn = meta.at("norm");
        loaded.meta.norm.control_mu = jn.at("control_mu").get<std::vector<double>>();
        loaded.meta.norm.control_sigma = jn.at("control_sigma").get<std::vector<double>>();
        loaded.meta.norm.motion_mu = jn.at("motion_mu").get<std::vector<double>>();
        loaded.meta.norm.motion_sigma = jn.at("motion_sigma").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("checkpoint: incomplete metadata in " + path + ": " + e.what());
    }
    loaded.meta.schedule_hash = loaded.meta.schedule.build().content_hash();

    loaded.denoiser = std::make_unique<TransformerDenoiser>(loaded.meta.arch, 0);
    TinyTransformer<float>& net = loaded.denoiser->net();
    if (meta.at("param_count").get<std::size_t>() != net.parameter_count())
        throw std::runtime_error("checkpoint: parameter count mismatch in " + path);
    for (std::size_t i = 0; i < net.tensor_count(); ++i) {
        Matrix<float>& t = net.tensor(i);
        in.read(reinterpret_cast<char*>(t.data()), std::streamsize(t.size() * sizeof(float)));
        if (!in)
            throw std::runtime_error("checkpoint: weights truncated at " + net.tensor_name(i) +
                                     " in " + path);
    }
    in.peek();
    if (!in.eof()) throw std::runtime_error("checkpoint: trailing bytes in " + path);
    net.set_step(loaded.meta.train_step);
    return loaded;
}

}  // namespace modiff
