#include "modiff/manifest.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "modiff/rng.hpp"

namespace modiff {

std::uint64_t hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("manifest: cannot read " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string bytes = buf.str();
    return fnv1a64_bytes(bytes.data(), bytes.size());
}

std::string hash_hex(std::uint64_t h) {
    char buf[19];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_manifest(const RunManifest& m, const std::string& path) {
    nlohmann::json j;
    j["command"] = m.command;
    nlohmann::json cfg = nlohmann::json::object();
    for (const auto& [key, value] : m.config) cfg[key] = value;
    j["config"] = cfg;
    j["seed"] = m.seed;
    j["schedule_hash"] = m.schedule_hash;
    j["checkpoint"] = m.checkpoint;
    nlohmann::json inputs = nlohmann::json::array();
    for (const auto& [p, h] : m.inputs) inputs.push_back({{"hash", h}, {"path", p}});
    j["inputs"] = inputs;
    j["outputs"] = m.outputs;

    std::ofstream out(path);
    if (!out) throw std::runtime_error("manifest: cannot write " + path);
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("manifest: write failed for " + path);
}

}  // namespace modiff
