#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace modiff {

// Reproducibility record written beside every CLI output. Deliberately
// timestamp-free: rerunning a command with the same config and seed must
// reproduce the manifest byte for byte.
struct RunManifest {
    std::string command;
    std::vector<std::pair<std::string, std::string>> config;  // effective key=value settings
    std::uint64_t seed = 0;
    std::string schedule_hash;  // hex, empty when no schedule is involved
    std::string checkpoint;     // path, empty when no model is involved
    std::vector<std::pair<std::string, std::string>> inputs;  // (path, content hash)
    std::vector<std::string> outputs;
};

// FNV-1a over the file bytes; the content identity used for inputs.
std::uint64_t hash_file(const std::string& path);
std::string hash_hex(std::uint64_t h);

void write_manifest(const RunManifest& m, const std::string& path);

}  // namespace modiff
