#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "modiff/engine.hpp"
#include "modiff/schedule.hpp"
#include "modiff/transformer.hpp"

namespace modiff {

// Everything needed to rebuild a model besides the weights themselves.
struct CheckpointMeta {
    TransformerConfig arch;
    ScheduleConfig schedule;
    std::uint64_t schedule_hash = 0;
    std::size_t train_step = 0;
    NormStats norm;
};

// Single binary file: magic "MDFCKPT1", a u32 format version, a u64 JSON
// length, the JSON metadata block, then every parameter tensor as raw
// little-endian 32-bit floats in registry (declaration) order.
void save_checkpoint(const std::string& path, const TransformerDenoiser& denoiser,
                     const ScheduleConfig& schedule, const NormStats& norm);

struct LoadedCheckpoint {
    CheckpointMeta meta;
    std::unique_ptr<TransformerDenoiser> denoiser;
};

// Rebuilds the model from the stored architecture and weights. The Adam
// step counter resumes from train_step; moment accumulators start fresh.
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace modiff
