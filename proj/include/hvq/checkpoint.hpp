#pragma once

#include <filesystem>
#include <string>

#include "hvq/codebook.hpp"
#include "hvq/tcn.hpp"
#include "hvq/train.hpp"

namespace hvq {

// Full training-equivalent state for one activity: model parameters together
// with optimizer moments, codebooks with EMA masses, and the training RNG so
// a resumed run continues bit-exactly.
struct Checkpoint {
    std::string activity;
    TrainConfig config;
    TcnModel model;
    std::vector<Codebook> books;
    std::string rng_state;
    int epochs_done = 0;
};

// Single file: "HVQC" magic, u32 format version, u32 JSON length, JSON header
// (configs + manifest + rng state), then parameter and codebook tensors in
// the HVQF framing at float64. Writes are atomic (temp file + rename).
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace hvq
