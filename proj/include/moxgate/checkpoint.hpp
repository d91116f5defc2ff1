#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "moxgate/model.hpp"
#include "moxgate/optimizer.hpp"

namespace moxgate {

// Versioned JSON container for a trained model: config, every parameter
// array (shape + row-major float64), optimizer moments, rng state, and the
// training step counter. Doubles round-trip bit-exactly.
struct CheckpointData {
    Model model;
    bool has_optimizer = false;
    AdamWConfig optimizer_config;
    std::vector<std::vector<double>> first_moments;   // per named param
    std::vector<std::vector<double>> second_moments;  // per named param
    std::uint64_t optimizer_step = 0;
    std::string rng_state;
    std::uint64_t train_step = 0;
};

void save_checkpoint(const std::string& path, const Model& model, const AdamW* optimizer,
                     const std::string& rng_state, std::uint64_t train_step);

CheckpointData load_checkpoint(const std::string& path);

// Rebuilds an AdamW bound to the checkpoint's model with restored moments.
AdamW restore_optimizer(CheckpointData& ckpt);

}  // namespace moxgate
