#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include "cria/model.hpp"
#include "cria/pretrain.hpp"

namespace cria {

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct LoadedCheckpoint {
    ModelParams model;
    std::optional<HeadParams> head;
    AdamConfig opt_config;
    std::int64_t opt_steps = 0;
    std::map<std::string, AdamSlot> opt_slots;  // empty when saved without an optimizer
    std::array<std::uint64_t, 4> rng_state{};
    std::int64_t step = 0;
};

// Binary checkpoint: hyperparameters, every named parameter tensor,
// optimizer moments, RNG state, step counter. save -> load -> save is
// byte-identical; version or structure mismatch fails loudly.
void save_checkpoint(const std::string& path, ModelParams& model, HeadParams* head, const Adam* opt,
                     const Rng& rng, std::int64_t step);

LoadedCheckpoint load_checkpoint(const std::string& path);

// Rebuilds an optimizer from a loaded checkpoint, attaching model (and
// head, when present) parameters in visit order.
Adam restore_optimizer(LoadedCheckpoint& ck);

}  // namespace cria
