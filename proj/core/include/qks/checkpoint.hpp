#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "qks/model.hpp"
#include "qks/optimizer.hpp"

namespace qks {

struct CheckpointMeta {
    std::size_t step = 0;
    ModelConfig model;
    LossKind loss_kind = LossKind::classification;
    std::uint64_t seed = 0;
    double lr = 0.0;
    std::string run_config_hash; // CLI-level content hash, empty for API runs
};

/// Checkpoint layout: checkpoint.json metadata (including the model config
/// hash), params/<name>.qtf per trainable tensor plus spatial_pos, and
/// optim/<name>.{m,v}.qtf moment tensors when an optimizer is attached.
void save_checkpoint(const std::filesystem::path& dir, const QksParameters<float>& params,
                     const AdamW<float>* optimizer, const CheckpointMeta& meta);

struct Checkpoint {
    QksParameters<float> params;
    CheckpointMeta meta;
    std::vector<Tensor<float>> optim_m, optim_v;
    std::size_t optim_steps = 0;
    bool has_optimizer = false;
};

/// Loads and verifies: the stored model config hash must match the hash
/// recomputed from the stored config.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

} // namespace qks
