#pragma once

#include <filesystem>
#include <vector>

#include "qks/checkpoint.hpp"
#include "qks/manifest.hpp"
#include "qks/model.hpp"
#include "qks/optimizer.hpp"
#include "qks/schedule.hpp"

namespace qks {

struct TrainConfig {
    std::size_t steps = 5000;
    std::size_t batch_size = 64;
    AdamWConfig adamw;       // lr defaults to 1e-5
    PlateauConfig plateau;
    LossKind loss_kind = LossKind::classification;
    std::uint64_t seed = 0;
    std::size_t checkpoint_every = 0; // 0: final checkpoint only
    std::size_t threads = 1;
    std::string run_config_hash;
};

struct TrainResult {
    std::filesystem::path checkpoint_dir;
    std::filesystem::path loss_log;
    std::size_t steps_run = 0;
    double final_loss = 0.0;
    std::vector<double> losses; // one entry per step, mirrors the CSV
};

/// Deterministic training loop: shuffled batches, per-image forward /
/// backward with order-fixed gradient accumulation (identical results for
/// any thread count), AdamW, plateau lr schedule, CSV loss log
/// (step,lr,loss), periodic + final checkpoints. Aborts on NaN loss,
/// leaving the last periodic checkpoint in place.
TrainResult train(const DatasetManifest& manifest, const ModelConfig& model_cfg,
                  const TrainConfig& train_cfg, const std::filesystem::path& out_dir);

} // namespace qks
