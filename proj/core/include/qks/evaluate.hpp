#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>

#include "qks/checkpoint.hpp"
#include "qks/manifest.hpp"
#include "qks/metrics.hpp"
#include "qks/model.hpp"

namespace qks {

enum class EvalTask : std::uint8_t {
    zsl, // candidates = unseen labels only
    gzsl // candidates = seen and unseen labels
};

EvalTask eval_task_from_string(const std::string& s);
std::string to_string(EvalTask t);

struct EvalReport {
    EvalTask task = EvalTask::zsl;
    double map = 0.0;
    struct AtK {
        std::size_t k;
        double precision, recall, f1;
    };
    std::vector<AtK> topk;
    std::vector<std::size_t> candidates;
    std::vector<double> per_label_ap; // aligned with candidates, NaN = skipped
    std::vector<std::size_t> skipped_labels;
    std::size_t n_images = 0;

    std::string to_json() const;
    void print_table(std::ostream& os) const;
};

/// Metric stage on a precomputed [n_images x n_labels] score matrix.
EvalReport compute_report(const Tensor<double>& scores,
                          const std::vector<std::vector<std::size_t>>& annotations,
                          std::vector<std::size_t> candidates, std::span<const std::size_t> ks,
                          EvalTask task);

struct SplitInference {
    Tensor<double> scores;                            // [n_images x n_labels]
    std::vector<std::vector<std::size_t>> argmax;     // per image, per label
};

/// Forward pass over every image of a split; parallel over images with
/// fixed-order aggregation.
SplitInference score_split(const QksParameters<float>& params, const ModelConfig& cfg,
                           const DatasetManifest& manifest, Split split, std::size_t threads);

/// Full protocol: forward the test split once, restrict to the task's
/// candidate labels, compute mAP and P/R/F1 at each K.
EvalReport evaluate(const Checkpoint& checkpoint, const DatasetManifest& manifest, EvalTask task,
                    std::span<const std::size_t> ks, std::size_t threads = 1);
EvalReport evaluate(const std::filesystem::path& checkpoint_dir, const DatasetManifest& manifest,
                    EvalTask task, std::span<const std::size_t> ks, std::size_t threads = 1);

struct AttentionMap {
    Tensor<float> normalized; // [H x W] min-max scaled to [0,1]
    Tensor<float> raw;        // [H x W] head-mean attention, sums to 1
    std::size_t token = 0;    // argmax query token for the label
    bool degenerate = false;  // constant map; normalized emitted as zeros
};

/// Final-layer cross-attention of the label's argmax token, averaged over
/// heads and min-max normalized. With a non-empty out_prefix, writes
/// <prefix>.csv, <prefix>.raster (8-bit grayscale, row-major) and a
/// <prefix>.json sidecar carrying the dimensions.
AttentionMap export_attention_map(const Checkpoint& checkpoint, const DatasetManifest& manifest,
                                  std::size_t image_index, std::size_t label,
                                  const std::filesystem::path& out_prefix = {});

struct PreferenceStats {
    std::vector<std::vector<std::uint64_t>> counts; // [n_labels][m]
    std::vector<std::uint64_t> histogram;           // column sums, [m]
};

/// For every test image and positive candidate label, counts which token
/// carried the maximum matching score.
PreferenceStats token_preference_stats(const Checkpoint& checkpoint,
                                       const DatasetManifest& manifest, EvalTask task,
                                       std::size_t threads = 1);

void write_stats_csv(const PreferenceStats& stats, const std::vector<std::string>& label_names,
                     const std::filesystem::path& path);

} // namespace qks
