#pragma once

#include <vector>

#include "qks/manifest.hpp"
#include "qks/tensor.hpp"

namespace qks {

/// Fisher-Yates permutation of [0, n), seeded per epoch from the shuffle
/// seed. Epoch 0 for seed 0 is golden-vector tested.
std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t shuffle_seed,
                                           std::size_t epoch);

/// Deterministic shuffled batches over one manifest split, the final
/// partial batch included. Features are loaded lazily and cached; call
/// preload() before concurrent reads.
class BatchLoader {
public:
    BatchLoader(const DatasetManifest& manifest, Split split, std::size_t batch_size,
                std::uint64_t shuffle_seed);

    std::size_t n_images() const { return records_->size(); }
    std::size_t batch_size() const { return batch_size_; }
    std::size_t batches_per_epoch() const;

    /// Image indices of one batch within the epoch's permutation.
    std::vector<std::size_t> batch(std::size_t epoch, std::size_t batch_index) const;

    const Tensor<float>& features(std::size_t image_index);
    const std::vector<std::size_t>& annotations(std::size_t image_index) const;

    void preload();

private:
    const DatasetManifest* manifest_;
    const std::vector<ImageRecord>* records_;
    std::size_t batch_size_;
    std::uint64_t shuffle_seed_;
    std::vector<Tensor<float>> cache_;
    std::vector<std::uint8_t> loaded_;
};

} // namespace qks
