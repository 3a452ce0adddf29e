#include "qks/batching.hpp"

#include <numeric>

#include "qks/errors.hpp"
#include "qks/qtf.hpp"
#include "qks/rng.hpp"

namespace qks {

std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t shuffle_seed,
                                           std::size_t epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t(0));
    Rng rng(mix_seed(shuffle_seed, epoch));
    rng.shuffle(order);
    return order;
}

BatchLoader::BatchLoader(const DatasetManifest& manifest, Split split, std::size_t batch_size,
                         std::uint64_t shuffle_seed)
    : manifest_(&manifest),
      records_(&manifest.images(split)),
      batch_size_(batch_size),
      shuffle_seed_(shuffle_seed),
      cache_(records_->size()),
      loaded_(records_->size(), 0) {
    if (batch_size_ == 0) throw DataError("batch size must be >= 1");
    if (records_->empty()) throw DataError("split is empty");
}

std::size_t BatchLoader::batches_per_epoch() const {
    return (records_->size() + batch_size_ - 1) / batch_size_;
}

std::vector<std::size_t> BatchLoader::batch(std::size_t epoch, std::size_t batch_index) const {
    const std::vector<std::size_t> order = epoch_permutation(records_->size(), shuffle_seed_, epoch);
    const std::size_t begin = batch_index * batch_size_;
    if (begin >= order.size()) throw DataError("batch index out of range");
    const std::size_t end = std::min(order.size(), begin + batch_size_);
    return std::vector<std::size_t>(order.begin() + begin, order.begin() + end);
}

const Tensor<float>& BatchLoader::features(std::size_t image_index) {
    if (image_index >= records_->size()) throw DataError("image index out of range");
    if (!loaded_[image_index]) {
        const auto path = manifest_->resolve((*records_)[image_index].feature_file);
        if (!std::filesystem::exists(path)) {
            throw DataError("missing feature file: " + path.string());
        }
        cache_[image_index] = read_tensor_f32(path);
        loaded_[image_index] = 1;
    }
    return cache_[image_index];
}

const std::vector<std::size_t>& BatchLoader::annotations(std::size_t image_index) const {
    if (image_index >= records_->size()) throw DataError("image index out of range");
    return (*records_)[image_index].labels;
}

void BatchLoader::preload() {
    for (std::size_t i = 0; i < records_->size(); ++i) features(i);
}

} // namespace qks
