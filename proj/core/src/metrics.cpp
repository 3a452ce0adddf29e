#include "qks/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "qks/errors.hpp"

namespace qks {

std::optional<double> average_precision(std::span<const double> scores,
                                        std::span<const std::uint8_t> relevance) {
    if (scores.size() != relevance.size()) {
        throw DataError("average_precision: scores/relevance length mismatch");
    }
    std::size_t n_pos = 0;
    for (std::uint8_t r : relevance) n_pos += r ? 1 : 0;
    if (n_pos == 0) return std::nullopt;

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t(0));
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    double ap = 0.0;
    std::size_t hits = 0;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        if (relevance[order[rank]]) {
            ++hits;
            ap += static_cast<double>(hits) / static_cast<double>(rank + 1);
        }
    }
    return ap / static_cast<double>(n_pos);
}

MeanApResult mean_ap(const Tensor<double>& scores,
                     const std::vector<std::vector<std::size_t>>& annotations,
                     std::span<const std::size_t> candidates) {
    const std::size_t n_images = scores.rows();
    if (annotations.size() != n_images) {
        throw DataError("mean_ap: annotation count does not match score rows");
    }
    if (candidates.empty()) throw DataError("mean_ap: empty candidate set");

    MeanApResult result;
    result.per_label_ap.assign(candidates.size(), std::numeric_limits<double>::quiet_NaN());

    std::vector<double> column(n_images);
    std::vector<std::uint8_t> relevance(n_images);
    double sum = 0.0;
    std::size_t counted = 0;
    for (std::size_t ci = 0; ci < candidates.size(); ++ci) {
        const std::size_t label = candidates[ci];
        if (label >= scores.cols()) throw DataError("mean_ap: candidate label out of range");
        for (std::size_t img = 0; img < n_images; ++img) {
            column[img] = scores(img, label);
            relevance[img] =
                std::binary_search(annotations[img].begin(), annotations[img].end(), label) ? 1 : 0;
        }
        const auto ap = average_precision(column, relevance);
        if (!ap) {
            result.skipped_labels.push_back(label);
            continue;
        }
        result.per_label_ap[ci] = *ap;
        sum += *ap;
        ++counted;
    }
    if (counted == 0) {
        throw DataError("mean_ap: every candidate label lacks positive images");
    }
    result.map = sum / static_cast<double>(counted);
    return result;
}

TopkResult topk_prf(const Tensor<double>& scores,
                    const std::vector<std::vector<std::size_t>>& annotations, std::size_t k,
                    std::span<const std::size_t> candidates) {
    const std::size_t n_images = scores.rows();
    if (annotations.size() != n_images) {
        throw DataError("topk_prf: annotation count does not match score rows");
    }
    if (k == 0) throw DataError("topk_prf: k must be >= 1");
    if (k > candidates.size()) {
        throw DataError("topk_prf: k=" + std::to_string(k) + " exceeds candidate count " +
                        std::to_string(candidates.size()));
    }

    std::size_t total_hits = 0;
    std::size_t total_positive = 0;
    std::vector<std::size_t> ranked(candidates.begin(), candidates.end());
    for (std::size_t img = 0; img < n_images; ++img) {
        std::stable_sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) {
            if (scores(img, a) != scores(img, b)) return scores(img, a) > scores(img, b);
            return a < b; // ties: ascending label index
        });
        for (std::size_t r = 0; r < k; ++r) {
            if (std::binary_search(annotations[img].begin(), annotations[img].end(), ranked[r])) {
                ++total_hits;
            }
        }
        for (std::size_t label : candidates) {
            if (std::binary_search(annotations[img].begin(), annotations[img].end(), label)) {
                ++total_positive;
            }
        }
    }
    if (total_positive == 0) {
        throw DataError("topk_prf: no annotated positives among the candidates");
    }

    TopkResult out;
    out.precision = static_cast<double>(total_hits) /
                    (static_cast<double>(k) * static_cast<double>(n_images));
    out.recall = static_cast<double>(total_hits) / static_cast<double>(total_positive);
    out.f1 = (out.precision + out.recall) > 0.0
                 ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
                 : 0.0;
    return out;
}

} // namespace qks
