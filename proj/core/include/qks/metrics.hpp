#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "qks/tensor.hpp"

namespace qks {

/// Label-centric average precision: items (images) ranked by descending
/// score, ties broken by ascending item index. AP = mean over relevant
/// items of precision at their rank. nullopt when nothing is relevant
/// (caller skips the label).
std::optional<double> average_precision(std::span<const double> scores,
                                        std::span<const std::uint8_t> relevance);

struct MeanApResult {
    double map = 0.0;
    std::vector<double> per_label_ap;        // aligned with candidates, NaN = skipped
    std::vector<std::size_t> skipped_labels; // candidates with no positive image
};

/// Mean of average_precision over candidate labels with at least one
/// positive test image; zero-positive labels are skipped. Throws when
/// every candidate is skipped. scores is [n_images x n_labels].
MeanApResult mean_ap(const Tensor<double>& scores,
                     const std::vector<std::vector<std::size_t>>& annotations,
                     std::span<const std::size_t> candidates);

struct TopkResult {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Top-K precision/recall/F1 over the candidate set. Per image the top-K
/// candidate labels are selected (ties by ascending label index);
/// P = hits / (K * n_images), R = hits / total annotated positives
/// (restricted to candidates), F1 harmonic with F1 = 0 when P + R = 0.
TopkResult topk_prf(const Tensor<double>& scores,
                    const std::vector<std::vector<std::size_t>>& annotations, std::size_t k,
                    std::span<const std::size_t> candidates);

} // namespace qks
