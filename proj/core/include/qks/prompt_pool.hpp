#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qks/tensor.hpp"

namespace qks {

/// Per-template label embeddings as produced by an external text encoder:
/// K slices of [n_labels x d], label order identical across slices.
/// Template strings are provenance metadata only, never parsed.
template <typename T>
struct TemplateEmbeddingBank {
    std::vector<std::string> templates;
    std::vector<Tensor<T>> embeddings; // K slices, each [n_labels x d]
    std::vector<std::string> label_names;

    std::size_t n_templates() const { return embeddings.size(); }
    std::size_t n_labels() const { return embeddings.empty() ? 0 : embeddings.front().rows(); }
    std::size_t width() const { return embeddings.empty() ? 0 : embeddings.front().cols(); }

    void validate() const;
};

/// Final per-label embedding table with the seen/unseen partition.
template <typename T>
struct LabelEmbeddingTable {
    Tensor<T> vectors; // [n_labels x d]
    std::vector<std::uint8_t> seen_mask;
    std::vector<std::string> label_names;

    std::size_t n_labels() const { return vectors.rows(); }
    std::size_t width() const { return vectors.cols(); }

    std::vector<std::size_t> seen_indices() const;
    std::vector<std::size_t> unseen_indices() const;

    void validate() const;
};

/// Unweighted mean over the template axis; no normalization afterward
/// (scores downstream use raw inner products). Accumulation is
/// Neumaier-compensated in double, so the result does not depend on the
/// template order. Empty seen_mask marks every label as seen.
template <typename T>
LabelEmbeddingTable<T> combine_templates(const TemplateEmbeddingBank<T>& bank,
                                         std::vector<std::uint8_t> seen_mask = {});

extern template struct TemplateEmbeddingBank<float>;
extern template struct TemplateEmbeddingBank<double>;
extern template struct LabelEmbeddingTable<float>;
extern template struct LabelEmbeddingTable<double>;
extern template LabelEmbeddingTable<float> combine_templates<float>(
    const TemplateEmbeddingBank<float>&, std::vector<std::uint8_t>);
extern template LabelEmbeddingTable<double> combine_templates<double>(
    const TemplateEmbeddingBank<double>&, std::vector<std::uint8_t>);

} // namespace qks
