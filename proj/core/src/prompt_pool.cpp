#include "qks/prompt_pool.hpp"

#include <cmath>

#include "qks/errors.hpp"

namespace qks {

template <typename T>
void TemplateEmbeddingBank<T>::validate() const {
    if (embeddings.empty()) throw DataError("template bank is empty (K = 0)");
    const auto& first = embeddings.front();
    if (first.rank() != 2) throw DataError("template slice must be [n_labels x d], got " + first.shape_str());
    for (std::size_t k = 1; k < embeddings.size(); ++k) {
        if (!embeddings[k].same_shape(first)) {
            throw DataError("template slice " + std::to_string(k) + " shape " +
                            embeddings[k].shape_str() + " differs from " + first.shape_str());
        }
    }
    if (!label_names.empty() && label_names.size() != first.rows()) {
        throw DataError("label name count does not match embedding rows");
    }
    for (std::size_t k = 0; k < embeddings.size(); ++k) {
        embeddings[k].ensure_finite("template slice " + std::to_string(k));
    }
}

template <typename T>
std::vector<std::size_t> LabelEmbeddingTable<T>::seen_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < seen_mask.size(); ++i) {
        if (seen_mask[i]) out.push_back(i);
    }
    return out;
}

template <typename T>
std::vector<std::size_t> LabelEmbeddingTable<T>::unseen_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < seen_mask.size(); ++i) {
        if (!seen_mask[i]) out.push_back(i);
    }
    return out;
}

template <typename T>
void LabelEmbeddingTable<T>::validate() const {
    if (vectors.rank() != 2) throw DataError("label table must be [n_labels x d]");
    if (seen_mask.size() != vectors.rows()) throw DataError("seen mask length mismatch");
    vectors.ensure_finite("label embedding table");
}

template <typename T>
LabelEmbeddingTable<T> combine_templates(const TemplateEmbeddingBank<T>& bank,
                                         std::vector<std::uint8_t> seen_mask) {
    bank.validate();
    const std::size_t n = bank.n_labels(), d = bank.width(), K = bank.n_templates();

    LabelEmbeddingTable<T> table;
    table.vectors = Tensor<T>({n, d});
    table.label_names = bank.label_names;
    if (seen_mask.empty()) {
        table.seen_mask.assign(n, 1);
    } else {
        if (seen_mask.size() != n) throw DataError("seen mask length does not match label count");
        table.seen_mask = std::move(seen_mask);
    }

    const double inv_k = 1.0 / static_cast<double>(K);
    for (std::size_t e = 0; e < n * d; ++e) {
        double sum = 0.0, comp = 0.0; // Neumaier compensation
        for (std::size_t k = 0; k < K; ++k) {
            const double v = static_cast<double>(bank.embeddings[k][e]);
            const double t = sum + v;
            if (std::abs(sum) >= std::abs(v)) {
                comp += (sum - t) + v;
            } else {
                comp += (v - t) + sum;
            }
            sum = t;
        }
        table.vectors[e] = static_cast<T>((sum + comp) * inv_k);
    }
    return table;
}

template struct TemplateEmbeddingBank<float>;
template struct TemplateEmbeddingBank<double>;
template struct LabelEmbeddingTable<float>;
template struct LabelEmbeddingTable<double>;
template LabelEmbeddingTable<float> combine_templates<float>(const TemplateEmbeddingBank<float>&,
                                                             std::vector<std::uint8_t>);
template LabelEmbeddingTable<double> combine_templates<double>(const TemplateEmbeddingBank<double>&,
                                                               std::vector<std::uint8_t>);

} // namespace qks
