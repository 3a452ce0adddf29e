#pragma once

#include "qks/grad_check.hpp"
#include "qks/model.hpp"

namespace qks {

/// End-to-end gradient check of loss(forward(x)) against central finite
/// differences, float64 throughout. Inputs, labels and parameters are
/// drawn from the seed; every trainable tensor is checked.
struct ModelGradCheckSpec {
    ModelConfig config;
    std::size_t n_labels = 6;
    std::size_t n_positive = 2;
    LossKind loss_kind = LossKind::classification;
    double step = 1e-5;
    std::uint64_t seed = 0;
};

GradCheckReport model_grad_check(const ModelGradCheckSpec& spec);

} // namespace qks
