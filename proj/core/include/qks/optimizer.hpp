#pragma once

#include <string>
#include <vector>

#include "qks/tensor.hpp"

namespace qks {

struct AdamWConfig {
    double lr = 1e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

/// One parameter tensor wired to its gradient for an optimizer step.
template <typename T>
struct ParamSlot {
    std::string name;
    Tensor<T>* value = nullptr;
    const Tensor<T>* grad = nullptr;
};

/// Decoupled-weight-decay Adam:
///   m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
///   theta <- theta - lr * m_hat / (sqrt(v_hat) + eps) - lr * wd * theta.
/// Moment buffers are created on the first step and keyed by slot order,
/// which must stay fixed. NaN gradients abort with the parameter name;
/// parameters are checked finite after each step.
template <typename T>
class AdamW {
public:
    explicit AdamW(AdamWConfig cfg) : cfg_(cfg) {}

    void step(std::vector<ParamSlot<T>>& slots, double lr);
    void step(std::vector<ParamSlot<T>>& slots) { step(slots, cfg_.lr); }

    std::size_t steps_taken() const { return step_count_; }
    const AdamWConfig& config() const { return cfg_; }

    /// Moment access for checkpointing; empty before the first step.
    const std::vector<Tensor<T>>& first_moments() const { return m_; }
    const std::vector<Tensor<T>>& second_moments() const { return v_; }
    void restore(std::vector<Tensor<T>> m, std::vector<Tensor<T>> v, std::size_t step_count);

private:
    AdamWConfig cfg_;
    std::size_t step_count_ = 0;
    std::vector<Tensor<T>> m_, v_;
};

extern template class AdamW<float>;
extern template class AdamW<double>;

} // namespace qks
