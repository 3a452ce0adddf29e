#include "qks/optimizer.hpp"

#include <cmath>

#include "qks/errors.hpp"

namespace qks {

template <typename T>
void AdamW<T>::step(std::vector<ParamSlot<T>>& slots, double lr) {
    if (m_.empty()) {
        m_.reserve(slots.size());
        v_.reserve(slots.size());
        for (const auto& slot : slots) {
            m_.emplace_back(slot.value->shape());
            v_.emplace_back(slot.value->shape());
        }
    }
    if (m_.size() != slots.size()) {
        throw DataError("optimizer state has " + std::to_string(m_.size()) + " slots, got " +
                        std::to_string(slots.size()));
    }

    ++step_count_;
    const double b1 = cfg_.beta1, b2 = cfg_.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step_count_));

    for (std::size_t s = 0; s < slots.size(); ++s) {
        ParamSlot<T>& slot = slots[s];
        if (!slot.value->same_shape(*slot.grad) || !slot.value->same_shape(m_[s])) {
            throw DataError("optimizer shape mismatch for " + slot.name);
        }
        Tensor<T>& theta = *slot.value;
        const Tensor<T>& g = *slot.grad;
        Tensor<T>& m = m_[s];
        Tensor<T>& v = v_[s];
        for (std::size_t i = 0; i < theta.numel(); ++i) {
            const double gi = static_cast<double>(g[i]);
            if (!std::isfinite(gi)) {
                throw VerificationError("NaN/Inf gradient in " + slot.name);
            }
            const double mi = b1 * static_cast<double>(m[i]) + (1.0 - b1) * gi;
            const double vi = b2 * static_cast<double>(v[i]) + (1.0 - b2) * gi * gi;
            m[i] = static_cast<T>(mi);
            v[i] = static_cast<T>(vi);
            const double m_hat = mi / bc1;
            const double v_hat = vi / bc2;
            const double update = lr * (m_hat / (std::sqrt(v_hat) + cfg_.eps)) +
                                  lr * cfg_.weight_decay * static_cast<double>(theta[i]);
            theta[i] = static_cast<T>(static_cast<double>(theta[i]) - update);
        }
        theta.ensure_finite(slot.name + " after optimizer step");
    }
}

template <typename T>
void AdamW<T>::restore(std::vector<Tensor<T>> m, std::vector<Tensor<T>> v,
                       std::size_t step_count) {
    if (m.size() != v.size()) throw DataError("optimizer restore: moment count mismatch");
    m_ = std::move(m);
    v_ = std::move(v);
    step_count_ = step_count;
}

template class AdamW<float>;
template class AdamW<double>;

} // namespace qks
