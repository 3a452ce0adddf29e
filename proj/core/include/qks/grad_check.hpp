#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "qks/tensor.hpp"

namespace qks {

/// One parameter tensor under test: the function f reads the current
/// values through `value`; `analytic_grad` is the gradient to verify,
/// computed by the caller at the unperturbed point.
struct GradCheckParam {
    std::string name;
    Tensor<double>* value = nullptr;
    const Tensor<double>* analytic_grad = nullptr;
};

struct GradCheckEntry {
    std::string name;
    double max_rel_err = 0.0;
    std::size_t worst_index = 0;
    double analytic_at_worst = 0.0;
    double numeric_at_worst = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double max_rel_err = 0.0;
    bool passed(double tol) const { return max_rel_err <= tol; }
};

/// Central-difference check of analytic gradients, float64 only.
/// Relative error per element is |a - n| / max(1e-8, |a| + |n|).
/// Throws VerificationError if two evaluations of f at the same point
/// disagree bitwise (f must be deterministic).
GradCheckReport grad_check(const std::function<double()>& f,
                           std::span<GradCheckParam> params, double step);

} // namespace qks
