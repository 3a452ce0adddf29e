#include "qks/grad_check.hpp"

#include <cmath>
#include <cstring>

#include "qks/errors.hpp"

namespace qks {

GradCheckReport grad_check(const std::function<double()>& f,
                           std::span<GradCheckParam> params, double step) {
    const double base1 = f();
    const double base2 = f();
    if (std::memcmp(&base1, &base2, sizeof(double)) != 0) {
        throw VerificationError("grad_check: f is non-deterministic (" +
                                std::to_string(base1) + " vs " + std::to_string(base2) + ")");
    }

    GradCheckReport report;
    for (const GradCheckParam& p : params) {
        if (!p.value || !p.analytic_grad) throw DataError("grad_check: null parameter view");
        if (!p.value->same_shape(*p.analytic_grad)) {
            throw DataError("grad_check: gradient shape mismatch for " + p.name);
        }
        GradCheckEntry entry;
        entry.name = p.name;
        Tensor<double>& theta = *p.value;
        for (std::size_t i = 0; i < theta.numel(); ++i) {
            const double orig = theta[i];
            theta[i] = orig + step;
            const double f_plus = f();
            theta[i] = orig - step;
            const double f_minus = f();
            theta[i] = orig;
            const double numeric = (f_plus - f_minus) / (2.0 * step);
            const double analytic = (*p.analytic_grad)[i];
            const double rel = std::abs(analytic - numeric) /
                               std::max(1e-8, std::abs(analytic) + std::abs(numeric));
            if (rel > entry.max_rel_err) {
                entry.max_rel_err = rel;
                entry.worst_index = i;
                entry.analytic_at_worst = analytic;
                entry.numeric_at_worst = numeric;
            }
        }
        report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
        report.entries.push_back(std::move(entry));
    }
    return report;
}

} // namespace qks
