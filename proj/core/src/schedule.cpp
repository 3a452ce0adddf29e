#include "qks/schedule.hpp"

#include "qks/errors.hpp"

namespace qks {

PlateauSchedule::PlateauSchedule(PlateauConfig cfg, double initial_lr)
    : cfg_(cfg), lr_(initial_lr), floor_(initial_lr / cfg.floor_divisor), best_(0.0) {
    if (cfg_.eval_every == 0) throw DataError("plateau schedule: eval_every must be >= 1");
    if (cfg_.decay <= 1.0) throw DataError("plateau schedule: decay must be > 1");
}

double PlateauSchedule::observe(double loss) {
    smoothed_ = have_smoothed_ ? cfg_.ema * smoothed_ + (1.0 - cfg_.ema) * loss : loss;
    have_smoothed_ = true;
    ++steps_seen_;
    if (steps_seen_ % cfg_.eval_every == 0) evaluate(smoothed_);
    return lr_;
}

void PlateauSchedule::evaluate(double smoothed) {
    const bool improved = !have_best_ || smoothed < best_ * (1.0 - cfg_.rel_threshold);
    if (improved) {
        best_ = smoothed;
        have_best_ = true;
        evals_since_improvement_ = 0;
        return;
    }
    ++evals_since_improvement_;
    if (evals_since_improvement_ >= cfg_.patience) {
        const double reduced = lr_ / cfg_.decay;
        // Relative slack so lr/10/10 still counts as reaching an lr/100 floor.
        if (reduced >= floor_ * (1.0 - 1e-9)) {
            lr_ = reduced;
            ++decays_;
        }
        evals_since_improvement_ = 0;
    }
}

} // namespace qks
