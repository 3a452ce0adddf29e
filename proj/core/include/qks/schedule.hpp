#pragma once

#include <cstddef>

namespace qks {

struct PlateauConfig {
    std::size_t eval_every = 200; // steps between plateau evaluations
    double rel_threshold = 1e-4;  // relative improvement required
    std::size_t patience = 5;     // consecutive non-improving evals before decay
    double decay = 10.0;
    double floor_divisor = 100.0; // floor = initial_lr / floor_divisor
    double ema = 0.9;             // smoothing coefficient
};

/// Reduce-on-plateau: the per-step loss feeds an EMA; every eval_every
/// steps the smoothed loss is compared against the best seen. After
/// `patience` consecutive evals without a relative improvement greater
/// than rel_threshold, lr divides by `decay`, clamped at the floor.
class PlateauSchedule {
public:
    PlateauSchedule(PlateauConfig cfg, double initial_lr);

    double lr() const { return lr_; }
    double smoothed_loss() const { return smoothed_; }
    std::size_t decays_applied() const { return decays_; }

    /// Per-step entry point: EMA update plus a plateau evaluation on every
    /// eval_every-th call. Returns the (possibly reduced) lr.
    double observe(double loss);

    /// One plateau evaluation on an already-smoothed loss. Exposed so the
    /// decay logic is testable without stepping.
    void evaluate(double smoothed);

private:
    PlateauConfig cfg_;
    double lr_;
    double floor_;
    double smoothed_ = 0.0;
    bool have_smoothed_ = false;
    double best_;
    bool have_best_ = false;
    std::size_t evals_since_improvement_ = 0;
    std::size_t steps_seen_ = 0;
    std::size_t decays_ = 0;
};

} // namespace qks
