#pragma once

#include <cstddef>
#include <vector>

#include "modiff/matrix.hpp"
#include "modiff/schedule.hpp"

namespace modiff {

// Training-time schedule of data-dropout probabilities: rates[0] before
// warmup_epochs, then one step up the list every interval_epochs, clamped
// at the last entry.
struct DropoutScheduler {
    std::vector<double> rates{0.0, 0.05, 0.10, 0.15, 0.20, 0.25};
    std::size_t warmup_epochs = 500;
    std::size_t interval_epochs = 100;
};

double dropout_rate_at(std::size_t epoch, const DropoutScheduler& scheduler);

// Diffusion data dropout: with probability p_d (decided by the caller's
// draw p), the past-motion context is replaced by its own forward-noised
// version at the same step s as the training target. Reuses the
// forward-sampling kernel so there is a single source of truth for the
// marginal.
Mat diffusion_dropout(const Mat& x, std::size_t s, const Mat& eps, const NoiseSchedule& sched,
                      double p, double p_d);

}  // namespace modiff
