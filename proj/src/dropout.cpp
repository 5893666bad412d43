#include "modiff/dropout.hpp"

#include <algorithm>
#include <stdexcept>

#include "modiff/ddpm.hpp"

namespace modiff {

double dropout_rate_at(std::size_t epoch, const DropoutScheduler& scheduler) {
    if (scheduler.rates.empty()) throw std::invalid_argument("dropout: empty rate list");
    for (std::size_t i = 1; i < scheduler.rates.size(); ++i)
        if (scheduler.rates[i] < scheduler.rates[i - 1])
            throw std::invalid_argument("dropout: rates must be nondecreasing");
    for (double r : scheduler.rates)
        if (r < 0.0 || r > 1.0) throw std::invalid_argument("dropout: rate outside [0,1]");
    if (epoch < scheduler.warmup_epochs || scheduler.rates.size() == 1) return scheduler.rates[0];
    if (scheduler.interval_epochs == 0)
        throw std::invalid_argument("dropout: interval_epochs must be positive");
    std::size_t idx = 1 + (epoch - scheduler.warmup_epochs) / scheduler.interval_epochs;
    return scheduler.rates[std::min(idx, scheduler.rates.size() - 1)];
}

Mat diffusion_dropout(const Mat& x, std::size_t s, const Mat& eps, const NoiseSchedule& sched,
                      double p, double p_d) {
    if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("dropout: p must lie in [0,1)");
    if (!(p_d >= 0.0 && p_d <= 1.0)) throw std::invalid_argument("dropout: p_d must lie in [0,1]");
    require_same_shape(x, eps, "diffusion_dropout");
    if (p < p_d) return forward_sample(x, s, eps, sched);
    return x;
}

}  // namespace modiff
