#include "modiff/schedule.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

#include "modiff/rng.hpp"

namespace modiff {

NoiseSchedule::NoiseSchedule(std::vector<double> beta) : S_(beta.size()) {
    if (S_ == 0) throw std::invalid_argument("schedule: need at least one step");
    for (std::size_t i = 0; i < S_; ++i) {
        if (!(beta[i] > 0.0 && beta[i] < 1.0))
            throw std::invalid_argument("schedule: beta_" + std::to_string(i + 1) +
                                        " outside (0,1)");
    }
    // Tables indexed 1..S with a slot for the s = 0 convention.
    beta_.assign(S_ + 1, 0.0);
    alpha_.assign(S_ + 1, 1.0);
    alpha_bar_.assign(S_ + 1, 1.0);
    one_minus_alpha_bar_.assign(S_ + 1, 0.0);
    for (std::size_t s = 1; s <= S_; ++s) {
        beta_[s] = beta[s - 1];
        alpha_[s] = 1.0 - beta_[s];
        alpha_bar_[s] = alpha_bar_[s - 1] * alpha_[s];
        one_minus_alpha_bar_[s] =
            std::fma(beta_[s], alpha_bar_[s - 1], one_minus_alpha_bar_[s - 1]);
        if (!(alpha_bar_[s] > 0.0 && alpha_bar_[s] < alpha_bar_[s - 1]))
            throw std::invalid_argument("schedule: alpha_bar not strictly decreasing at s=" +
                                        std::to_string(s));
    }
}

std::size_t NoiseSchedule::check_s(std::size_t s) const {
    if (s < 1 || s > S_)
        throw std::out_of_range("schedule: step " + std::to_string(s) + " outside 1.." +
                                std::to_string(S_));
    return s;
}

double NoiseSchedule::alpha_bar(std::size_t s) const {
    if (s > S_)
        throw std::out_of_range("schedule: step " + std::to_string(s) + " outside 0.." +
                                std::to_string(S_));
    return alpha_bar_[s];
}

double NoiseSchedule::one_minus_alpha_bar(std::size_t s) const {
    if (s > S_)
        throw std::out_of_range("schedule: step " + std::to_string(s) + " outside 0.." +
                                std::to_string(S_));
    return one_minus_alpha_bar_[s];
}

double NoiseSchedule::beta_tilde(std::size_t s) const {
    check_s(s);
    return one_minus_alpha_bar_[s - 1] / one_minus_alpha_bar_[s] * beta_[s];
}

std::uint64_t NoiseSchedule::content_hash() const {
    std::uint64_t h = fnv1a64_bytes(&S_, sizeof(S_));
    h = fnv1a64_bytes(beta_.data() + 1, S_ * sizeof(double), h);
    return h;
}

NoiseSchedule build_schedule(std::size_t S, double beta_start, double beta_end,
                             const std::string& kind) {
    if (kind != "linear") throw std::invalid_argument("schedule: unknown kind '" + kind + "'");
    if (S == 0) throw std::invalid_argument("schedule: S must be >= 1");
    if (!(beta_start > 0.0 && beta_start < 1.0) || !(beta_end > 0.0 && beta_end < 1.0))
        throw std::invalid_argument("schedule: beta bounds must lie in (0,1)");
    if (beta_start > beta_end)
        throw std::invalid_argument("schedule: beta_start must not exceed beta_end");
    std::vector<double> beta(S);
    for (std::size_t s = 0; s < S; ++s) {
        double f = S > 1 ? double(s) / double(S - 1) : 0.0;
        beta[s] = beta_start + f * (beta_end - beta_start);
    }
    return NoiseSchedule(std::move(beta));
}

void write_schedule_csv(const NoiseSchedule& sched, std::ostream& os) {
    os << "s,beta,alpha,alpha_bar,beta_tilde\n";
    char buf[128];
    for (std::size_t s = 1; s <= sched.steps(); ++s) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g\n", s, sched.beta(s),
                      sched.alpha(s), sched.alpha_bar(s), sched.beta_tilde(s));
        os << buf;
    }
}

}  // namespace modiff
