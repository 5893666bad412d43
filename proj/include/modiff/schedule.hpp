#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace modiff {

// Fixed variance schedule of the diffusion chain. Accessors index s = 1..S;
// alpha_bar(0) is 1 by convention so the posterior is well-formed at s = 1.
//
// one_minus_alpha_bar is kept as its own table, built via the recursion
// u_s = beta_s * alpha_bar_{s-1} + u_{s-1} (algebraically 1 - alpha_bar_s).
// That makes u_1 == beta_1 hold bit-exactly, which is what the closed-form
// collapse at s = 1 (posterior mean == y0, beta_tilde == 0) relies on.
class NoiseSchedule {
public:
    explicit NoiseSchedule(std::vector<double> beta);

    std::size_t steps() const { return S_; }
    double beta(std::size_t s) const { return beta_[check_s(s)]; }
    double alpha(std::size_t s) const { return alpha_[check_s(s)]; }
    double alpha_bar(std::size_t s) const;          // s in 0..S
    double one_minus_alpha_bar(std::size_t s) const;  // s in 0..S
    double beta_tilde(std::size_t s) const;         // s in 1..S; 0 at s = 1

    // FNV-1a over S and the raw beta bytes; stable schedule identity for
    // manifests and checkpoint compatibility checks.
    std::uint64_t content_hash() const;

private:
    std::size_t check_s(std::size_t s) const;
    std::size_t S_;
    std::vector<double> beta_, alpha_, alpha_bar_, one_minus_alpha_bar_;
};

// Linear interpolation from beta_start to beta_end over s = 1..S. "linear"
// is the only schedule kind; the argument exists so the config surface is
// explicit about it.
NoiseSchedule build_schedule(std::size_t S, double beta_start = 1e-4, double beta_end = 0.02,
                             const std::string& kind = "linear");

// The build_schedule arguments as data, for configs, manifests and
// checkpoint metadata.
struct ScheduleConfig {
    std::size_t steps = 100;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    std::string kind = "linear";

    NoiseSchedule build() const { return build_schedule(steps, beta_start, beta_end, kind); }
};

// CSV dump (s, beta, alpha, alpha_bar, beta_tilde), 17 significant digits.
void write_schedule_csv(const NoiseSchedule& sched, std::ostream& os);

}  // namespace modiff
