#pragma once

#include "modiff/matrix.hpp"
#include "modiff/schedule.hpp"

namespace modiff {

// Closed-form pieces of the denoising diffusion chain. Everything here is a
// pure function of its inputs; all math is double precision.

struct DiffusionSample {
    Mat y_s;        // noised target, same shape as y0
    std::size_t s;  // step index, 1..S
    Mat eps;        // the Gaussian draw that produced y_s, kept for the loss
};

struct PosteriorParams {
    Mat mu_tilde;
    double beta_tilde = 0.0;
};

// y_s = sqrt(abar_s) * y0 + sqrt(1 - abar_s) * eps
Mat forward_sample(const Mat& y0, std::size_t s, const Mat& eps, const NoiseSchedule& sched);

// Exact posterior q(y_{s-1} | y_s, y0): mean and variance. At s = 1 the
// mean collapses to y0 and the variance to 0, bit-exactly.
PosteriorParams posterior_params(const Mat& y_s, const Mat& y0, std::size_t s,
                                 const NoiseSchedule& sched);

// mu_theta = (y_s - beta_s / sqrt(1 - abar_s) * eps_hat) / sqrt(alpha_s)
Mat predict_mu(const Mat& y_s, std::size_t s, const Mat& eps_hat, const NoiseSchedule& sched);

// One reverse transition: predict_mu + sigma_s * z. The default variance is
// beta_s; posterior_variance switches to beta_tilde_s. z must be all zero
// at s = 1 (rejected otherwise), making the last step deterministic.
Mat reverse_step(const Mat& y_s, std::size_t s, const Mat& eps_hat, const Mat& z,
                 const NoiseSchedule& sched, bool posterior_variance = false);

// Inversion of the one-step marginal: (y_s - sqrt(1 - abar_s) * eps_hat) / sqrt(abar_s)
Mat recover_y0(const Mat& y_s, std::size_t s, const Mat& eps_hat, const NoiseSchedule& sched);

// Mean squared error over all elements.
double simple_loss(const Mat& eps, const Mat& eps_hat);

}  // namespace modiff
