#include "modiff/ddpm.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "modiff/kernels.hpp"

namespace modiff {

namespace {

Mat axpby_mat(double a, const Mat& x, double b, const Mat& y) {
    Mat out(x.rows(), x.cols());
    kernels::axpby(a, x.data(), b, y.data(), out.data(), x.size());
    return out;
}

void check_step(std::size_t s, const NoiseSchedule& sched, const char* where) {
    if (s < 1 || s > sched.steps())
        throw std::out_of_range(std::string(where) + ": step " + std::to_string(s) +
                                " outside 1.." + std::to_string(sched.steps()));
}

}  // namespace

Mat forward_sample(const Mat& y0, std::size_t s, const Mat& eps, const NoiseSchedule& sched) {
    require_same_shape(y0, eps, "forward_sample");
    check_step(s, sched, "forward_sample");
    return axpby_mat(std::sqrt(sched.alpha_bar(s)), y0,
                     std::sqrt(sched.one_minus_alpha_bar(s)), eps);
}

PosteriorParams posterior_params(const Mat& y_s, const Mat& y0, std::size_t s,
                                 const NoiseSchedule& sched) {
    require_same_shape(y_s, y0, "posterior_params");
    check_step(s, sched, "posterior_params");
    double u = sched.one_minus_alpha_bar(s);
    double u_prev = sched.one_minus_alpha_bar(s - 1);
    double c0 = std::sqrt(sched.alpha_bar(s - 1)) * sched.beta(s) / u;
    double cs = std::sqrt(sched.alpha(s)) * u_prev / u;
    PosteriorParams p;
    p.mu_tilde = axpby_mat(c0, y0, cs, y_s);
    p.beta_tilde = sched.beta_tilde(s);
    return p;
}

Mat predict_mu(const Mat& y_s, std::size_t s, const Mat& eps_hat, const NoiseSchedule& sched) {
    require_same_shape(y_s, eps_hat, "predict_mu");
    check_step(s, sched, "predict_mu");
    double inv_sqrt_alpha = 1.0 / std::sqrt(sched.alpha(s));
    double coef = inv_sqrt_alpha * (sched.beta(s) / std::sqrt(sched.one_minus_alpha_bar(s)));
    return axpby_mat(inv_sqrt_alpha, y_s, -coef, eps_hat);
}

Mat reverse_step(const Mat& y_s, std::size_t s, const Mat& eps_hat, const Mat& z,
                 const NoiseSchedule& sched, bool posterior_variance) {
    require_same_shape(y_s, z, "reverse_step");
    if (s == 1) {
        for (std::size_t i = 0; i < z.size(); ++i)
            if (z[i] != 0.0)
                throw std::invalid_argument("reverse_step: z must be zero at s=1 (element " +
                                            std::to_string(i) + " is not)");
    }
    Mat mu = predict_mu(y_s, s, eps_hat, sched);
    double var = posterior_variance ? sched.beta_tilde(s) : sched.beta(s);
    return axpby_mat(1.0, mu, std::sqrt(var), z);
}

Mat recover_y0(const Mat& y_s, std::size_t s, const Mat& eps_hat, const NoiseSchedule& sched) {
    require_same_shape(y_s, eps_hat, "recover_y0");
    check_step(s, sched, "recover_y0");
    double inv_sqrt_abar = 1.0 / std::sqrt(sched.alpha_bar(s));
    double coef = std::sqrt(sched.one_minus_alpha_bar(s)) * inv_sqrt_abar;
    return axpby_mat(inv_sqrt_abar, y_s, -coef, eps_hat);
}

double simple_loss(const Mat& eps, const Mat& eps_hat) {
    require_same_shape(eps, eps_hat, "simple_loss");
    if (eps.size() == 0) throw std::invalid_argument("simple_loss: empty tensors");
    return kernels::sum_squared_diff(eps.data(), eps_hat.data(), eps.size()) /
           double(eps.size());
}

}  // namespace modiff
