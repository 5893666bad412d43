#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "modiff/matrix.hpp"
#include "modiff/schedule.hpp"

namespace modiff {

// One training example as consumed by trainable denoisers: the noised
// target, its step, the (possibly dropout-corrupted) past motion, the
// control context, and the noise the loss is scored against.
struct TrainItem {
    Mat y_s;
    std::size_t s = 1;
    Mat x;
    Mat c;
    Mat eps;
};

// Pluggable noise predictor eps_theta(y_s, s, x, c). Implementations never
// mutate their inputs and always return the shape of y_s.
class Denoiser {
public:
    virtual ~Denoiser() = default;

    virtual Mat predict(const Mat& y_s, std::size_t s, const Mat& x, const Mat& c) const = 0;

    virtual bool trainable() const { return false; }

    // One optimization step over the batch; returns the mean simplified
    // loss. The base version only evaluates the loss, which is the correct
    // behavior for parameter-free predictors.
    virtual double train_batch(const std::vector<TrainItem>& batch, double lr);

    // One-line state summary (parameter norms etc.) for failure reports.
    virtual std::string diagnostics() const { return {}; }
};

// Closed-form optimal predictor for y0 ~ N(m0, v0 I), conditionally
// independent of x and c. Used to exercise the full sampling and training
// machinery without a learned model.
class GaussianOracleDenoiser : public Denoiser {
public:
    GaussianOracleDenoiser(std::vector<double> m0, double v0, const NoiseSchedule& sched);

    Mat predict(const Mat& y_s, std::size_t s, const Mat& x, const Mat& c) const override;

    const std::vector<double>& m0() const { return m0_; }
    double v0() const { return v0_; }

private:
    std::vector<double> m0_;  // per-dimension mean; broadcast over rows
    double v0_;
    const NoiseSchedule& sched_;
};

// Per-frame affine baseline eps_hat = y_s * W^T + b, fitted by Adam on the
// analytic MSE gradient. The simplest trainable reference point.
class LinearDenoiser : public Denoiser {
public:
    LinearDenoiser(std::size_t dim, std::uint64_t seed);

    Mat predict(const Mat& y_s, std::size_t s, const Mat& x, const Mat& c) const override;
    bool trainable() const override { return true; }
    double train_batch(const std::vector<TrainItem>& batch, double lr) override;

    const Mat& weight() const { return W_; }
    const Mat& bias() const { return b_; }
    // Analytic gradient of the mean squared loss for a stacked batch,
    // exposed so tests can check it against the textbook form.
    void loss_gradients(const std::vector<TrainItem>& batch, Mat& dW, Mat& db,
                        double* loss = nullptr) const;

private:
    Mat W_;  // [dim, dim]
    Mat b_;  // [1, dim]
    Mat mW_, vW_, mb_, vb_;  // Adam moments
    std::size_t adam_t_ = 0;
};

}  // namespace modiff
