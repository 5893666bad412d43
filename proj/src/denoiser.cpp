#include "modiff/denoiser.hpp"

#include <cmath>
#include <stdexcept>

#include "modiff/adam.hpp"
#include "modiff/ddpm.hpp"
#include "modiff/kernels.hpp"
#include "modiff/rng.hpp"

namespace modiff {

double Denoiser::train_batch(const std::vector<TrainItem>& batch, double /*lr*/) {
    if (batch.empty()) throw std::invalid_argument("train_batch: empty batch");
    double total = 0.0;
    for (const TrainItem& item : batch)
        total += simple_loss(item.eps, predict(item.y_s, item.s, item.x, item.c));
    return total / double(batch.size());
}

GaussianOracleDenoiser::GaussianOracleDenoiser(std::vector<double> m0, double v0,
                                               const NoiseSchedule& sched)
    : m0_(std::move(m0)), v0_(v0), sched_(sched) {
    if (!(v0_ > 0.0)) throw std::invalid_argument("oracle: v0 must be positive");
    if (m0_.empty()) throw std::invalid_argument("oracle: empty mean vector");
}

Mat GaussianOracleDenoiser::predict(const Mat& y_s, std::size_t s, const Mat& /*x*/,
                                    const Mat& /*c*/) const {
    if (y_s.cols() != m0_.size())
        throw std::invalid_argument("oracle: y_s has " + std::to_string(y_s.cols()) +
                                    " columns, mean vector has " + std::to_string(m0_.size()));
    if (s < 1 || s > sched_.steps())
        throw std::out_of_range("oracle: step " + std::to_string(s) + " outside 1.." +
                                std::to_string(sched_.steps()));
    double abar = sched_.alpha_bar(s);
    double u = sched_.one_minus_alpha_bar(s);
    double sqrt_abar = std::sqrt(abar);
    double scale = std::sqrt(u) / (abar * v0_ + u);
    Mat out(y_s.rows(), y_s.cols());
    for (std::size_t r = 0; r < y_s.rows(); ++r)
        for (std::size_t c = 0; c < y_s.cols(); ++c)
            out(r, c) = scale * (y_s(r, c) - sqrt_abar * m0_[c]);
    return out;
}

LinearDenoiser::LinearDenoiser(std::size_t dim, std::uint64_t seed)
    : W_(dim, dim), b_(1, dim), mW_(dim, dim), vW_(dim, dim), mb_(1, dim), vb_(1, dim) {
    RandomStream rng = RandomStream(seed).substream("linear-init");
    for (std::size_t i = 0; i < W_.size(); ++i) W_[i] = 0.02 * rng.normal();
}

Mat LinearDenoiser::predict(const Mat& y_s, std::size_t /*s*/, const Mat& /*x*/,
                            const Mat& /*c*/) const {
    if (y_s.cols() != W_.rows())
        throw std::invalid_argument("linear: input has " + std::to_string(y_s.cols()) +
                                    " columns, model expects " + std::to_string(W_.rows()));
    Mat out(y_s.rows(), y_s.cols());
    kernels::matmul_transb(y_s.data(), W_.data(), out.data(), y_s.rows(), y_s.cols(), W_.rows());
    for (std::size_t r = 0; r < out.rows(); ++r)
        for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += b_[c];
    return out;
}

void LinearDenoiser::loss_gradients(const std::vector<TrainItem>& batch, Mat& dW, Mat& db,
                                    double* loss) const {
    if (batch.empty()) throw std::invalid_argument("linear: empty batch");
    std::size_t dim = W_.rows();
    std::size_t n = 0;
    for (const TrainItem& item : batch) n += item.y_s.rows();
    // Stack the batch rows: X [n, dim], E [n, dim].
    Mat X(n, dim), E(n, dim);
    std::size_t at = 0;
    for (const TrainItem& item : batch) {
        if (item.y_s.cols() != dim || !item.y_s.same_shape(item.eps))
            throw std::invalid_argument("linear: batch item shape mismatch");
        for (std::size_t r = 0; r < item.y_s.rows(); ++r, ++at)
            for (std::size_t c = 0; c < dim; ++c) {
                X(at, c) = item.y_s(r, c);
                E(at, c) = item.eps(r, c);
            }
    }
    // R = X W^T + b - E, loss = |R|^2 / (n*dim),
    // dW = 2/(n*dim) R^T X, db = 2/(n*dim) colsum(R).
    Mat R(n, dim);
    kernels::matmul_transb(X.data(), W_.data(), R.data(), n, dim, dim);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < dim; ++c) R(r, c) += b_[c] - E(r, c);
    double denom = double(n) * double(dim);
    if (loss) *loss = kernels::dot(R.data(), R.data(), R.size()) / denom;
    dW = Mat(dim, dim);
    kernels::matmul_transa(R.data(), X.data(), dW.data(), dim, n, dim);
    double scale = 2.0 / denom;
    for (std::size_t i = 0; i < dW.size(); ++i) dW[i] *= scale;
    db = Mat(1, dim);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < dim; ++c) db[c] += R(r, c);
    for (std::size_t c = 0; c < dim; ++c) db[c] *= scale;
}

double LinearDenoiser::train_batch(const std::vector<TrainItem>& batch, double lr) {
    Mat dW, db;
    double loss = 0.0;
    loss_gradients(batch, dW, db, &loss);
    ++adam_t_;
    AdamConfig cfg;
    adam_step(W_, mW_, vW_, dW, adam_t_, lr, cfg, "linear.W");
    adam_step(b_, mb_, vb_, db, adam_t_, lr, cfg, "linear.b");
    return loss;
}

}  // namespace modiff
