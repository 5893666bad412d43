#include "modiff/engine.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "modiff/ddpm.hpp"

namespace modiff {
namespace {

void check_dims(const std::vector<double>& mu, const std::vector<double>& sigma, std::size_t cols,
                const char* what) {
    if (mu.size() != cols || sigma.size() != cols)
        throw std::invalid_argument(std::string("norm stats: ") + what + " has " +
                                    std::to_string(cols) + " columns, stats have " +
                                    std::to_string(mu.size()));
}

void zero_masked(Mat& m, const Mask& mask, const char* where) {
    if (mask.rows() != m.rows() || mask.cols() != m.cols())
        throw std::invalid_argument(std::string(where) + ": mask shape mismatch");
    for (std::size_t i = 0; i < m.size(); ++i)
        if (!mask[i]) m[i] = 0.0;
}

void require_finite_step(const Mat& m, std::size_t s) {
    for (std::size_t i = 0; i < m.size(); ++i)
        if (!std::isfinite(m[i]))
            throw std::runtime_error("sample: non-finite value at diffusion step " +
                                     std::to_string(s));
}

}  // namespace

NormStats NormStats::identity(std::size_t motion_dim, std::size_t control_dim) {
    NormStats n;
    n.motion_mu.assign(motion_dim, 0.0);
    n.motion_sigma.assign(motion_dim, 1.0);
    n.control_mu.assign(control_dim, 0.0);
    n.control_sigma.assign(control_dim, 1.0);
    return n;
}

NormStats NormStats::fit(const std::vector<Window>& dataset) {
    if (dataset.empty()) throw std::invalid_argument("norm stats: empty dataset");
    std::size_t dm = dataset.front().x.cols();
    std::size_t dc = dataset.front().c.cols();
    std::vector<double> msum(dm, 0.0), msq(dm, 0.0), mcount(dm, 0.0);
    std::vector<double> csum(dc, 0.0), csq(dc, 0.0);
    double ccount = 0.0;
    auto add_motion = [&](const Mat& m, const Mask* mask) {
        for (std::size_t r = 0; r < m.rows(); ++r)
            for (std::size_t d = 0; d < dm; ++d) {
                if (mask && !(*mask)(r, d)) continue;
                double v = m(r, d);
                msum[d] += v;
                msq[d] += v * v;
                mcount[d] += 1.0;
            }
    };
    for (const Window& w : dataset) {
        add_motion(w.x, w.x_mask ? &*w.x_mask : nullptr);
        add_motion(w.y, nullptr);
        for (std::size_t r = 0; r < w.c.rows(); ++r)
            for (std::size_t d = 0; d < dc; ++d) {
                double v = w.c(r, d);
                csum[d] += v;
                csq[d] += v * v;
            }
        ccount += double(w.c.rows());
    }
    NormStats n;
    n.motion_mu.resize(dm);
    n.motion_sigma.resize(dm);
    for (std::size_t d = 0; d < dm; ++d) {
        double cnt = std::max(mcount[d], 1.0);
        double mu = msum[d] / cnt;
        double var = std::max(0.0, msq[d] / cnt - mu * mu);
        double sigma = std::sqrt(var);
        n.motion_mu[d] = mu;
        n.motion_sigma[d] = sigma < 1e-8 ? 1.0 : sigma;
    }
    n.control_mu.resize(dc);
    n.control_sigma.resize(dc);
    for (std::size_t d = 0; d < dc; ++d) {
        double mu = csum[d] / ccount;
        double var = std::max(0.0, csq[d] / ccount - mu * mu);
        double sigma = std::sqrt(var);
        n.control_mu[d] = mu;
        n.control_sigma[d] = sigma < 1e-8 ? 1.0 : sigma;
    }
    return n;
}

Mat NormStats::normalize_motion(const Mat& m) const {
    check_dims(motion_mu, motion_sigma, m.cols(), "motion");
    Mat out(m.rows(), m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t d = 0; d < m.cols(); ++d)
            out(r, d) = (m(r, d) - motion_mu[d]) / motion_sigma[d];
    return out;
}

Mat NormStats::denormalize_motion(const Mat& m) const {
    check_dims(motion_mu, motion_sigma, m.cols(), "motion");
    Mat out(m.rows(), m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t d = 0; d < m.cols(); ++d)
            out(r, d) = m(r, d) * motion_sigma[d] + motion_mu[d];
    return out;
}

Mat NormStats::normalize_control(const Mat& c) const {
    check_dims(control_mu, control_sigma, c.cols(), "control");
    Mat out(c.rows(), c.cols());
    for (std::size_t r = 0; r < c.rows(); ++r)
        for (std::size_t d = 0; d < c.cols(); ++d)
            out(r, d) = (c(r, d) - control_mu[d]) / control_sigma[d];
    return out;
}

std::vector<double> train(const std::vector<Window>& dataset, Denoiser& denoiser,
                          const NoiseSchedule& sched, const NormStats& norm,
                          const TrainConfig& cfg) {
    if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
    if (cfg.batch_size == 0) throw std::invalid_argument("train: batch_size must be positive");
    if (!(cfg.learning_rate > 0.0))
        throw std::invalid_argument("train: learning rate must be positive");
    std::size_t S = sched.steps();
    std::size_t n = dataset.size();

    std::vector<double> trace;
    trace.reserve(cfg.epochs);
    std::vector<std::size_t> order(n);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        RandomStream rng = RandomStream(cfg.seed).substream("training", epoch);
        double p_d = dropout_rate_at(epoch, cfg.dropout);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        for (std::size_t i = n; i-- > 1;)
            std::swap(order[i], order[std::size_t(rng.integer(0, std::int64_t(i)))]);

        double epoch_loss = 0.0;
        std::size_t counted = 0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            std::size_t stop = std::min(n, start + cfg.batch_size);
            std::vector<TrainItem> items;
            items.reserve(stop - start);
            for (std::size_t i = start; i < stop; ++i) {
                const Window& w = dataset[order[i]];
                Mat xn = norm.normalize_motion(w.x);
                if (w.x_mask) zero_masked(xn, *w.x_mask, "train");
                Mat cn = norm.normalize_control(w.c);
                Mat yn = norm.normalize_motion(w.y);

                std::size_t s = std::size_t(rng.integer(1, std::int64_t(S)));
                Mat eps = rng.normal_matrix(yn.rows(), yn.cols());
                double p = rng.uniform();
                // the context noise is drawn whether or not it is used, so
                // the stream stays aligned across dropout outcomes
                Mat eps_x = rng.normal_matrix(xn.rows(), xn.cols());
                Mat xd = diffusion_dropout(xn, s, eps_x, sched, p, p_d);

                TrainItem item;
                item.y_s = forward_sample(yn, s, eps, sched);
                item.s = s;
                item.x = std::move(xd);
                item.c = std::move(cn);
                item.eps = std::move(eps);
                items.push_back(std::move(item));
            }
            double loss = denoiser.train_batch(items, cfg.learning_rate);
            if (!std::isfinite(loss)) {
                std::string diag = denoiser.diagnostics();
                throw std::runtime_error(
                    "train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                    std::to_string(start / cfg.batch_size) + (diag.empty() ? "" : "; " + diag));
            }
            epoch_loss += loss * double(items.size());
            counted += items.size();
        }
        trace.push_back(epoch_loss / double(counted));
    }
    return trace;
}

Mat sample_window(const Mat& x, const Mat& c, const Denoiser& denoiser,
                  const NoiseSchedule& sched, RandomStream& rng, const NormStats& norm,
                  const SampleOptions& opt, const Mask* x_mask) {
    if (c.rows() <= x.rows())
        throw std::invalid_argument("sample: control must extend past the motion context");
    std::size_t t_p = c.rows() - x.rows();
    Mat xn = norm.normalize_motion(x);
    if (x_mask) zero_masked(xn, *x_mask, "sample");
    Mat cn = norm.normalize_control(c);

    Mat y = rng.normal_matrix(t_p, x.cols());
    for (std::size_t s = sched.steps(); s >= 1; --s) {
        Mat eps_hat = denoiser.predict(y, s, xn, cn);
        Mat z = s > 1 ? rng.normal_matrix(t_p, x.cols()) : Mat(t_p, x.cols());
        y = reverse_step(y, s, eps_hat, z, sched, opt.posterior_variance);
        require_finite_step(y, s);
    }
    return norm.denormalize_motion(y);
}

Mat rollout(const Mat& seed_motion, const Mat& control_stream, std::size_t n_frames,
            const Denoiser& denoiser, const NoiseSchedule& sched, RandomStream& rng,
            const NormStats& norm, const RolloutOptions& opt) {
    if (n_frames == 0) throw std::invalid_argument("rollout: need at least one frame");
    if (control_stream.rows() == 0) throw std::invalid_argument("rollout: empty control stream");
    std::size_t t_h = seed_motion.rows();
    std::size_t need = t_h + n_frames + opt.t_p - 1;
    if (control_stream.rows() < need && !opt.hold_last_control)
        throw std::invalid_argument("rollout: control stream has " +
                                    std::to_string(control_stream.rows()) + " rows, needs " +
                                    std::to_string(need) + " (padding disabled)");

    Mat window = seed_motion;
    Mat out(n_frames, seed_motion.cols());
    std::size_t last = control_stream.rows() - 1;
    for (std::size_t t = 0; t < n_frames; ++t) {
        Mat c_win(t_h + opt.t_p, control_stream.cols());
        for (std::size_t r = 0; r < c_win.rows(); ++r) {
            const double* src = control_stream.row(std::min(t + r, last));
            for (std::size_t d = 0; d < c_win.cols(); ++d) c_win(r, d) = src[d];
        }
        Mat y = sample_window(window, c_win, denoiser, sched, rng, norm, opt.sample);
        for (std::size_t d = 0; d < out.cols(); ++d) out(t, d) = y(0, d);
        // slide the context by one frame
        for (std::size_t r = 0; r + 1 < t_h; ++r)
            for (std::size_t d = 0; d < window.cols(); ++d) window(r, d) = window(r + 1, d);
        for (std::size_t d = 0; d < window.cols(); ++d) window(t_h - 1, d) = y(0, d);
    }
    return out;
}

namespace {

// Maximal frame runs containing at least one unavailable entry.
std::vector<std::pair<std::size_t, std::size_t>> find_holes(const Mask& avail) {
    std::vector<std::pair<std::size_t, std::size_t>> holes;
    std::size_t t = 0;
    while (t < avail.rows()) {
        bool missing = false;
        for (std::size_t d = 0; d < avail.cols(); ++d) missing |= !avail(t, d);
        if (!missing) {
            ++t;
            continue;
        }
        std::size_t a = t;
        while (t < avail.rows()) {
            bool m2 = false;
            for (std::size_t d = 0; d < avail.cols(); ++d) m2 |= !avail(t, d);
            if (!m2) break;
            ++t;
        }
        holes.emplace_back(a, t);
    }
    return holes;
}

}  // namespace

Clip reconstruct(const Clip& clip, const SkeletonSpec& skel, const Denoiser& denoiser,
                 const NoiseSchedule& sched, RandomStream& rng, const NormStats& norm,
                 const ReconstructOptions& opt, ReconstructReport* report) {
    clip.validate();
    skel.validate();
    if (!clip.mask) throw std::invalid_argument("reconstruct: clip has no mask");
    if (opt.t_h == 0 || opt.t_p == 0)
        throw std::invalid_argument("reconstruct: window sizes must be positive");

    std::size_t T = clip.frames();
    std::size_t D = clip.motion.cols();
    std::size_t t_h = opt.t_h, t_p = opt.t_p;
    std::size_t horizon = opt.horizon ? opt.horizon : t_h;

    Clip work = clip;
    const Mask& obs = *clip.mask;
    Mask avail = obs;       // usable as context
    Mask committed = obs;   // not writable anymore (observed or filled earlier)
    ReconstructReport rep;

    auto all_available = [&]() {
        for (std::size_t i = 0; i < avail.size(); ++i)
            if (!avail[i]) return false;
        return true;
    };

    std::size_t ctrl_last = T - 1;
    auto run_iteration = [&]() {
        bool wrote_any = false;
        Mask fwd_now(T, D);
        auto holes = find_holes(avail);
        for (auto [a, b] : holes) {
            if (a >= t_h) {
                // forward pass over the hole, committing one frame at a time
                for (std::size_t g = 0; g < horizon && a + g < b; ++g) {
                    std::size_t f = a + g;
                    Mat ctx(t_h, D);
                    Mask ctx_mask(t_h, D);
                    for (std::size_t r = 0; r < t_h; ++r) {
                        std::size_t src = f - t_h + r;
                        for (std::size_t d = 0; d < D; ++d) {
                            ctx(r, d) = work.motion(src, d);
                            ctx_mask(r, d) = avail(src, d);
                        }
                    }
                    Mat c_win(t_h + t_p, work.control.cols());
                    for (std::size_t r = 0; r < c_win.rows(); ++r) {
                        const double* src = work.control.row(std::min(f - t_h + r, ctrl_last));
                        for (std::size_t d = 0; d < c_win.cols(); ++d) c_win(r, d) = src[d];
                    }
                    Mat y = sample_window(ctx, c_win, denoiser, sched, rng, norm, opt.sample,
                                          &ctx_mask);
                    for (std::size_t d = 0; d < D; ++d) {
                        if (committed(f, d)) continue;
                        work.motion(f, d) = y(0, d);
                        fwd_now(f, d) = 1;
                        avail(f, d) = 1;
                        wrote_any = true;
                    }
                }
            }
            if (b + t_h <= T) {
                // backward pass: frame-reversed context, negated controls
                for (std::size_t g = 0; g < horizon && b >= a + 1 + g; ++g) {
                    std::size_t f = b - 1 - g;
                    Mat ctx(t_h, D);
                    Mask ctx_mask(t_h, D);
                    for (std::size_t r = 0; r < t_h; ++r) {
                        std::size_t src = f + t_h - r;
                        for (std::size_t d = 0; d < D; ++d) {
                            ctx(r, d) = work.motion(src, d);
                            ctx_mask(r, d) = avail(src, d);
                        }
                    }
                    Mat c_win(t_h + t_p, work.control.cols());
                    for (std::size_t r = 0; r < c_win.rows(); ++r) {
                        std::size_t want = f + t_h >= r ? f + t_h - r : 0;
                        const double* src = work.control.row(std::min(want, ctrl_last));
                        for (std::size_t d = 0; d < c_win.cols(); ++d) c_win(r, d) = -src[d];
                    }
                    Mat y = sample_window(ctx, c_win, denoiser, sched, rng, norm, opt.sample,
                                          &ctx_mask);
                    for (std::size_t d = 0; d < D; ++d) {
                        if (committed(f, d)) continue;
                        if (fwd_now(f, d) && opt.average_passes)
                            work.motion(f, d) = 0.5 * (work.motion(f, d) + y(0, d));
                        else
                            work.motion(f, d) = y(0, d);
                        avail(f, d) = 1;
                        wrote_any = true;
                    }
                }
            }
        }
        for (std::size_t i = 0; i < avail.size(); ++i)
            if (avail[i]) committed[i] = 1;
        return wrote_any;
    };

    while (!all_available() && rep.iterations < opt.max_iterations) {
        ++rep.iterations;
        if (!run_iteration()) break;
    }

    for (std::size_t i = 0; i < avail.size(); ++i) {
        if (!obs[i] && avail[i]) ++rep.filled_entries;
        if (!avail[i]) ++rep.unfilled_entries;
    }
    rep.complete = rep.unfilled_entries == 0;
    if (report) *report = rep;

    work.mask = avail;
    return work;
}

}  // namespace modiff
