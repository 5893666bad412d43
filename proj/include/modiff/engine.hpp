#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "modiff/clip.hpp"
#include "modiff/denoiser.hpp"
#include "modiff/dropout.hpp"
#include "modiff/matrix.hpp"
#include "modiff/rng.hpp"
#include "modiff/schedule.hpp"
#include "modiff/skeleton.hpp"

namespace modiff {

// Per-dimension z-score statistics. Dimensions whose spread is below 1e-8
// keep sigma 1 so constant features pass through unscaled.
struct NormStats {
    std::vector<double> motion_mu, motion_sigma;    // [63]
    std::vector<double> control_mu, control_sigma;  // [3]

    static NormStats identity(std::size_t motion_dim = kMotionDim,
                              std::size_t control_dim = kControlDim);
    // Motion stats pool x and y rows (skipping masked-out x entries);
    // control stats pool the c rows.
    static NormStats fit(const std::vector<Window>& dataset);

    Mat normalize_motion(const Mat& m) const;
    Mat denormalize_motion(const Mat& m) const;
    Mat normalize_control(const Mat& c) const;
};

struct TrainConfig {
    std::size_t epochs = 50;
    std::size_t batch_size = 64;
    double learning_rate = 1e-3;  // drop to 5e-5 for the full-size model
    DropoutScheduler dropout;
    std::uint64_t seed = 0;
};

// Training loop: per epoch, shuffle the windows, and per sample draw the
// diffusion step, the target noise and the context-dropout coin from the
// epoch's substream of cfg.seed. Returns the per-epoch mean loss. Works
// with non-trainable denoisers too (their train_batch only scores).
std::vector<double> train(const std::vector<Window>& dataset, Denoiser& denoiser,
                          const NoiseSchedule& sched, const NormStats& norm,
                          const TrainConfig& cfg);

struct SampleOptions {
    bool posterior_variance = false;
};

// Reverse-chain inference for one window. x is [T_h, D] un-normalized past
// motion (entries with x_mask false are zeroed after normalization), c is
// [T_h+T_p, C] control; the returned y0 is [T_p, D], de-normalized.
Mat sample_window(const Mat& x, const Mat& c, const Denoiser& denoiser,
                  const NoiseSchedule& sched, RandomStream& rng, const NormStats& norm,
                  const SampleOptions& opt = {}, const Mask* x_mask = nullptr);

struct RolloutOptions {
    std::size_t t_p = 10;           // prediction span of each window
    bool hold_last_control = true;  // pad a short control stream
    SampleOptions sample;
};

// Autoregressive generation: each step samples a window and commits only
// its first frame. control_stream should cover T_h + n_frames + t_p - 1
// rows; shorter streams are padded by holding the last row when enabled.
Mat rollout(const Mat& seed_motion, const Mat& control_stream, std::size_t n_frames,
            const Denoiser& denoiser, const NoiseSchedule& sched, RandomStream& rng,
            const NormStats& norm, const RolloutOptions& opt = {});

struct ReconstructOptions {
    std::size_t t_h = 10;
    std::size_t t_p = 10;
    std::size_t horizon = 0;  // frames per directional pass; 0 means t_h
    std::size_t max_iterations = 16;
    bool average_passes = false;  // average where both passes fill an entry
    SampleOptions sample;
};

struct ReconstructReport {
    std::size_t iterations = 0;
    std::size_t filled_entries = 0;
    std::size_t unfilled_entries = 0;
    bool complete = true;
};

// Hole filling per the time-reversal scheme: each hole is approached from
// the left by autoregressive forward generation, then from the right by
// generating over the frame-reversed, control-negated sequence. Generated
// values land in masked entries only; observed entries are never touched.
// Iterates until the mask is satisfied or max_iterations passes make no
// progress (partial result, reported).
Clip reconstruct(const Clip& clip, const SkeletonSpec& skel, const Denoiser& denoiser,
                 const NoiseSchedule& sched, RandomStream& rng, const NormStats& norm,
                 const ReconstructOptions& opt = {}, ReconstructReport* report = nullptr);

}  // namespace modiff
