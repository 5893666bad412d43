// Release gates for the motion diffusion engine. Each gate prints one
// [PASS]/[FAIL] line with the measured values; the process exits 0 only
// when every gate holds. Gates that shell out to the command line tool
// take its path as argv[1] and a scratch directory as argv[2].

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "modiff/clip.hpp"
#include "modiff/ddpm.hpp"
#include "modiff/denoiser.hpp"
#include "modiff/dropout.hpp"
#include "modiff/engine.hpp"
#include "modiff/gait.hpp"
#include "modiff/metrics.hpp"
#include "modiff/rng.hpp"
#include "modiff/schedule.hpp"
#include "modiff/skeleton.hpp"
#include "modiff/transformer.hpp"

namespace fs = std::filesystem;
using modiff::Mat;

namespace {

int g_failures = 0;

void report(int gate, const std::string& name, bool pass, const std::string& detail,
            double seconds) {
    if (!pass) ++g_failures;
    std::printf("[%s] %d. %s: %s (%.1f s)\n", pass ? "PASS" : "FAIL", gate, name.c_str(),
                detail.c_str(), seconds);
    std::fflush(stdout);
}

void run_gate(int gate, const std::string& name,
              const std::function<std::pair<bool, std::string>()>& body) {
    auto t0 = std::chrono::steady_clock::now();
    bool pass = false;
    std::string detail;
    try {
        auto [p, d] = body();
        pass = p;
        detail = d;
    } catch (const std::exception& e) {
        detail = std::string("exception: ") + e.what();
    }
    double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report(gate, name, pass, detail, seconds);
}

double max_abs_diff(const Mat& a, const Mat& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

Mat take_rows(const Mat& m, std::size_t r0, std::size_t r1) {
    Mat out(r1 - r0, m.cols());
    for (std::size_t r = r0; r < r1; ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) out(r - r0, c) = m(r, c);
    return out;
}

// gate 1: the closed-form pieces must agree with each other: noising then
// un-noising returns the input, the predicted reverse mean equals the
// posterior mean evaluated at the recovered signal, and the s=1 posterior
// collapses onto the signal with zero spread.
std::pair<bool, std::string> gate_closed_forms() {
    modiff::NoiseSchedule sched = modiff::build_schedule(100, 1e-4, 0.02);
    modiff::RandomStream rng(101);
    double worst = 0.0;
    const int cases = 10000;
    for (int i = 0; i < cases; ++i) {
        std::size_t s = std::size_t(rng.integer(1, 100));
        Mat y0 = rng.normal_matrix(2, 3);
        Mat eps = rng.normal_matrix(2, 3);
        Mat ys = modiff::forward_sample(y0, s, eps, sched);
        worst = std::max(worst, max_abs_diff(modiff::recover_y0(ys, s, eps, sched), y0));
        auto post = modiff::posterior_params(ys, y0, s, sched);
        if (s == 1) {
            worst = std::max(worst, max_abs_diff(post.mu_tilde, y0));
            worst = std::max(worst, std::abs(post.beta_tilde));
        }
        Mat mu = modiff::predict_mu(ys, s, eps, sched);
        auto exact = modiff::posterior_params(ys, modiff::recover_y0(ys, s, eps, sched), s, sched);
        worst = std::max(worst, max_abs_diff(mu, exact.mu_tilde));
    }
    return {worst < 1e-10,
            "max abs error " + fmt(worst) + " over " + std::to_string(cases) + " cases, limit 1e-10"};
}

// gate 2: running the one-step-at-a-time chain to step s must land on the
// same distribution as the single-jump form, checked on sample moments.
std::pair<bool, std::string> gate_forward_marginal() {
    modiff::NoiseSchedule sched = modiff::build_schedule(100, 1e-4, 0.02);
    modiff::RandomStream rng(202);
    const std::size_t n = 100000;
    const double y0 = 0.7;
    double worst_ratio = 0.0;
    bool pass = true;
    for (std::size_t s : {std::size_t(1), std::size_t(10), std::size_t(50), std::size_t(100)}) {
        std::vector<double> iterated(n, y0);
        for (std::size_t step = 1; step <= s; ++step) {
            double keep = std::sqrt(1.0 - sched.beta(step));
            double add = std::sqrt(sched.beta(step));
            for (double& y : iterated) y = keep * y + add * rng.normal();
        }
        Mat base(n, 1);
        base.fill(y0);
        Mat one_step = modiff::forward_sample(base, s, rng.normal_matrix(n, 1), sched);

        auto moments = [](const double* v, std::size_t count) {
            double m = 0.0;
            for (std::size_t i = 0; i < count; ++i) m += v[i];
            m /= double(count);
            double var = 0.0;
            for (std::size_t i = 0; i < count; ++i) var += (v[i] - m) * (v[i] - m);
            return std::pair<double, double>{m, var / double(count)};
        };
        auto [m_it, v_it] = moments(iterated.data(), n);
        auto [m_os, v_os] = moments(&one_step[0], n);

        double se_mean = std::sqrt(v_it / double(n) + v_os / double(n));
        double se_var = std::sqrt(2.0 / double(n)) * std::sqrt(v_it * v_it + v_os * v_os);
        double zr_mean = std::abs(m_it - m_os) / (3.0 * se_mean);
        double zr_var = std::abs(v_it - v_os) / (3.0 * se_var);
        worst_ratio = std::max({worst_ratio, zr_mean, zr_var});
        if (zr_mean >= 1.0 || zr_var >= 1.0) pass = false;
    }
    return {pass, "worst |moment gap| at " + fmt(worst_ratio) +
                      " of the 3-standard-error budget, 100000 samples per step"};
}

// gate 3: the hand-written backward pass against central finite
// differences in 64-bit, probing every small tensor exhaustively and the
// large ones on a spread of entries. The output projection starts at zero
// and blocks upstream gradient flow, so a few optimizer steps come first.
std::pair<bool, std::string> gate_gradients() {
    modiff::TransformerConfig cfg;
    cfg.d_model = 8;
    cfg.heads = 2;
    cfg.n_enc_m = 1;
    cfg.n_enc_c = 1;
    cfg.n_x = 1;
    cfg.n_dec = 1;
    cfg.t_h = 3;
    cfg.t_p = 2;
    cfg.motion_dim = 4;
    cfg.control_dim = 2;
    modiff::TinyTransformer<double> net(cfg, 314);

    modiff::RandomStream rng(315);
    std::vector<modiff::TrainItem> batch;
    for (int i = 0; i < 2; ++i) {
        modiff::TrainItem item;
        item.y_s = rng.normal_matrix(cfg.t_p, cfg.motion_dim);
        item.s = std::size_t(rng.integer(1, 10));
        item.x = rng.normal_matrix(cfg.t_h, cfg.motion_dim);
        item.c = rng.normal_matrix(cfg.t_h + cfg.t_p, cfg.control_dim);
        item.eps = rng.normal_matrix(cfg.t_p, cfg.motion_dim);
        batch.push_back(std::move(item));
    }
    for (int warm = 0; warm < 3; ++warm) {
        net.batch_loss_and_grads(batch);
        net.adam_step_all(1e-2);
    }

    net.batch_loss_and_grads(batch);
    std::vector<modiff::Matrix<double>> analytic;
    for (std::size_t i = 0; i < net.tensor_count(); ++i) analytic.push_back(net.grad(i));

    // probes pooled per layer type, the tensor name with indices stripped
    std::map<std::string, std::pair<std::size_t, std::size_t>> per_type;  // probed, total
    const double h = 1e-4;
    double worst = 0.0;
    std::size_t probes = 0;
    for (std::size_t i = 0; i < net.tensor_count(); ++i) {
        std::string type;
        for (char ch : net.tensor_name(i))
            if (!std::isdigit(static_cast<unsigned char>(ch))) type.push_back(ch);
        std::size_t size = net.tensor(i).size();
        per_type[type].second += size;
        std::vector<std::size_t> idx;
        if (size <= 64)
            for (std::size_t k = 0; k < size; ++k) idx.push_back(k);
        else
            for (std::size_t k = 0; k < 24; ++k) idx.push_back(k * size / 24);
        for (std::size_t pi : idx) {
            double saved = net.tensor(i)[pi];
            net.tensor(i)[pi] = saved + h;
            double up = net.batch_loss(batch);
            net.tensor(i)[pi] = saved - h;
            double down = net.batch_loss(batch);
            net.tensor(i)[pi] = saved;
            double fd = (up - down) / (2.0 * h);
            double an = analytic[i][pi];
            double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6});
            worst = std::max(worst, rel);
            ++probes;
            ++per_type[type].first;
        }
    }
    bool covered = true;
    for (const auto& [type, counts] : per_type)
        if (counts.first < std::min<std::size_t>(20, counts.second)) covered = false;
    return {worst < 1e-4 && covered, "max relative error " + fmt(worst) + " over " +
                                         std::to_string(probes) + " probed parameters in " +
                                         std::to_string(per_type.size()) + " layer types, limit 1e-4"};
}

// gate 4: full reverse-chain sampling with the analytic oracle standing in
// for a trained network. For a N(0.5, 0.04) signal prior the chain must
// come back to that distribution; the step-variance chain widens the
// spread slightly, which the band allows for.
std::pair<bool, std::string> gate_oracle_sampling() {
    modiff::NoiseSchedule sched = modiff::build_schedule(100, 1e-4, 0.1);
    modiff::GaussianOracleDenoiser oracle(std::vector<double>(5, 0.5), 0.04, sched);
    modiff::NormStats norm = modiff::NormStats::identity(5, 1);
    Mat x(1, 5);
    x.fill(0.5);
    Mat c(6, 1);
    modiff::RandomStream rng(404);

    double sum = 0.0, sumsq = 0.0;
    const std::size_t windows = 10000;
    std::size_t n = 0;
    for (std::size_t w = 0; w < windows; ++w) {
        Mat y0 = modiff::sample_window(x, c, oracle, sched, rng, norm);
        for (std::size_t i = 0; i < y0.size(); ++i) {
            sum += y0[i];
            sumsq += y0[i] * y0[i];
            ++n;
        }
    }
    double mean = sum / double(n);
    double sd = std::sqrt(sumsq / double(n) - mean * mean);
    bool pass = mean > 0.49 && mean < 0.51 && sd > 0.19 && sd < 0.21;
    return {pass, "mean " + fmt(mean) + " in [0.49, 0.51], std " + fmt(sd) +
                      " in [0.19, 0.21] over 10000 windows"};
}

// gate 5: end-to-end training on synthetic gait. 64 windows, batches of
// 32, 1000 epochs: 2000 optimizer steps, with the context-dropout ramp
// active for the second half. The loss must at least halve, and rollouts
// from the trained weights must cut the bone-length error of the
// untrained ones by half as well.
std::pair<bool, std::string> gate_training() {
    modiff::GaitParams walk;
    modiff::GaitParams vary;
    vary.profile = "vary";
    std::vector<modiff::Window> windows;
    for (const modiff::Clip& clip :
         {modiff::gen_synthetic_gait(walk, 501), modiff::gen_synthetic_gait(vary, 502)}) {
        modiff::Clip rel = modiff::root_relative(clip);
        for (modiff::Window& w : modiff::slice_windows(rel, 10, 10, 5))
            if (windows.size() < 64) windows.push_back(std::move(w));
    }
    if (windows.size() != 64) return {false, "expected 64 windows, got " + std::to_string(windows.size())};

    modiff::NoiseSchedule sched = modiff::build_schedule(100, 1e-4, 0.02);
    modiff::NormStats norm = modiff::NormStats::fit(windows);
    modiff::TransformerDenoiser den(modiff::TransformerConfig::desk(), 1234);
    modiff::SkeletonSpec skel = modiff::default_skeleton();

    modiff::Clip held = modiff::root_relative(modiff::gen_synthetic_gait(walk, 503));
    Mat seed_motion = take_rows(held.motion, 0, 10);
    const Mat& stream = held.control;

    auto rollout_rmse = [&]() {
        modiff::RandomStream rng = modiff::RandomStream(77).substream("sampling");
        Mat gen = modiff::rollout(seed_motion, stream, 100, den, sched, rng, norm);
        modiff::Clip out;
        out.motion = gen;
        out.control = take_rows(stream, 0, 100);
        out.fps = held.fps;
        return modiff::bone_length_rmse(out, skel).rmse_cm;
    };
    double rmse_untrained = rollout_rmse();

    modiff::TrainConfig cfg;
    cfg.epochs = 1000;
    cfg.batch_size = 32;
    cfg.learning_rate = 2e-3;
    cfg.seed = 1234;
    std::vector<double> losses = modiff::train(windows, den, sched, norm, cfg);
    double rmse_trained = rollout_rmse();

    bool loss_ok = losses.back() < 0.5 * losses.front();
    bool rmse_ok = rmse_trained < 0.5 * rmse_untrained;
    return {loss_ok && rmse_ok, "loss " + fmt(losses.front()) + " -> " + fmt(losses.back()) +
                                    " over 2000 steps, rollout bone rmse " + fmt(rmse_untrained) +
                                    " -> " + fmt(rmse_trained) + " cm, both must halve"};
}

// gate 6: the context-corruption coin comes up at the configured rate, and
// the rate schedule hits its documented waypoints exactly.
std::pair<bool, std::string> gate_dropout() {
    modiff::NoiseSchedule sched = modiff::build_schedule(100, 1e-4, 0.02);
    modiff::RandomStream rng(606);
    Mat x = rng.normal_matrix(3, 4);
    const std::size_t n = 100000;
    double worst_gap = 0.0;
    bool pass = true;
    for (double p_d : {0.0, 0.05, 0.25}) {
        std::size_t corrupted = 0;
        for (std::size_t i = 0; i < n; ++i) {
            double p = rng.uniform();
            Mat out = modiff::diffusion_dropout(x, 40, rng.normal_matrix(3, 4), sched, p, p_d);
            bool same = true;
            for (std::size_t k = 0; k < x.size() && same; ++k) same = out[k] == x[k];
            if (!same) ++corrupted;
        }
        double freq = double(corrupted) / double(n);
        if (p_d == 0.0) {
            if (corrupted != 0) pass = false;
        } else {
            double limit = 3.0 * std::sqrt(p_d * (1.0 - p_d) / double(n));
            worst_gap = std::max(worst_gap, std::abs(freq - p_d) / limit);
            if (std::abs(freq - p_d) >= limit) pass = false;
        }
    }
    modiff::DropoutScheduler sch;
    bool exact = modiff::dropout_rate_at(0, sch) == 0.0 && modiff::dropout_rate_at(499, sch) == 0.0 &&
                 modiff::dropout_rate_at(500, sch) == 0.05 &&
                 modiff::dropout_rate_at(1000000, sch) == 0.25;
    return {pass && exact, "worst rate gap at " + fmt(worst_gap) +
                               " of the binomial 3-sigma budget over 100000 trials, schedule "
                               "waypoints exact"};
}

// gate 7: hole filling. Observed entries must survive bit for bit, every
// hole must be filled, and the error inside the hole may not exceed twice
// what free generation scores on the same entries.
std::pair<bool, std::string> gate_reconstruction() {
    modiff::GaitParams p;
    p.duration = 5.0;
    modiff::Clip truth = modiff::root_relative(modiff::gen_synthetic_gait(p, 701));
    modiff::SkeletonSpec skel = modiff::default_skeleton();

    modiff::NormStats norm = modiff::NormStats::fit(modiff::slice_windows(truth, 10, 10, 5));
    modiff::NoiseSchedule sched = modiff::build_schedule(100, 1e-4, 0.02);
    modiff::GaussianOracleDenoiser oracle(std::vector<double>(modiff::kMotionDim, 0.0), 1.0, sched);

    // knock out three joints for ten frames
    modiff::Clip holed = truth;
    modiff::Mask mask(truth.frames(), modiff::kMotionDim);
    mask.fill(1);
    for (std::size_t t = 40; t < 50; ++t)
        for (std::size_t d = 45; d < 54; ++d) {
            mask(t, d) = 0;
            holed.motion(t, d) = 0.0;
        }
    holed.mask = mask;

    modiff::RandomStream rng(702);
    modiff::ReconstructReport rep;
    modiff::Clip recon = modiff::reconstruct(holed, skel, oracle, sched, rng, norm, {}, &rep);

    bool observed_intact = true;
    for (std::size_t t = 0; t < truth.frames() && observed_intact; ++t)
        for (std::size_t d = 0; d < modiff::kMotionDim && observed_intact; ++d)
            if (mask(t, d)) observed_intact = recon.motion(t, d) == truth.motion(t, d);

    double se_re = 0.0;
    for (std::size_t t = 40; t < 50; ++t)
        for (std::size_t d = 45; d < 54; ++d) {
            double e = recon.motion(t, d) - truth.motion(t, d);
            se_re += e * e;
        }
    double rmse_re = std::sqrt(se_re / 90.0);

    // free generation over the same frames from the same context length
    modiff::RandomStream rng_free(703);
    Mat x = take_rows(truth.motion, 30, 40);
    Mat c = take_rows(truth.control, 30, 50);
    Mat y0 = modiff::sample_window(x, c, oracle, sched, rng_free, norm);
    double se_ge = 0.0;
    for (std::size_t r = 0; r < 10; ++r)
        for (std::size_t d = 45; d < 54; ++d) {
            double e = y0(r, d) - truth.motion(40 + r, d);
            se_ge += e * e;
        }
    double rmse_ge = std::sqrt(se_ge / 90.0);

    bool pass = rep.complete && rep.unfilled_entries == 0 && observed_intact &&
                rmse_re <= 2.0 * rmse_ge;
    return {pass, std::string("observed entries ") + (observed_intact ? "intact" : "CHANGED") +
                      ", " + std::to_string(rep.filled_entries) + " entries filled, hole rmse " +
                      fmt(rmse_re) + " vs free-generation " + fmt(rmse_ge) + ", ratio limit 2"};
}

// gate 8: the evaluation pipeline on clips with known answers: a rigid
// pose has zero bone error, and the 2 Hz walk plants each heel exactly
// once per cycle, detectable already at the smallest tolerance.
std::pair<bool, std::string> gate_metrics() {
    modiff::SkeletonSpec skel = modiff::default_skeleton();

    modiff::GaitParams stand;
    stand.profile = "stand";
    stand.duration = 2.0;
    auto bl = modiff::bone_length_rmse(modiff::gen_synthetic_gait(stand, 801), skel);
    bool rigid_ok = bl.rmse_cm == 0.0 && bl.max_deviation_cm == 0.0;

    modiff::GaitParams walk;
    modiff::Clip clip = modiff::gen_synthetic_gait(walk, 802);
    auto fsr = modiff::footstep_curve(clip, skel);
    bool steps_ok = fsr.f_est_at_v95 == 40 && fsr.v95 == 1.0;

    std::string row = modiff::format_table_row(fsr, modiff::bone_length_rmse(clip, skel));
    std::size_t fields = 1;
    for (char ch : row)
        if (ch == ' ') ++fields;
    bool row_ok = fields == 5;

    return {rigid_ok && steps_ok && row_ok,
            "rigid clip rmse " + fmt(bl.rmse_cm) + " cm (exact zero required), walk footsteps " +
                std::to_string(fsr.f_est_at_v95) + " at v95 " + fmt(fsr.v95) +
                " cm/s, report row \"" + row + "\""};
}

// gate 9: every subcommand, run twice with the same seed and destination,
// must leave byte-identical files behind.
std::map<std::string, std::string> snapshot_dir(const fs::path& dir) {
    std::map<std::string, std::string> files;
    if (!fs::exists(dir)) return files;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::ifstream in(entry.path(), std::ios::binary);
        std::ostringstream body;
        body << in.rdbuf();
        files[fs::relative(entry.path(), dir).string()] = body.str();
    }
    return files;
}

std::pair<bool, std::string> gate_cli_determinism(const std::string& cli, const fs::path& scratch) {
    fs::remove_all(scratch);
    fs::create_directories(scratch);

    // a clip with a five-frame hole for the reconstruct run
    modiff::GaitParams p;
    p.duration = 3.0;
    modiff::Clip holed = modiff::gen_synthetic_gait(p, 901);
    modiff::Mask mask(holed.frames(), modiff::kMotionDim);
    mask.fill(1);
    for (std::size_t t = 25; t < 30; ++t)
        for (std::size_t d = 0; d < modiff::kMotionDim; ++d) {
            mask(t, d) = 0;
            holed.motion(t, d) = 0.0;
        }
    holed.mask = mask;
    fs::path masked_csv = scratch / "masked.csv";
    modiff::save_clip(holed, masked_csv.string());

    fs::path data = scratch / "data";
    fs::path train = scratch / "train";
    struct Cmd {
        std::string name;
        std::string args;
        fs::path out;
    };
    std::vector<Cmd> cmds = {
        {"schedule", "--seed 16 schedule --steps 50", scratch / "sched"},
        {"gen-data", "--seed 11 gen-data --clips 2 --duration 3", data},
        {"train",
         "--seed 12 train --data " + (data / "dataset.json").string() + " --epochs 2 --batch 8",
         train},
        {"sample",
         "--seed 13 sample --ckpt " + (train / "checkpoint.bin").string() + " --context " +
             (data / "clip_000.csv").string() + " --frames 12",
         scratch / "sample"},
        {"reconstruct", "--seed 14 reconstruct --oracle --clip " + masked_csv.string(),
         scratch / "recon"},
        {"eval", "--seed 15 eval --clip " + (data / "clip_000.csv").string(), scratch / "eval"},
    };

    for (const Cmd& cmd : cmds) {
        std::string line = "\"" + cli + "\" --out \"" + cmd.out.string() + "\" " + cmd.args +
                           " > \"" + (cmd.out / "stdout.txt").string() + "\" 2> \"" +
                           (cmd.out / "stderr.txt").string() + "\"";
        fs::create_directories(cmd.out);
        if (std::system(line.c_str()) != 0)
            return {false, cmd.name + ": first run exited nonzero"};
        auto first = snapshot_dir(cmd.out);
        if (std::system(line.c_str()) != 0)
            return {false, cmd.name + ": second run exited nonzero"};
        auto second = snapshot_dir(cmd.out);
        if (first.size() != second.size())
            return {false, cmd.name + ": run file sets differ"};
        for (const auto& [rel, body] : first) {
            auto it = second.find(rel);
            if (it == second.end() || it->second != body)
                return {false, cmd.name + ": " + rel + " differs between runs"};
        }
    }
    return {true, "all 6 subcommands byte-identical across repeat runs"};
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 3) {
        std::cerr << "usage: " << argv[0] << " <cli-binary> <scratch-dir>\n";
        return 2;
    }
    std::string cli = argv[1];
    fs::path scratch = argv[2];

    run_gate(1, "closed-form identities", gate_closed_forms);
    run_gate(2, "forward marginal consistency", gate_forward_marginal);
    run_gate(3, "gradient check", gate_gradients);
    run_gate(4, "oracle sampling distribution", gate_oracle_sampling);
    run_gate(5, "training improves rollouts", gate_training);
    run_gate(6, "context dropout rates", gate_dropout);
    run_gate(7, "reconstruction accuracy", gate_reconstruction);
    run_gate(8, "metric pipeline", gate_metrics);
    run_gate(9, "CLI determinism", [&] { return gate_cli_determinism(cli, scratch); });

    if (g_failures == 0) {
        std::printf("all 9 gates passed\n");
        return 0;
    }
    std::printf("%d of 9 gates failed\n", g_failures);
    return 1;
}
