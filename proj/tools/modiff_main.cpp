// modiff command line front end. Every subcommand writes its outputs next
// to a timestamp-free run manifest, so rerunning a command with the same
// inputs and seed reproduces each file byte for byte.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "modiff/checkpoint.hpp"
#include "modiff/clip.hpp"
#include "modiff/denoiser.hpp"
#include "modiff/engine.hpp"
#include "modiff/gait.hpp"
#include "modiff/manifest.hpp"
#include "modiff/metrics.hpp"
#include "modiff/rng.hpp"
#include "modiff/schedule.hpp"
#include "modiff/skeleton.hpp"
#include "modiff/transformer.hpp"

namespace {

using modiff::Clip;
using modiff::Mask;
using modiff::Mat;
using modiff::NormStats;

struct GlobalOpts {
    std::uint64_t seed = 0;
    std::string out = ".";
    bool quiet = false;
};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt(std::size_t v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }

std::string join(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    return os;
}

void note(const GlobalOpts& g, const std::string& line) {
    if (!g.quiet) std::cout << line << "\n";
}

// ---------------------------------------------------------------- gen-data

struct GenDataOpts {
    std::size_t clips = 10;
    double duration = 4.0;
    double fps = 20.0;
    std::string profile = "walk";
    double jitter = 0.1;
};

void run_gen_data(const GenDataOpts& o, const GlobalOpts& g) {
    std::filesystem::create_directories(g.out);
    modiff::SkeletonSpec skel = modiff::default_skeleton();
    std::string skel_path = join(g.out, "skeleton.json");
    modiff::save_skeleton(skel, skel_path);

    const char* mix[] = {"walk", "vary", "turn"};
    std::vector<std::string> names;
    for (std::size_t i = 0; i < o.clips; ++i) {
        modiff::RandomStream rs = modiff::RandomStream(g.seed).substream("data", i);
        modiff::GaitParams p;
        p.duration = o.duration;
        p.fps = o.fps;
        p.profile = o.profile == "mix" ? mix[i % 3] : o.profile;
        // draw the same variates for every profile so clip i's content
        // depends only on the seed, not on the other flags
        double u1 = rs.uniform(), u2 = rs.uniform(), u3 = rs.uniform();
        p.step_freq *= 1.0 + o.jitter * (2.0 * u1 - 1.0);
        p.stride *= 1.0 + o.jitter * (2.0 * u2 - 1.0);
        if (p.profile == "turn") p.turn_rate = u3 < 0.5 ? -0.4 : 0.4;
        Clip clip = modiff::gen_synthetic_gait(p, rs.seed());

        char name[32];
        std::snprintf(name, sizeof name, "clip_%03zu.csv", i);
        modiff::save_clip(clip, join(g.out, name));
        names.emplace_back(name);
    }

    nlohmann::json ds;
    ds["clips"] = names;
    ds["skeleton"] = "skeleton.json";
    std::string ds_path = join(g.out, "dataset.json");
    open_out(ds_path) << ds.dump(2) << "\n";

    modiff::RunManifest m;
    m.command = "gen-data";
    m.seed = g.seed;
    m.config = {{"clips", fmt(o.clips)},
                {"duration", fmt(o.duration)},
                {"fps", fmt(o.fps)},
                {"profile", o.profile},
                {"jitter", fmt(o.jitter)}};
    m.outputs.push_back(skel_path);
    for (const auto& n : names) m.outputs.push_back(join(g.out, n));
    m.outputs.push_back(ds_path);
    modiff::write_manifest(m, join(g.out, "gen-data.manifest.json"));

    note(g, "wrote " + fmt(o.clips) + " clips to " + g.out);
}

// ------------------------------------------------------------------- train

struct TrainOpts {
    std::string data;
    std::size_t epochs = 50;
    std::size_t batch = 64;
    double lr = 1e-3;
    std::size_t steps = 100;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    std::size_t t_h = 10;
    std::size_t t_p = 10;
    std::size_t stride = 5;
    std::string arch = "desk";
    std::string resume;
    bool augment = false;
    std::size_t dropout_warmup = 500;
    std::size_t dropout_interval = 100;
};

void run_train(const TrainOpts& o, const GlobalOpts& g) {
    std::filesystem::create_directories(g.out);
    std::filesystem::path base = std::filesystem::path(o.data).parent_path();

    std::ifstream ds_in(o.data);
    if (!ds_in) throw std::invalid_argument("train: cannot open " + o.data);
    nlohmann::json ds;
    try {
        ds_in >> ds;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("train: bad dataset file " + o.data + ": " + e.what());
    }
    std::string skel_path = (base / ds.at("skeleton").get<std::string>()).string();
    modiff::SkeletonSpec skel = modiff::load_skeleton(skel_path);

    // resuming takes the architecture, schedule and normalization from the
    // checkpoint; the corresponding flags only apply to fresh runs
    std::unique_ptr<modiff::TransformerDenoiser> model;
    modiff::TransformerConfig arch;
    modiff::ScheduleConfig sched_cfg;
    NormStats norm;
    if (!o.resume.empty()) {
        modiff::LoadedCheckpoint lc = modiff::load_checkpoint(o.resume);
        arch = lc.meta.arch;
        sched_cfg = lc.meta.schedule;
        norm = lc.meta.norm;
        model = std::move(lc.denoiser);
        note(g, "resumed " + o.resume + " at step " + fmt(lc.meta.train_step));
    } else {
        arch = o.arch == "full" ? modiff::TransformerConfig::full()
                                : modiff::TransformerConfig::desk();
        arch.t_h = o.t_h;
        arch.t_p = o.t_p;
        sched_cfg.steps = o.steps;
        sched_cfg.beta_start = o.beta_start;
        sched_cfg.beta_end = o.beta_end;
    }

    std::vector<std::string> clip_paths;
    std::vector<modiff::Window> windows;
    for (const auto& entry : ds.at("clips")) {
        std::string path = (base / entry.get<std::string>()).string();
        clip_paths.push_back(path);
        Clip rel = modiff::root_relative(modiff::load_clip(path));
        std::vector<Clip> variants;
        variants.push_back(std::move(rel));
        if (o.augment) {
            variants.push_back(modiff::mirror(variants[0], skel));
            variants.push_back(modiff::time_reverse(variants[0]));
        }
        for (const Clip& v : variants) {
            bool warned = false;
            auto w = modiff::slice_windows(v, arch.t_h, arch.t_p, o.stride, &warned);
            if (warned)
                std::cerr << "warning: " << path << " is shorter than one window\n";
            windows.insert(windows.end(), std::make_move_iterator(w.begin()),
                           std::make_move_iterator(w.end()));
        }
    }
    if (windows.empty()) throw std::invalid_argument("train: dataset yields no windows");

    if (o.resume.empty()) {
        norm = NormStats::fit(windows);
        model = std::make_unique<modiff::TransformerDenoiser>(arch, g.seed);
    }
    modiff::NoiseSchedule sched = sched_cfg.build();

    modiff::TrainConfig tc;
    tc.epochs = o.epochs;
    tc.batch_size = o.batch;
    tc.learning_rate = o.lr;
    tc.dropout.warmup_epochs = o.dropout_warmup;
    tc.dropout.interval_epochs = o.dropout_interval;
    tc.seed = g.seed;
    note(g, "training on " + fmt(windows.size()) + " windows, " +
                fmt(model->net().parameter_count()) + " parameters");
    std::vector<double> trace = modiff::train(windows, *model, sched, norm, tc);

    std::string ckpt_path = join(g.out, "checkpoint.bin");
    modiff::save_checkpoint(ckpt_path, *model, sched_cfg, norm);
    std::string loss_path = join(g.out, "loss.csv");
    {
        std::ofstream os = open_out(loss_path);
        os << "epoch,loss\n";
        for (std::size_t e = 0; e < trace.size(); ++e)
            os << e << "," << fmt(trace[e]) << "\n";
    }

    modiff::RunManifest m;
    m.command = "train";
    m.seed = g.seed;
    m.schedule_hash = modiff::hash_hex(sched.content_hash());
    m.checkpoint = ckpt_path;
    m.config = {{"arch", o.arch},
                {"augment", fmt(o.augment)},
                {"batch", fmt(o.batch)},
                {"beta_end", fmt(sched_cfg.beta_end)},
                {"beta_start", fmt(sched_cfg.beta_start)},
                {"dropout_interval", fmt(o.dropout_interval)},
                {"dropout_warmup", fmt(o.dropout_warmup)},
                {"epochs", fmt(o.epochs)},
                {"lr", fmt(o.lr)},
                {"resume", o.resume},
                {"steps", fmt(sched_cfg.steps)},
                {"stride", fmt(o.stride)},
                {"t_h", fmt(arch.t_h)},
                {"t_p", fmt(arch.t_p)}};
    m.inputs.emplace_back(o.data, modiff::hash_hex(modiff::hash_file(o.data)));
    m.inputs.emplace_back(skel_path, modiff::hash_hex(modiff::hash_file(skel_path)));
    for (const auto& p : clip_paths)
        m.inputs.emplace_back(p, modiff::hash_hex(modiff::hash_file(p)));
    if (!o.resume.empty())
        m.inputs.emplace_back(o.resume, modiff::hash_hex(modiff::hash_file(o.resume)));
    m.outputs = {ckpt_path, loss_path};
    modiff::write_manifest(m, join(g.out, "train.manifest.json"));

    if (!trace.empty()) note(g, "final loss " + fmt(trace.back()));
}

// ---------------------------------------------------- model/oracle loading

struct ModelOpts {
    std::string ckpt;
    bool oracle = false;
    double oracle_m0 = 0.0;
    double oracle_v0 = 1.0;
    std::size_t steps = 100;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    std::size_t t_h = 10;
    std::size_t t_p = 10;
};

void add_model_options(CLI::App* cmd, ModelOpts& o) {
    auto* ck = cmd->add_option("--ckpt", o.ckpt, "model checkpoint to load");
    auto* orc = cmd->add_flag("--oracle", o.oracle,
                              "use the closed-form Gaussian denoiser instead of a model");
    ck->excludes(orc);
    cmd->add_option("--oracle-m0", o.oracle_m0, "oracle prior mean")->needs(orc);
    cmd->add_option("--oracle-v0", o.oracle_v0, "oracle prior variance")->needs(orc);
    cmd->add_option("--steps", o.steps, "diffusion steps (oracle only)");
    cmd->add_option("--beta-start", o.beta_start, "first beta (oracle only)");
    cmd->add_option("--beta-end", o.beta_end, "last beta (oracle only)");
    cmd->add_option("--t-h", o.t_h, "history frames (oracle only)");
    cmd->add_option("--t-p", o.t_p, "prediction frames (oracle only)");
}

// Owns whichever denoiser the flags select, plus its schedule and norm.
// The oracle route leaves norm untouched so callers fit their own.
struct LoadedModel {
    std::unique_ptr<modiff::TransformerDenoiser> model;
    std::unique_ptr<modiff::GaussianOracleDenoiser> oracle;
    std::optional<modiff::NoiseSchedule> sched;
    modiff::ScheduleConfig sched_cfg;
    NormStats norm;
    std::size_t t_h = 0, t_p = 0;

    modiff::Denoiser& denoiser() { return model ? static_cast<modiff::Denoiser&>(*model) : *oracle; }
};

LoadedModel load_model(const ModelOpts& o, const char* cmd) {
    if (o.ckpt.empty() == !o.oracle)
        throw std::invalid_argument(std::string(cmd) + ": pass exactly one of --ckpt or --oracle");
    LoadedModel lm;
    if (!o.ckpt.empty()) {
        modiff::LoadedCheckpoint lc = modiff::load_checkpoint(o.ckpt);
        lm.sched_cfg = lc.meta.schedule;
        lm.sched.emplace(lm.sched_cfg.build());
        lm.norm = lc.meta.norm;
        lm.t_h = lc.meta.arch.t_h;
        lm.t_p = lc.meta.arch.t_p;
        lm.model = std::move(lc.denoiser);
    } else {
        if (o.oracle_v0 <= 0.0)
            throw std::invalid_argument(std::string(cmd) + ": --oracle-v0 must be positive");
        lm.sched_cfg.steps = o.steps;
        lm.sched_cfg.beta_start = o.beta_start;
        lm.sched_cfg.beta_end = o.beta_end;
        lm.sched.emplace(lm.sched_cfg.build());
        lm.norm = NormStats::identity();
        lm.t_h = o.t_h;
        lm.t_p = o.t_p;
        lm.oracle = std::make_unique<modiff::GaussianOracleDenoiser>(
            std::vector<double>(modiff::kMotionDim, o.oracle_m0), o.oracle_v0, *lm.sched);
    }
    return lm;
}

// ------------------------------------------------------------------ sample

struct SampleOpts {
    ModelOpts model;
    std::string context;
    std::size_t frames = 100;
    bool posterior_variance = false;
};

void run_sample(const SampleOpts& o, const GlobalOpts& g) {
    std::filesystem::create_directories(g.out);
    LoadedModel lm = load_model(o.model, "sample");

    Clip ctx = modiff::load_clip(o.context);
    Clip rel = modiff::root_relative(ctx);
    if (rel.frames() < lm.t_h)
        throw std::invalid_argument("sample: context has " + fmt(rel.frames()) +
                                    " frames, need at least " + fmt(lm.t_h));
    if (lm.oracle) {
        // no stored normalization; fit one from the context itself
        auto w = modiff::slice_windows(rel, lm.t_h, lm.t_p, 1);
        if (w.empty())
            throw std::invalid_argument("sample: context too short to fit normalization");
        lm.norm = NormStats::fit(w);
    }

    std::size_t first = rel.frames() - lm.t_h;
    Mat seed_motion(lm.t_h, modiff::kMotionDim);
    Mat ctrl(lm.t_h, modiff::kControlDim);
    for (std::size_t r = 0; r < lm.t_h; ++r) {
        for (std::size_t d = 0; d < modiff::kMotionDim; ++d)
            seed_motion(r, d) = rel.motion(first + r, d);
        for (std::size_t d = 0; d < modiff::kControlDim; ++d)
            ctrl(r, d) = rel.control(first + r, d);
    }

    modiff::RandomStream rng = modiff::RandomStream(g.seed).substream("sampling");
    modiff::RolloutOptions ro;
    ro.t_p = lm.t_p;
    ro.sample.posterior_variance = o.posterior_variance;
    Mat gen = modiff::rollout(seed_motion, ctrl, o.frames, lm.denoiser(), *lm.sched, rng,
                              lm.norm, ro);

    // generated frames are root relative; integrate the held control row
    // (forward, lateral, turn) to recover the world trajectory
    Clip out;
    out.fps = ctx.fps;
    out.motion = Mat(o.frames, modiff::kMotionDim);
    out.control = Mat(o.frames, modiff::kControlDim);
    double dt = 1.0 / ctx.fps;
    std::size_t last = ctx.frames() - 1;
    double root_x = ctx.motion(last, 0), root_z = ctx.motion(last, 2);
    double fwd = ctx.control(last, 0), lat = ctx.control(last, 1), omega = ctx.control(last, 2);
    double psi = 0.0;
    for (std::size_t k = 0; k < o.frames; ++k) {
        root_x += dt * (fwd * std::sin(psi) + lat * std::cos(psi));
        root_z += dt * (fwd * std::cos(psi) - lat * std::sin(psi));
        psi += omega * dt;
        for (std::size_t j = 0; j < modiff::kMotionDim / 3; ++j) {
            out.motion(k, j * 3 + 0) = gen(k, j * 3 + 0) + root_x;
            out.motion(k, j * 3 + 1) = gen(k, j * 3 + 1);
            out.motion(k, j * 3 + 2) = gen(k, j * 3 + 2) + root_z;
        }
        out.control(k, 0) = fwd;
        out.control(k, 1) = lat;
        out.control(k, 2) = omega;
    }
    std::string out_path = join(g.out, "sample.csv");
    modiff::save_clip(out, out_path);

    modiff::RunManifest m;
    m.command = "sample";
    m.seed = g.seed;
    m.schedule_hash = modiff::hash_hex(lm.sched->content_hash());
    m.checkpoint = o.model.ckpt;
    m.config = {{"frames", fmt(o.frames)},
                {"oracle", fmt(o.model.oracle)},
                {"oracle_m0", fmt(o.model.oracle_m0)},
                {"oracle_v0", fmt(o.model.oracle_v0)},
                {"posterior_variance", fmt(o.posterior_variance)},
                {"t_h", fmt(lm.t_h)},
                {"t_p", fmt(lm.t_p)}};
    m.inputs.emplace_back(o.context, modiff::hash_hex(modiff::hash_file(o.context)));
    if (!o.model.ckpt.empty())
        m.inputs.emplace_back(o.model.ckpt, modiff::hash_hex(modiff::hash_file(o.model.ckpt)));
    m.outputs = {out_path};
    modiff::write_manifest(m, join(g.out, "sample.manifest.json"));

    note(g, "wrote " + fmt(o.frames) + " frames to " + out_path);
}

// ------------------------------------------------------------- reconstruct

struct ReconstructOpts {
    ModelOpts model;
    std::string clip;
    std::string skeleton;
    std::size_t horizon = 0;
    std::size_t max_iterations = 16;
    bool average = false;
    bool posterior_variance = false;
};

// Normalization for a corrupted clip: motion stats over observed entries
// only, control stats over every row.
NormStats fit_observed(const Clip& clip) {
    NormStats ns = NormStats::identity();
    const Mask& mask = *clip.mask;
    for (std::size_t d = 0; d < modiff::kMotionDim; ++d) {
        double sum = 0.0, sumsq = 0.0;
        std::size_t count = 0;
        for (std::size_t t = 0; t < clip.frames(); ++t) {
            if (!mask(t, d)) continue;
            double v = clip.motion(t, d);
            sum += v;
            sumsq += v * v;
            ++count;
        }
        if (count == 0) continue;
        double mu = sum / double(count);
        double var = std::max(0.0, sumsq / double(count) - mu * mu);
        double sigma = std::sqrt(var);
        ns.motion_mu[d] = mu;
        ns.motion_sigma[d] = sigma < 1e-8 ? 1.0 : sigma;
    }
    for (std::size_t d = 0; d < modiff::kControlDim; ++d) {
        double sum = 0.0, sumsq = 0.0;
        for (std::size_t t = 0; t < clip.frames(); ++t) {
            double v = clip.control(t, d);
            sum += v;
            sumsq += v * v;
        }
        if (clip.frames() == 0) continue;
        double mu = sum / double(clip.frames());
        double var = std::max(0.0, sumsq / double(clip.frames()) - mu * mu);
        double sigma = std::sqrt(var);
        ns.control_mu[d] = mu;
        ns.control_sigma[d] = sigma < 1e-8 ? 1.0 : sigma;
    }
    return ns;
}

void run_reconstruct(const ReconstructOpts& o, const GlobalOpts& g) {
    std::filesystem::create_directories(g.out);
    Clip clip = modiff::load_clip(o.clip);
    if (!clip.mask)
        throw std::invalid_argument("reconstruct: " + o.clip + " carries no mask");
    modiff::SkeletonSpec skel =
        o.skeleton.empty() ? modiff::default_skeleton() : modiff::load_skeleton(o.skeleton);

    LoadedModel lm = load_model(o.model, "reconstruct");
    if (lm.oracle) lm.norm = fit_observed(clip);

    modiff::RandomStream rng = modiff::RandomStream(g.seed).substream("sampling");
    modiff::ReconstructOptions ro;
    ro.t_h = lm.t_h;
    ro.t_p = lm.t_p;
    ro.horizon = o.horizon;
    ro.max_iterations = o.max_iterations;
    ro.average_passes = o.average;
    ro.sample.posterior_variance = o.posterior_variance;
    modiff::ReconstructReport rep;
    Clip out = modiff::reconstruct(clip, skel, lm.denoiser(), *lm.sched, rng, lm.norm, ro, &rep);

    std::string out_path = join(g.out, "reconstructed.csv");
    modiff::save_clip(out, out_path);
    std::string rep_path = join(g.out, "reconstruct_report.json");
    {
        nlohmann::json j;
        j["complete"] = rep.complete;
        j["filled_entries"] = rep.filled_entries;
        j["iterations"] = rep.iterations;
        j["unfilled_entries"] = rep.unfilled_entries;
        open_out(rep_path) << j.dump(2) << "\n";
    }

    modiff::RunManifest m;
    m.command = "reconstruct";
    m.seed = g.seed;
    m.schedule_hash = modiff::hash_hex(lm.sched->content_hash());
    m.checkpoint = o.model.ckpt;
    m.config = {{"average", fmt(o.average)},
                {"horizon", fmt(o.horizon)},
                {"max_iterations", fmt(o.max_iterations)},
                {"oracle", fmt(o.model.oracle)},
                {"oracle_m0", fmt(o.model.oracle_m0)},
                {"oracle_v0", fmt(o.model.oracle_v0)},
                {"posterior_variance", fmt(o.posterior_variance)},
                {"t_h", fmt(lm.t_h)},
                {"t_p", fmt(lm.t_p)}};
    m.inputs.emplace_back(o.clip, modiff::hash_hex(modiff::hash_file(o.clip)));
    if (!o.skeleton.empty())
        m.inputs.emplace_back(o.skeleton, modiff::hash_hex(modiff::hash_file(o.skeleton)));
    if (!o.model.ckpt.empty())
        m.inputs.emplace_back(o.model.ckpt, modiff::hash_hex(modiff::hash_file(o.model.ckpt)));
    m.outputs = {out_path, rep_path};
    modiff::write_manifest(m, join(g.out, "reconstruct.manifest.json"));

    if (!rep.complete)
        std::cerr << "warning: reconstruction incomplete, " << rep.unfilled_entries
                  << " entries unfilled after " << rep.iterations << " iterations\n";
    note(g, "filled " + fmt(rep.filled_entries) + " entries in " + fmt(rep.iterations) +
                " iterations");
}

// -------------------------------------------------------------------- eval

struct EvalOpts {
    std::string clip;
    std::string skeleton;
    std::size_t min_frames = 3;
};

void run_eval(const EvalOpts& o, const GlobalOpts& g) {
    std::filesystem::create_directories(g.out);
    Clip clip = modiff::load_clip(o.clip);
    modiff::SkeletonSpec skel =
        o.skeleton.empty() ? modiff::default_skeleton() : modiff::load_skeleton(o.skeleton);

    modiff::FootstepReport fs =
        modiff::footstep_curve(clip, skel, modiff::default_v_grid(), o.min_frames);
    modiff::BoneLengthReport bl = modiff::bone_length_rmse(clip, skel);

    // the summary line is the command's product, so it prints even in
    // quiet mode
    std::cout << modiff::format_table_row(fs, bl) << "\n";

    std::string rep_path = join(g.out, "report.json");
    {
        std::ofstream os = open_out(rep_path);
        modiff::write_report_json(fs, bl, os);
    }
    std::string curve_path = join(g.out, "curve.csv");
    {
        std::ofstream os = open_out(curve_path);
        modiff::write_curve_csv(fs, os);
    }

    modiff::RunManifest m;
    m.command = "eval";
    m.seed = g.seed;
    m.config = {{"min_frames", fmt(o.min_frames)}};
    m.inputs.emplace_back(o.clip, modiff::hash_hex(modiff::hash_file(o.clip)));
    if (!o.skeleton.empty())
        m.inputs.emplace_back(o.skeleton, modiff::hash_hex(modiff::hash_file(o.skeleton)));
    m.outputs = {rep_path, curve_path};
    modiff::write_manifest(m, join(g.out, "eval.manifest.json"));
}

// ---------------------------------------------------------------- schedule

struct ScheduleOpts {
    std::size_t steps = 100;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    std::string kind = "linear";
};

void run_schedule(const ScheduleOpts& o, const GlobalOpts& g) {
    std::filesystem::create_directories(g.out);
    modiff::ScheduleConfig cfg;
    cfg.steps = o.steps;
    cfg.beta_start = o.beta_start;
    cfg.beta_end = o.beta_end;
    cfg.kind = o.kind;
    modiff::NoiseSchedule sched = cfg.build();

    std::string csv_path = join(g.out, "schedule.csv");
    {
        std::ofstream os = open_out(csv_path);
        modiff::write_schedule_csv(sched, os);
    }

    modiff::RunManifest m;
    m.command = "schedule";
    m.seed = g.seed;
    m.schedule_hash = modiff::hash_hex(sched.content_hash());
    m.config = {{"beta_end", fmt(o.beta_end)},
                {"beta_start", fmt(o.beta_start)},
                {"kind", o.kind},
                {"steps", fmt(o.steps)}};
    m.outputs = {csv_path};
    modiff::write_manifest(m, join(g.out, "schedule.manifest.json"));

    note(g, fmt(o.steps) + " steps, alpha_bar(S) = " +
                fmt(sched.alpha_bar(sched.steps())) + ", wrote " + csv_path);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"modiff: autoregressive denoising diffusion for skeletal motion"};
    app.option_defaults()->always_capture_default();
    app.set_config("--config", "", "read options from an INI file");
    app.require_subcommand(0, 1);

    GlobalOpts g;
    app.add_option("--seed", g.seed, "root random seed");
    app.add_option("--out", g.out, "output directory");
    app.add_flag("--quiet", g.quiet, "suppress progress notes");
    bool print_config = false;
    app.add_flag("--print-config", print_config,
                 "print the effective configuration and exit");

    std::function<void()> action;

    GenDataOpts gen;
    auto* cgen = app.add_subcommand("gen-data", "generate a synthetic gait dataset");
    cgen->fallthrough();
    cgen->add_option("--clips", gen.clips, "number of clips");
    cgen->add_option("--duration", gen.duration, "seconds per clip");
    cgen->add_option("--fps", gen.fps, "frames per second");
    cgen->add_option("--profile", gen.profile, "gait profile")
        ->check(CLI::IsMember({"walk", "stand", "vary", "turn", "mix"}));
    cgen->add_option("--jitter", gen.jitter, "relative frequency/stride jitter")
        ->check(CLI::Range(0.0, 0.5));
    cgen->callback([&] { action = [&] { run_gen_data(gen, g); }; });

    TrainOpts tr;
    auto* ctr = app.add_subcommand("train", "train a denoiser on a dataset");
    ctr->fallthrough();
    ctr->add_option("--data", tr.data, "dataset.json from gen-data")
        ->required()
        ->check(CLI::ExistingFile);
    ctr->add_option("--epochs", tr.epochs, "training epochs");
    ctr->add_option("--batch", tr.batch, "batch size");
    ctr->add_option("--lr", tr.lr, "learning rate");
    ctr->add_option("--steps", tr.steps, "diffusion steps");
    ctr->add_option("--beta-start", tr.beta_start, "first beta");
    ctr->add_option("--beta-end", tr.beta_end, "last beta");
    ctr->add_option("--t-h", tr.t_h, "history frames per window");
    ctr->add_option("--t-p", tr.t_p, "prediction frames per window");
    ctr->add_option("--stride", tr.stride, "window stride in frames");
    ctr->add_option("--arch", tr.arch, "model size")
        ->check(CLI::IsMember({"desk", "full"}));
    ctr->add_option("--resume", tr.resume, "checkpoint to continue from")
        ->check(CLI::ExistingFile);
    ctr->add_flag("--augment", tr.augment, "add mirrored and time-reversed variants");
    ctr->add_option("--dropout-warmup", tr.dropout_warmup, "epochs before data dropout");
    ctr->add_option("--dropout-interval", tr.dropout_interval, "epochs per dropout step");
    ctr->callback([&] { action = [&] { run_train(tr, g); }; });

    SampleOpts sa;
    auto* csa = app.add_subcommand("sample", "roll out future motion from a context clip");
    csa->fallthrough();
    add_model_options(csa, sa.model);
    csa->add_option("--context", sa.context, "context clip")
        ->required()
        ->check(CLI::ExistingFile);
    csa->add_option("--frames", sa.frames, "frames to generate");
    csa->add_flag("--posterior-variance", sa.posterior_variance,
                  "use the posterior variance in reverse steps");
    csa->callback([&] { action = [&] { run_sample(sa, g); }; });

    ReconstructOpts re;
    auto* cre = app.add_subcommand("reconstruct", "fill masked entries of a corrupted clip");
    cre->fallthrough();
    add_model_options(cre, re.model);
    cre->add_option("--clip", re.clip, "corrupted clip with mask")
        ->required()
        ->check(CLI::ExistingFile);
    cre->add_option("--skeleton", re.skeleton, "skeleton json")->check(CLI::ExistingFile);
    cre->add_option("--horizon", re.horizon, "frames per directional pass, 0 means t_h");
    cre->add_option("--max-iterations", re.max_iterations, "iteration cap");
    cre->add_flag("--average", re.average, "average forward and backward fills");
    cre->add_flag("--posterior-variance", re.posterior_variance,
                  "use the posterior variance in reverse steps");
    cre->callback([&] { action = [&] { run_reconstruct(re, g); }; });

    EvalOpts ev;
    auto* cev = app.add_subcommand("eval", "footstep and bone-length analysis of a clip");
    cev->fallthrough();
    cev->add_option("--clip", ev.clip, "clip to evaluate")
        ->required()
        ->check(CLI::ExistingFile);
    cev->add_option("--skeleton", ev.skeleton, "skeleton json")->check(CLI::ExistingFile);
    cev->add_option("--min-frames", ev.min_frames, "minimum frames per footstep");
    cev->callback([&] { action = [&] { run_eval(ev, g); }; });

    ScheduleOpts sc;
    auto* csc = app.add_subcommand("schedule", "tabulate a noise schedule");
    csc->fallthrough();
    csc->add_option("--steps", sc.steps, "diffusion steps");
    csc->add_option("--beta-start", sc.beta_start, "first beta");
    csc->add_option("--beta-end", sc.beta_end, "last beta");
    csc->add_option("--kind", sc.kind, "schedule kind")->check(CLI::IsMember({"linear"}));
    csc->callback([&] { action = [&] { run_schedule(sc, g); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);  // --help and friends
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (print_config) {
        std::cout << app.config_to_str(true, true);
        return 0;
    }
    if (!action) {
        std::cerr << app.help();
        return 2;
    }
    try {
        action();
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
