#include "modiff/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

namespace modiff {

Mat heel_speed(const Clip& clip, const SkeletonSpec& skel) {
    skel.validate();
    if (clip.frames() < 2)
        throw std::invalid_argument("heel_speed: need at least two frames, clip has " +
                                    std::to_string(clip.frames()));
    Mat speeds(clip.frames() - 1, 2);
    for (std::size_t k = 0; k < 2; ++k) {
        std::size_t base = std::size_t(skel.heel_indices[k]) * 3;
        for (std::size_t t = 0; t + 1 < clip.frames(); ++t) {
            double dx = clip.motion(t + 1, base) - clip.motion(t, base);
            double dz = clip.motion(t + 1, base + 2) - clip.motion(t, base + 2);
            speeds(t, k) = std::hypot(dx, dz) * clip.fps * 100.0;
        }
    }
    return speeds;
}

std::pair<std::size_t, std::vector<FootstepInterval>> count_footsteps(const Mat& speeds,
                                                                      double v_tol,
                                                                      std::size_t min_frames) {
    if (speeds.size() == 0) throw std::invalid_argument("count_footsteps: empty speed matrix");
    if (!(v_tol > 0.0)) throw std::invalid_argument("count_footsteps: v_tol must be positive");
    if (min_frames == 0) throw std::invalid_argument("count_footsteps: min_frames must be >= 1");
    std::vector<FootstepInterval> intervals;
    for (std::size_t k = 0; k < speeds.cols(); ++k) {
        std::size_t t = 0;
        while (t < speeds.rows()) {
            if (!(speeds(t, k) < v_tol)) {
                ++t;
                continue;
            }
            std::size_t begin = t;
            while (t < speeds.rows() && speeds(t, k) < v_tol) ++t;
            if (t - begin >= min_frames) intervals.push_back({k, begin, t});
        }
    }
    return {intervals.size(), std::move(intervals)};
}

std::vector<double> default_v_grid() {
    std::vector<double> grid;
    for (int v = 1; v <= 20; ++v) grid.push_back(double(v));
    return grid;
}

FootstepReport footstep_curve(const Clip& clip, const SkeletonSpec& skel,
                              const std::vector<double>& v_grid, std::size_t min_frames) {
    if (v_grid.empty()) throw std::invalid_argument("footstep_curve: empty tolerance grid");
    for (std::size_t i = 1; i < v_grid.size(); ++i)
        if (!(v_grid[i] > v_grid[i - 1]))
            throw std::invalid_argument("footstep_curve: tolerance grid must ascend");
    Mat speeds = heel_speed(clip, skel);

    FootstepReport report;
    report.curve.reserve(v_grid.size());
    for (double v : v_grid)
        report.curve.emplace_back(v, count_footsteps(speeds, v, min_frames).first);

    double f_max = double(report.curve.back().second);
    double threshold = 0.95 * f_max;
    report.v95 = v_grid.front();
    report.f_est_at_v95 = report.curve.front().second;
    for (const auto& [v, f] : report.curve) {
        if (double(f) >= threshold) {
            report.v95 = v;
            report.f_est_at_v95 = f;
            break;
        }
    }

    auto [count, intervals] = count_footsteps(speeds, report.v95, min_frames);
    (void)count;
    report.durations.reserve(intervals.size());
    double sum = 0.0;
    for (const FootstepInterval& iv : intervals) {
        double dur = double(iv.end - iv.begin) / clip.fps;
        report.durations.push_back(dur);
        sum += dur;
    }
    if (!report.durations.empty()) {
        report.mu = sum / double(report.durations.size());
        double sq = 0.0;
        for (double d : report.durations) sq += (d - report.mu) * (d - report.mu);
        report.sigma = std::sqrt(sq / double(report.durations.size()));
    }
    return report;
}

BoneLengthReport bone_length_rmse(const Clip& clip, const SkeletonSpec& skel,
                                  const std::vector<double>& ref_lengths_cm) {
    skel.validate();
    if (ref_lengths_cm.size() != skel.bones.size())
        throw std::invalid_argument("bone_length_rmse: " + std::to_string(ref_lengths_cm.size()) +
                                    " reference lengths for " + std::to_string(skel.bones.size()) +
                                    " bones");
    for (std::size_t b = 0; b < ref_lengths_cm.size(); ++b)
        if (!(ref_lengths_cm[b] > 0.0))
            throw std::invalid_argument("bone_length_rmse: degenerate reference for bone " +
                                        std::to_string(b));
    if (clip.frames() == 0) throw std::invalid_argument("bone_length_rmse: empty clip");

    BoneLengthReport report;
    report.per_bone_rmse_cm.assign(skel.bones.size(), 0.0);
    double total = 0.0;
    for (std::size_t b = 0; b < skel.bones.size(); ++b) {
        auto [pj, cj] = skel.bones[b];
        std::size_t pb = std::size_t(pj) * 3, cb = std::size_t(cj) * 3;
        double acc = 0.0;
        for (std::size_t t = 0; t < clip.frames(); ++t) {
            double dx = clip.motion(t, pb) - clip.motion(t, cb);
            double dy = clip.motion(t, pb + 1) - clip.motion(t, cb + 1);
            double dz = clip.motion(t, pb + 2) - clip.motion(t, cb + 2);
            double len_cm = std::sqrt(dx * dx + dy * dy + dz * dz) * 100.0;
            double dev = len_cm - ref_lengths_cm[b];
            acc += dev * dev;
            report.max_deviation_cm = std::max(report.max_deviation_cm, std::abs(dev));
        }
        report.per_bone_rmse_cm[b] = std::sqrt(acc / double(clip.frames()));
        total += acc;
    }
    report.rmse_cm = std::sqrt(total / double(clip.frames() * skel.bones.size()));
    return report;
}

BoneLengthReport bone_length_rmse(const Clip& clip, const SkeletonSpec& skel) {
    return bone_length_rmse(clip, skel, skel.ref_bone_lengths_cm);
}

std::string format_table_row(const FootstepReport& fs, const BoneLengthReport& bl) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%zu %g %.3f %.3f %.3f", fs.f_est_at_v95, fs.v95, fs.mu,
                  fs.sigma, bl.rmse_cm);
    return buf;
}

void write_report_json(const FootstepReport& fs, const BoneLengthReport& bl, std::ostream& os) {
    nlohmann::json curve = nlohmann::json::array();
    for (const auto& [v, f] : fs.curve) curve.push_back({{"f_est", f}, {"v_tol", v}});
    nlohmann::json j = {
        {"bone_length",
         {{"max_deviation_cm", bl.max_deviation_cm},
          {"per_bone_rmse_cm", bl.per_bone_rmse_cm},
          {"rmse_cm", bl.rmse_cm}}},
        {"footsteps",
         {{"curve", curve},
          {"durations_s", fs.durations},
          {"f_est", fs.f_est_at_v95},
          {"mu_s", fs.mu},
          {"sigma_s", fs.sigma},
          {"v95_cm_s", fs.v95}}}};
    os << j.dump(2) << '\n';
}

void write_curve_csv(const FootstepReport& fs, std::ostream& os) {
    os << "v_tol,f_est\n";
    char buf[64];
    for (const auto& [v, f] : fs.curve) {
        std::snprintf(buf, sizeof(buf), "%.17g,%zu\n", v, f);
        os << buf;
    }
}

}  // namespace modiff
