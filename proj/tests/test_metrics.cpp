#include <doctest.h>

#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "modiff/clip.hpp"
#include "modiff/gait.hpp"
#include "modiff/metrics.hpp"
#include "modiff/skeleton.hpp"

using modiff::Clip;
using modiff::Mat;

namespace {

// Constant clip holding the rest pose on every frame.
Clip still_clip(std::size_t T) {
    Clip c;
    c.motion = Mat(T, modiff::kMotionDim);
    c.control = Mat(T, modiff::kControlDim);
    Mat rest = modiff::default_rest_pose();
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t j = 0; j < rest.rows(); ++j)
            for (std::size_t k = 0; k < 3; ++k) c.motion(t, j * 3 + k) = rest(j, k);
    return c;
}

}  // namespace

TEST_CASE("heel speed is zero for a stationary clip and scales with fps") {
    modiff::SkeletonSpec skel = modiff::default_skeleton();
    Clip clip = still_clip(6);
    Mat v = modiff::heel_speed(clip, skel);
    REQUIRE(v.rows() == 5);
    REQUIRE(v.cols() == 2);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(v[i] == 0.0);

    // 0.01 m per frame along x at 20 fps is 20 cm/s
    Clip moving = still_clip(6);
    for (std::size_t t = 0; t < 6; ++t)
        for (int heel : skel.heel_indices)
            moving.motion(t, std::size_t(heel) * 3 + 0) += 0.01 * double(t);
    Mat mv = modiff::heel_speed(moving, skel);
    for (std::size_t i = 0; i < mv.size(); ++i)
        CHECK(mv[i] == doctest::Approx(20.0).epsilon(1e-9));

    // vertical bobbing is invisible to the ground-plane speed
    Clip bobbing = still_clip(6);
    for (std::size_t t = 0; t < 6; ++t)
        for (int heel : skel.heel_indices)
            bobbing.motion(t, std::size_t(heel) * 3 + 1) += 0.05 * double(t % 2);
    Mat bv = modiff::heel_speed(bobbing, skel);
    for (std::size_t i = 0; i < bv.size(); ++i) CHECK(bv[i] == 0.0);

    Clip one = still_clip(1);
    CHECK_THROWS_AS(modiff::heel_speed(one, skel), std::invalid_argument);
}

TEST_CASE("footstep counting finds maximal below-threshold runs") {
    Mat speeds(5, 1);
    speeds(0, 0) = 1.0;
    speeds(1, 0) = 1.0;
    speeds(2, 0) = 9.0;
    speeds(3, 0) = 1.0;
    speeds(4, 0) = 1.0;

    auto [count2, intervals2] = modiff::count_footsteps(speeds, 5.0, 2);
    CHECK(count2 == 2);
    REQUIRE(intervals2.size() == 2);
    CHECK(intervals2[0].begin == 0);
    CHECK(intervals2[0].end == 2);
    CHECK(intervals2[1].begin == 3);
    CHECK(intervals2[1].end == 5);

    CHECK(modiff::count_footsteps(speeds, 5.0, 3).first == 0);
    // the threshold is strict: entries equal to v_tol stay out
    CHECK(modiff::count_footsteps(speeds, 1.0, 2).first == 0);

    // both heels pool into one census; the right heel's two single-frame
    // dips are too short to count
    Mat two(3, 2);
    two.fill(0.0);
    two(1, 1) = 99.0;
    auto [pooled, iv] = modiff::count_footsteps(two, 1.0, 2);
    CHECK(pooled == 1);
    REQUIRE(iv.size() == 1);
    CHECK(iv[0].heel == 0);
    CHECK(iv[0].end == 3);

    CHECK_THROWS_AS(modiff::count_footsteps(speeds, 0.0, 2), std::invalid_argument);
    CHECK_THROWS_AS(modiff::count_footsteps(speeds, 5.0, 0), std::invalid_argument);
    CHECK_THROWS_AS(modiff::count_footsteps(Mat(), 5.0, 2), std::invalid_argument);
}

TEST_CASE("bone length rmse against explicit references") {
    modiff::SkeletonSpec skel = modiff::default_skeleton();
    Clip clip = still_clip(4);

    // the rest pose realizes the reference lengths, so the deviation is zero
    auto rest = modiff::bone_length_rmse(clip, skel);
    CHECK(rest.rmse_cm == 0.0);
    CHECK(rest.max_deviation_cm == 0.0);
    for (double r : rest.per_bone_rmse_cm) CHECK(r == 0.0);

    // inflate every reference by 1 cm: each sample now misses by exactly that
    std::vector<double> refs = skel.ref_bone_lengths_cm;
    for (double& r : refs) r += 1.0;
    auto off = modiff::bone_length_rmse(clip, skel, refs);
    REQUIRE(off.per_bone_rmse_cm.size() == skel.bones.size());
    for (double r : off.per_bone_rmse_cm) CHECK(r == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(off.rmse_cm == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(off.max_deviation_cm == doctest::Approx(1.0).epsilon(1e-12));

    std::vector<double> degenerate = skel.ref_bone_lengths_cm;
    degenerate[3] = 0.0;
    CHECK_THROWS_AS(modiff::bone_length_rmse(clip, skel, degenerate), std::invalid_argument);
    std::vector<double> short_refs(skel.bones.size() - 1, 30.0);
    CHECK_THROWS_AS(modiff::bone_length_rmse(clip, skel, short_refs), std::invalid_argument);
}

TEST_CASE("bone rmse is invariant to translation, mirroring and reversal") {
    modiff::GaitParams p;
    p.duration = 2.0;
    Clip clip = modiff::gen_synthetic_gait(p, 77);
    modiff::SkeletonSpec skel = modiff::default_skeleton();
    auto base = modiff::bone_length_rmse(clip, skel);

    Clip shifted = clip;
    for (std::size_t t = 0; t < shifted.frames(); ++t)
        for (std::size_t j = 0; j < 21; ++j) {
            shifted.motion(t, j * 3 + 0) += 5.0;
            shifted.motion(t, j * 3 + 2) += 7.0;
        }
    auto moved = modiff::bone_length_rmse(shifted, skel);
    CHECK(moved.rmse_cm == doctest::Approx(base.rmse_cm).epsilon(1e-9));

    auto mirrored = modiff::bone_length_rmse(modiff::mirror(clip, skel), skel);
    CHECK(mirrored.rmse_cm == doctest::Approx(base.rmse_cm).epsilon(1e-9));

    auto reversed = modiff::bone_length_rmse(modiff::time_reverse(clip), skel);
    CHECK(reversed.rmse_cm == doctest::Approx(base.rmse_cm).epsilon(1e-12));
}

TEST_CASE("footstep curve reports v95 and duration statistics") {
    // hand-built speed course on the first heel: at v=1 only the two slow
    // stances count, by v=3 the two near-stances join and the census
    // saturates; the second heel keeps moving fast throughout
    modiff::SkeletonSpec skel = modiff::default_skeleton();
    Clip clip = still_clip(40);
    std::size_t heel0 = std::size_t(skel.heel_indices[0]) * 3;
    std::size_t heel1 = std::size_t(skel.heel_indices[1]) * 3;
    auto put_speed = [&](std::size_t col, std::size_t t, double cm_per_s) {
        // a speed on rows >= t+1 turns into the x step between t and t+1
        double dm = cm_per_s / 100.0 / clip.fps;
        for (std::size_t u = t + 1; u < 40; ++u) clip.motion(u, col) += dm;
    };
    for (std::size_t t = 0; t + 1 < 40; ++t) {
        put_speed(heel1, t, 50.0);
        bool slow = (t >= 2 && t < 8) || (t >= 12 && t < 18);
        bool near = (t >= 22 && t < 28) || (t >= 32 && t < 38);
        put_speed(heel0, t, slow ? 0.5 : near ? 2.5 : 50.0);
    }

    auto fs = modiff::footstep_curve(clip, skel, {1.0, 2.0, 3.0}, 3);
    REQUIRE(fs.curve.size() == 3);
    CHECK(fs.curve[0].second == 2);
    CHECK(fs.curve[1].second == 2);
    CHECK(fs.curve[2].second == 4);
    // 95% of the saturated count needs all four stances
    CHECK(fs.v95 == 3.0);
    CHECK(fs.f_est_at_v95 == 4);
    REQUIRE(fs.durations.size() == 4);
    for (double d : fs.durations) CHECK(d == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(fs.mu == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(fs.sigma == doctest::Approx(0.0).epsilon(1e-12));

    CHECK_THROWS_AS(modiff::footstep_curve(clip, skel, {3.0, 1.0}, 3), std::invalid_argument);
    CHECK_THROWS_AS(modiff::footstep_curve(clip, skel, {}, 3), std::invalid_argument);
}

TEST_CASE("walking gait curve saturates at the smallest tolerance") {
    modiff::GaitParams p;  // 2 Hz for 10 s: 40 steps
    Clip clip = modiff::gen_synthetic_gait(p, 5);
    modiff::SkeletonSpec skel = modiff::default_skeleton();
    auto fs = modiff::footstep_curve(clip, skel);
    CHECK(fs.v95 == 1.0);
    CHECK(fs.f_est_at_v95 == 40);
    // stance duty of 0.6 at 2 Hz plants the heel for about 0.3 s per step
    CHECK(fs.mu == doctest::Approx(0.3).epsilon(0.25));
    CHECK(fs.curve.front().second <= fs.curve.back().second);
}

TEST_CASE("report formatting is stable") {
    modiff::FootstepReport fs;
    fs.curve = {{1.0, 250}, {5.0, 289}};
    fs.v95 = 5.0;
    fs.f_est_at_v95 = 289;
    fs.durations = {0.3, 0.33};
    fs.mu = 0.315;
    fs.sigma = 0.263;
    modiff::BoneLengthReport bl;
    bl.per_bone_rmse_cm = {0.5, 1.5};
    bl.rmse_cm = 1.234;
    bl.max_deviation_cm = 2.5;

    CHECK(modiff::format_table_row(fs, bl) == "289 5 0.315 0.263 1.234");

    std::ostringstream csv;
    modiff::write_curve_csv(fs, csv);
    CHECK(csv.str() == "v_tol,f_est\n1,250\n5,289\n");

    std::ostringstream js;
    modiff::write_report_json(fs, bl, js);
    nlohmann::json j = nlohmann::json::parse(js.str());
    CHECK(j.at("footsteps").at("v95_cm_s") == 5.0);
    CHECK(j.at("footsteps").at("f_est") == 289);
    CHECK(j.at("footsteps").at("curve").size() == 2);
    CHECK(j.at("footsteps").at("curve")[0].at("v_tol") == 1.0);
    CHECK(j.at("footsteps").at("durations_s").size() == 2);
    CHECK(j.at("footsteps").at("mu_s") == 0.315);
    CHECK(j.at("bone_length").at("rmse_cm") == 1.234);
    CHECK(j.at("bone_length").at("max_deviation_cm") == 2.5);
    CHECK(j.at("bone_length").at("per_bone_rmse_cm").size() == 2);
}
