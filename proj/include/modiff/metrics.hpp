#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "modiff/clip.hpp"
#include "modiff/matrix.hpp"
#include "modiff/skeleton.hpp"

namespace modiff {

// Ground-plane heel speeds in cm/s, [T-1, 2], via forward differences of
// the x/z coordinates scaled by fps.
Mat heel_speed(const Clip& clip, const SkeletonSpec& skel);

struct FootstepInterval {
    std::size_t heel = 0;   // speed-matrix column
    std::size_t begin = 0;  // first below-threshold entry
    std::size_t end = 0;    // one past the last
};

// A footstep is a maximal run of consecutive speed entries < v_tol lasting
// at least min_frames; the count pools both heels.
std::pair<std::size_t, std::vector<FootstepInterval>> count_footsteps(const Mat& speeds,
                                                                      double v_tol,
                                                                      std::size_t min_frames = 3);

struct FootstepReport {
    std::vector<std::pair<double, std::size_t>> curve;  // (v_tol cm/s, f_est)
    double v95 = 0.0;
    std::size_t f_est_at_v95 = 0;
    std::vector<double> durations;  // seconds, measured at v95
    double mu = 0.0;
    double sigma = 0.0;
};

// 1..20 cm/s in steps of 1.
std::vector<double> default_v_grid();

// Footstep counts across the tolerance grid; v95 is the smallest tolerance
// whose count reaches 95% of the count at the grid maximum, and duration
// statistics are taken there.
FootstepReport footstep_curve(const Clip& clip, const SkeletonSpec& skel,
                              const std::vector<double>& v_grid = default_v_grid(),
                              std::size_t min_frames = 3);

struct BoneLengthReport {
    std::vector<double> per_bone_rmse_cm;
    double rmse_cm = 0.0;           // aggregate over all (frame, bone) pairs
    double max_deviation_cm = 0.0;  // largest single deviation
};

BoneLengthReport bone_length_rmse(const Clip& clip, const SkeletonSpec& skel,
                                  const std::vector<double>& ref_lengths_cm);
// Uses the skeleton's own reference lengths.
BoneLengthReport bone_length_rmse(const Clip& clip, const SkeletonSpec& skel);

// One summary line in the shape "f_est v95 mu sigma rmse".
std::string format_table_row(const FootstepReport& fs, const BoneLengthReport& bl);

// Full report as JSON; curve points as two-column CSV for plotting.
void write_report_json(const FootstepReport& fs, const BoneLengthReport& bl, std::ostream& os);
void write_curve_csv(const FootstepReport& fs, std::ostream& os);

}  // namespace modiff
