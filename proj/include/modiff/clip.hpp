#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "modiff/matrix.hpp"
#include "modiff/skeleton.hpp"

namespace modiff {

inline constexpr std::size_t kMotionDim = 63;
inline constexpr std::size_t kControlDim = 3;

// Per-entry observation mask; nonzero = observed.
using Mask = Matrix<unsigned char>;

// A time-aligned pair of motion and control frames. Motion rows are world
// positions in meters, joint-major (x,y,z per joint); control rows are
// forward (m/s), lateral (m/s) and rotational (rad/s) velocities. The
// optional mask marks observed entries; masked-out entries hold value 0.
struct Clip {
    double fps = 20.0;
    Mat motion;   // [T, 63]
    Mat control;  // [T, 3]
    std::optional<Mask> mask;  // [T, 63]

    std::size_t frames() const { return motion.rows(); }
    void validate() const;  // throws on shape or value violations
};

// One training/inference unit cut from a clip.
struct Window {
    Mat x;  // [T_h, 63] past motion
    Mat c;  // [T_h+T_p, 3] control context
    Mat y;  // [T_p, 63] target motion
    std::optional<Mask> x_mask;
};

// Windows at the given stride; count = floor((T - T_h - T_p)/stride) + 1.
// A clip shorter than T_h+T_p yields an empty list; *warned (if non-null)
// is set accordingly so callers can surface it.
std::vector<Window> slice_windows(const Clip& clip, std::size_t T_h, std::size_t T_p,
                                  std::size_t stride, bool* warned = nullptr);

// Lateral mirroring: negates the lateral coordinate of every joint, swaps
// left/right joint columns, and negates lateral and rotational control
// velocities. An involution.
Clip mirror(const Clip& clip, const SkeletonSpec& skel);

// Frame-order reversal for motion, control and mask. Controls are
// velocities, so running time backwards negates them; negate_controls
// exists to switch that convention off.
Clip time_reverse(const Clip& clip, bool negate_controls = true);

// Per-frame root centering: subtracts the pelvis (joint 0) ground-plane
// x/z from every joint, leaving heights absolute. The root trajectory is
// carried separately by the control stream.
Clip root_relative(const Clip& clip);

// Clip file I/O. ".csv" is the text format (fps comment line, 66 or 67
// columns); any other extension is the little-endian binary format with a
// JSON sidecar ("<path>.json"). Both round-trip losslessly.
Clip load_clip(const std::string& path);
void save_clip(const Clip& clip, const std::string& path);

}  // namespace modiff
