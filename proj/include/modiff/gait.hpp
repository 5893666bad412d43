#pragma once

#include <cstdint>
#include <string>

#include "modiff/clip.hpp"
#include "modiff/skeleton.hpp"

namespace modiff {

// Kinematic walker parameters. The walker is a rigid body on the default
// skeleton: the pelvis follows the closed-form integral of the control
// profile, heels alternate between pinned stance footholds and sinusoidal
// swing arcs, and knees are placed by two-bone inverse kinematics.
struct GaitParams {
    std::string profile = "walk";  // walk | stand | vary | turn
    double step_freq = 2.0;        // Hz, cycles per second per leg
    double stride = 0.6;           // m advanced per cycle
    double duty = 0.6;             // stance fraction of each cycle
    double lateral_speed = 0.0;    // m/s
    double turn_rate = 0.0;        // rad/s, used by the "turn" profile
    double vary_depth = 0.2;       // relative speed modulation for "vary"
    double duration = 10.0;        // s
    double fps = 20.0;

    void validate() const;  // throws on non-positive or unreachable geometry
};

// Deterministic synthesis: identical (params, seed) give identical clips.
// Stance heels are held at bit-constant world positions, so their
// horizontal speed is exactly zero between stance frames; with all-zero
// control the output is the rest pose in every frame, bit-exactly.
Clip gen_synthetic_gait(const GaitParams& params, std::uint64_t seed);

}  // namespace modiff
