#include "modiff/gait.hpp"

#include <cmath>
#include <stdexcept>

#include "modiff/rng.hpp"

namespace modiff {
namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kThigh = 0.4375;
constexpr double kShin = 0.4375;
constexpr double kHeelY = 0.0625;
constexpr double kHeelLateral = 0.109375;
constexpr double kToeForward = 0.15625;
constexpr double kPelvisY = 0.9375;

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;
};

// Closed-form root trajectory. Footholds and frames both evaluate these at
// continuous times; using one closed form (rather than per-frame
// integration) is what keeps a stance foothold bit-identical across the
// frames that reference it.
struct PathProfile {
    int kind = 0;  // 0 constant velocities, 1 modulated forward speed, 2 turning arc
    double v0 = 0.0, lat = 0.0, omega = 0.0;
    double mod_w = 0.0, depth = 0.0, phase = 0.0;

    double heading(double t) const { return omega * t; }

    double forward_speed(double t) const {
        if (kind == 1) return v0 * (1.0 + depth * std::sin(mod_w * t + phase));
        return v0;
    }

    void pos(double t, double& x, double& z) const {
        switch (kind) {
            case 1:
                x = 0.0;
                z = v0 * t + (v0 * depth / mod_w) * (std::cos(phase) - std::cos(mod_w * t + phase));
                return;
            case 2: {
                double h = omega * t;
                double s = std::sin(h), c = std::cos(h);
                x = (lat * s - v0 * c + v0) / omega;
                z = (v0 * s + lat * c - lat) / omega;
                return;
            }
            default:
                x = lat * t;
                z = v0 * t;
                return;
        }
    }
};

void rotate_y(double h, double ox, double oy, double oz, double& wx, double& wy, double& wz) {
    double s = std::sin(h), c = std::cos(h);
    wx = c * ox + s * oz;
    wy = oy;
    wz = -s * ox + c * oz;
}

Vec3 foothold(const PathProfile& path, double step_freq, double duty, double phase_off,
              double heel_lateral, long long cycle) {
    double t_mid = (double(cycle) + phase_off + 0.5 * duty) / step_freq;
    double px, pz;
    path.pos(t_mid, px, pz);
    double h = path.heading(t_mid);
    Vec3 f;
    f.x = px + std::cos(h) * heel_lateral;
    f.y = kHeelY;
    f.z = pz - std::sin(h) * heel_lateral;
    return f;
}

// Two-bone IK: place the knee between a fixed hip and heel, bending toward
// the facing direction. Falls back to a straight leg when the target sits
// at (or numerically beyond) full extension.
Vec3 solve_knee(const Vec3& hip, const Vec3& heel, double fwd_x, double fwd_z) {
    double dx = heel.x - hip.x, dy = heel.y - hip.y, dz = heel.z - hip.z;
    double d2 = dx * dx + dy * dy + dz * dz;
    double d = std::sqrt(d2);
    double a = (kThigh * kThigh - kShin * kShin + d2) / (2.0 * d);
    double h2 = kThigh * kThigh - a * a;
    double h = h2 > 0.0 ? std::sqrt(h2) : 0.0;
    double ax = dx / d, ay = dy / d, az = dz / d;
    double proj = fwd_x * ax + fwd_z * az;
    double px = fwd_x - ax * proj, py = -ay * proj, pz = fwd_z - az * proj;
    double pn = std::sqrt(px * px + py * py + pz * pz);
    if (pn > 1e-12) {
        px /= pn;
        py /= pn;
        pz /= pn;
    } else {
        px = 0.0;
        py = 0.0;
        pz = 1.0;
    }
    Vec3 knee;
    knee.x = hip.x + ax * a + px * h;
    knee.y = hip.y + ay * a + py * h;
    knee.z = hip.z + az * a + pz * h;
    return knee;
}

double smoothstep(double u) { return u * u * (3.0 - 2.0 * u); }

}  // namespace

void GaitParams::validate() const {
    if (profile != "walk" && profile != "stand" && profile != "vary" && profile != "turn")
        throw std::invalid_argument("gait: unknown profile '" + profile + "'");
    if (!(fps > 0.0)) throw std::invalid_argument("gait: fps must be positive");
    if (!(duration > 0.0)) throw std::invalid_argument("gait: duration must be positive");
    if (!(step_freq > 0.0)) throw std::invalid_argument("gait: step_freq must be positive");
    if (!(stride >= 0.0)) throw std::invalid_argument("gait: stride must be nonnegative");
    if (!(duty > 0.05 && duty < 0.95)) throw std::invalid_argument("gait: duty must lie in (0.05,0.95)");
    if (!(vary_depth >= 0.0 && vary_depth < 1.0))
        throw std::invalid_argument("gait: vary_depth must lie in [0,1)");
    double stride_max = profile == "stand" ? 0.0
                        : profile == "vary" ? stride * (1.0 + vary_depth)
                                            : stride;
    double crouch = std::min(0.046875, 0.078125 * stride_max);
    double vert = (kPelvisY - crouch) - kHeelY;
    double horiz = 0.55 * duty * stride_max + std::abs(lateral_speed) * duty / (2.0 * step_freq);
    // a stationary stance may rest at exactly full extension; only a moving
    // gait needs the swing-reach margin
    double limit = stride_max > 0.0 || lateral_speed != 0.0 ? 0.995 * (kThigh + kShin)
                                                            : kThigh + kShin;
    if (std::hypot(vert, horiz) > limit)
        throw std::invalid_argument("gait: stride/duty geometry exceeds leg reach");
}

Clip gen_synthetic_gait(const GaitParams& params, std::uint64_t seed) {
    params.validate();
    Mat rest = default_rest_pose();

    PathProfile path;
    double stride_eff = params.profile == "stand" ? 0.0 : params.stride;
    path.v0 = stride_eff * params.step_freq;
    if (params.profile == "vary") {
        path.kind = 1;
        path.mod_w = 2.0 * kPi / params.duration;
        path.depth = params.vary_depth;
        path.phase = RandomStream(seed).substream("gait").uniform() * 2.0 * kPi;
    } else if (params.profile == "turn" && params.turn_rate != 0.0) {
        path.kind = 2;
        path.omega = params.turn_rate;
        path.lat = params.lateral_speed;
    } else {
        path.kind = 0;
        path.lat = params.profile == "stand" ? 0.0 : params.lateral_speed;
    }

    double stride_max = params.profile == "vary" ? stride_eff * (1.0 + params.vary_depth) : stride_eff;
    double crouch = std::min(0.046875, 0.078125 * stride_max);
    double lift = std::min(0.08, 0.15 * stride_max);
    double pelvis_y = kPelvisY - crouch;

    // Legs: (hip, knee, heel, toe) joint indices, rest lateral sign, phase.
    struct Leg {
        int hip, knee, heel, toe;
        double lateral;
        double phase_off;
    };
    const Leg legs[2] = {{13, 14, 15, 16, kHeelLateral, 0.0},
                         {17, 18, 19, 20, -kHeelLateral, 0.5}};
    // Joints placed rigidly from the pelvis (everything but knees/heels/toes).
    const int rigid_joints[] = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 17};

    std::size_t T = std::size_t(std::llround(params.duration * params.fps));
    if (T < 1) throw std::invalid_argument("gait: duration too short for one frame");
    Clip clip;
    clip.fps = params.fps;
    clip.motion = Mat(T, kMotionDim);
    clip.control = Mat(T, kControlDim);

    for (std::size_t i = 0; i < T; ++i) {
        double t = double(i) / params.fps;
        double h = path.heading(t);
        double px, pz;
        path.pos(t, px, pz);

        double* row = clip.motion.row(i);
        row[0] = px;
        row[1] = pelvis_y;
        row[2] = pz;

        for (int j : rigid_joints) {
            double ox = rest(j, 0) - rest(0, 0);
            double oy = rest(j, 1) - rest(0, 1);
            double oz = rest(j, 2) - rest(0, 2);
            double wx, wy, wz;
            rotate_y(h, ox, oy, oz, wx, wy, wz);
            row[j * 3 + 0] = px + wx;
            row[j * 3 + 1] = pelvis_y + wy;
            row[j * 3 + 2] = pz + wz;
        }

        for (const Leg& leg : legs) {
            double ph = t * params.step_freq - leg.phase_off;
            double cycle_f = std::floor(ph);
            long long k = (long long)cycle_f;
            double frac = ph - cycle_f;
            Vec3 heel;
            if (frac < params.duty || stride_eff == 0.0) {
                heel = foothold(path, params.step_freq, params.duty, leg.phase_off, leg.lateral, k);
            } else {
                double u = (frac - params.duty) / (1.0 - params.duty);
                Vec3 a = foothold(path, params.step_freq, params.duty, leg.phase_off, leg.lateral, k);
                Vec3 b = foothold(path, params.step_freq, params.duty, leg.phase_off, leg.lateral,
                                  k + 1);
                double s = smoothstep(u);
                heel.x = a.x + (b.x - a.x) * s;
                heel.z = a.z + (b.z - a.z) * s;
                heel.y = kHeelY + lift * std::sin(kPi * u);
            }
            Vec3 hip{row[leg.hip * 3 + 0], row[leg.hip * 3 + 1], row[leg.hip * 3 + 2]};
            double fx, fy, fz;
            rotate_y(h, 0.0, 0.0, 1.0, fx, fy, fz);
            Vec3 knee = solve_knee(hip, heel, fx, fz);
            double tx, ty, tz;
            rotate_y(h, 0.0, 0.0, kToeForward, tx, ty, tz);
            row[leg.knee * 3 + 0] = knee.x;
            row[leg.knee * 3 + 1] = knee.y;
            row[leg.knee * 3 + 2] = knee.z;
            row[leg.heel * 3 + 0] = heel.x;
            row[leg.heel * 3 + 1] = heel.y;
            row[leg.heel * 3 + 2] = heel.z;
            row[leg.toe * 3 + 0] = heel.x + tx;
            row[leg.toe * 3 + 1] = heel.y + ty;
            row[leg.toe * 3 + 2] = heel.z + tz;
        }

        clip.control(i, 0) = path.forward_speed(t);
        clip.control(i, 1) = path.lat;
        clip.control(i, 2) = path.omega;
    }
    return clip;
}

}  // namespace modiff
