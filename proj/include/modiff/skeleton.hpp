#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "modiff/matrix.hpp"

namespace modiff {

// Joint layout, bone tree and mirror metadata for the 21-joint body. The
// motion vector packs joints in index order, three coordinates each
// (x lateral, y up, z forward), giving the 63-dim pose.
struct SkeletonSpec {
    std::vector<std::string> joint_names;
    std::vector<std::pair<int, int>> bones;         // (parent, child)
    std::vector<std::pair<int, int>> mirror_pairs;  // (left, right)
    int lateral_axis = 0;
    std::array<int, 2> heel_indices{};
    std::vector<double> ref_bone_lengths_cm;

    std::size_t joint_count() const { return joint_names.size(); }
    void validate() const;  // throws std::invalid_argument on any violation
};

// Canonical standing pose of the default skeleton, [21 x 3] meters. All
// coordinates are multiples of 1/64 m and every bone is axis-aligned, so
// bone lengths computed from this pose reproduce the reference lengths
// without rounding.
Mat default_rest_pose();

SkeletonSpec default_skeleton();

SkeletonSpec load_skeleton(const std::string& path);
void save_skeleton(const SkeletonSpec& skel, const std::string& path);

}  // namespace modiff
