#include "modiff/skeleton.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace modiff {

using nlohmann::json;

void SkeletonSpec::validate() const {
    std::size_t j = joint_count();
    if (j != 21) throw std::invalid_argument("skeleton: expected 21 joints, got " + std::to_string(j));
    if (bones.size() != j - 1)
        throw std::invalid_argument("skeleton: a tree over " + std::to_string(j) + " joints needs " +
                                    std::to_string(j - 1) + " bones, got " +
                                    std::to_string(bones.size()));
    if (ref_bone_lengths_cm.size() != bones.size())
        throw std::invalid_argument("skeleton: ref_bone_lengths_cm must match bone count");
    std::vector<int> degree(j, 0);
    // Union-find over bone edges to verify the tree is connected and acyclic.
    std::vector<int> parent(j);
    for (std::size_t i = 0; i < j; ++i) parent[i] = int(i);
    auto find = [&](int a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    };
    for (auto [p, c] : bones) {
        if (p < 0 || c < 0 || p >= int(j) || c >= int(j) || p == c)
            throw std::invalid_argument("skeleton: bone endpoints out of range");
        int rp = find(p), rc = find(c);
        if (rp == rc) throw std::invalid_argument("skeleton: bones contain a cycle");
        parent[rp] = rc;
        ++degree[p];
        ++degree[c];
    }
    int root = find(0);
    for (std::size_t i = 0; i < j; ++i)
        if (find(int(i)) != root) throw std::invalid_argument("skeleton: bone tree is not connected");
    for (double len : ref_bone_lengths_cm)
        if (!(len > 0.0)) throw std::invalid_argument("skeleton: degenerate reference bone length");
    std::vector<int> image(j, -1);
    for (auto [l, r] : mirror_pairs) {
        if (l < 0 || r < 0 || l >= int(j) || r >= int(j))
            throw std::invalid_argument("skeleton: mirror pair out of range");
        image[l] = r;
        image[r] = l;
    }
    for (auto [l, r] : mirror_pairs)
        if (image[r] != l || image[l] != r)
            throw std::invalid_argument("skeleton: mirror_pairs is not an involution");
    if (lateral_axis < 0 || lateral_axis > 2)
        throw std::invalid_argument("skeleton: lateral_axis must be 0, 1 or 2");
    for (int h : heel_indices)
        if (h < 0 || h >= int(j)) throw std::invalid_argument("skeleton: heel index out of range");
}

Mat default_rest_pose() {
    // Multiples of 1/64 m; bones run parallel to an axis. Joint order:
    // trunk 0-4, left arm 5-8, right arm 9-12, left leg 13-16, right leg 17-20.
    static const double pose[21][3] = {
        {0.0, 0.9375, 0.0},           // pelvis
        {0.0, 1.09375, 0.0},          // spine
        {0.0, 1.25, 0.0},             // chest
        {0.0, 1.40625, 0.0},          // neck
        {0.0, 1.5625, 0.0},           // head
        {0.21875, 1.25, 0.0},         // l_shoulder
        {0.21875, 1.015625, 0.0},     // l_elbow
        {0.21875, 0.78125, 0.0},      // l_wrist
        {0.21875, 0.6875, 0.0},       // l_hand
        {-0.21875, 1.25, 0.0},        // r_shoulder
        {-0.21875, 1.015625, 0.0},    // r_elbow
        {-0.21875, 0.78125, 0.0},     // r_wrist
        {-0.21875, 0.6875, 0.0},      // r_hand
        {0.109375, 0.9375, 0.0},      // l_hip
        {0.109375, 0.5, 0.0},         // l_knee
        {0.109375, 0.0625, 0.0},      // l_heel
        {0.109375, 0.0625, 0.15625},  // l_toe
        {-0.109375, 0.9375, 0.0},     // r_hip
        {-0.109375, 0.5, 0.0},        // r_knee
        {-0.109375, 0.0625, 0.0},     // r_heel
        {-0.109375, 0.0625, 0.15625}, // r_toe
    };
    Mat m(21, 3);
    for (std::size_t j = 0; j < 21; ++j)
        for (std::size_t k = 0; k < 3; ++k) m(j, k) = pose[j][k];
    return m;
}

SkeletonSpec default_skeleton() {
    SkeletonSpec s;
    s.joint_names = {"pelvis", "spine",      "chest",   "neck",    "head",   "l_shoulder",
                     "l_elbow", "l_wrist",   "l_hand",  "r_shoulder", "r_elbow", "r_wrist",
                     "r_hand",  "l_hip",     "l_knee",  "l_heel",  "l_toe",  "r_hip",
                     "r_knee",  "r_heel",    "r_toe"};
    s.bones = {{0, 1},  {1, 2},   {2, 3},   {3, 4},   {2, 5},   {5, 6},   {6, 7},
               {7, 8},  {2, 9},   {9, 10},  {10, 11}, {11, 12}, {0, 13},  {13, 14},
               {14, 15}, {15, 16}, {0, 17},  {17, 18}, {18, 19}, {19, 20}};
    s.mirror_pairs = {{5, 9}, {6, 10}, {7, 11}, {8, 12}, {13, 17}, {14, 18}, {15, 19}, {16, 20}};
    s.lateral_axis = 0;
    s.heel_indices = {15, 19};
    Mat rest = default_rest_pose();
    s.ref_bone_lengths_cm.reserve(s.bones.size());
    for (auto [p, c] : s.bones) {
        double dx = rest(c, 0) - rest(p, 0);
        double dy = rest(c, 1) - rest(p, 1);
        double dz = rest(c, 2) - rest(p, 2);
        s.ref_bone_lengths_cm.push_back(100.0 * std::sqrt(dx * dx + dy * dy + dz * dz));
    }
    s.validate();
    return s;
}

SkeletonSpec load_skeleton(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("skeleton: cannot open " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw std::runtime_error("skeleton: bad JSON in " + path + ": " + e.what());
    }
    SkeletonSpec s;
    try {
        s.joint_names = doc.at("joint_names").get<std::vector<std::string>>();
        for (const auto& b : doc.at("bones"))
            s.bones.emplace_back(b.at(0).get<int>(), b.at(1).get<int>());
        for (const auto& m : doc.at("mirror_pairs"))
            s.mirror_pairs.emplace_back(m.at(0).get<int>(), m.at(1).get<int>());
        s.lateral_axis = doc.at("lateral_axis").get<int>();
        auto heels = doc.at("heel_indices").get<std::vector<int>>();
        if (heels.size() != 2) throw std::runtime_error("skeleton: need exactly two heel indices");
        s.heel_indices = {heels[0], heels[1]};
        s.ref_bone_lengths_cm = doc.at("ref_bone_lengths_cm").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw std::runtime_error("skeleton: missing or malformed field in " + path + ": " +
                                 e.what());
    }
    s.validate();
    return s;
}

void save_skeleton(const SkeletonSpec& skel, const std::string& path) {
    skel.validate();
    json doc;
    doc["joint_names"] = skel.joint_names;
    json bones = json::array();
    for (auto [p, c] : skel.bones) bones.push_back({p, c});
    doc["bones"] = bones;
    json pairs = json::array();
    for (auto [l, r] : skel.mirror_pairs) pairs.push_back({l, r});
    doc["mirror_pairs"] = pairs;
    doc["lateral_axis"] = skel.lateral_axis;
    doc["heel_indices"] = {skel.heel_indices[0], skel.heel_indices[1]};
    doc["ref_bone_lengths_cm"] = skel.ref_bone_lengths_cm;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("skeleton: cannot write " + path);
    out << doc.dump(2) << "\n";
}

}  // namespace modiff
