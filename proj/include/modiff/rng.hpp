#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "modiff/matrix.hpp"

namespace modiff {

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a64_bytes(const void* p, std::size_t n,
                                   std::uint64_t h = 0xcbf29ce484222325ull) {
    const unsigned char* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= b[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

// Seeded random stream. Every source of randomness in the project is a
// named substream of one root seed, so any stage can be reproduced on its
// own: substream("sampling"), substream("training", epoch), ...
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : seed_(seed), eng_(seed) {}

    RandomStream substream(std::string_view name) const {
        std::uint64_t h = fnv1a64(name);
        return RandomStream(h ^ (seed_ * 0x9e3779b97f4a7c15ull + 0x7f4a7c15ull));
    }

    RandomStream substream(std::string_view name, std::uint64_t index) const {
        std::uint64_t h = fnv1a64(name) + 0x9e3779b97f4a7c15ull * (index + 1);
        return RandomStream(h ^ (seed_ * 0x9e3779b97f4a7c15ull + 0x7f4a7c15ull));
    }

    std::uint64_t seed() const { return seed_; }

    double normal() { return normal_(eng_); }
    double uniform() { return uniform_(eng_); }  // U[0,1)

    // Uniform integer in [lo, hi], inclusive.
    std::int64_t integer(std::int64_t lo, std::int64_t hi) {
        return std::uniform_int_distribution<std::int64_t>(lo, hi)(eng_);
    }

    void fill_normal(Mat& m) {
        for (std::size_t i = 0; i < m.size(); ++i) m[i] = normal_(eng_);
    }

    Mat normal_matrix(std::size_t rows, std::size_t cols) {
        Mat m(rows, cols);
        fill_normal(m);
        return m;
    }

    std::mt19937_64& engine() { return eng_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 eng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace modiff
