#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

namespace spdelq {

/// Philox-4x32-10 counter-based generator (Salmon et al., SC'11).
/// Output is a pure function of (counter, key), so any draw can be reproduced
/// without replaying the stream.
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter generate(Counter ctr, Key key) noexcept {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kW0;
                key[1] += kW1;
            }
            const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kM0 = 0xD2511F53;
    static constexpr std::uint32_t kM1 = 0xCD9E8D57;
    static constexpr std::uint32_t kW0 = 0x9E3779B9;
    static constexpr std::uint32_t kW1 = 0xBB67AE85;
};

/// Independent standard-normal stream for one Monte-Carlo path.
///
/// Draw i of path p under seed s depends only on (s, p, i); the worker that
/// computes it is irrelevant.
class PathStream {
public:
    PathStream(std::uint64_t seed, std::uint64_t path) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          path_(path) {}

    /// Normals 2*block and 2*block+1.
    std::pair<double, double> normal_pair(std::uint64_t block) const noexcept {
        const auto r = Philox4x32::generate(
            {static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32),
             static_cast<std::uint32_t>(path_), static_cast<std::uint32_t>(path_ >> 32)},
            key_);
        const double u1 = to_unit(r[0], r[1]);
        const double u2 = to_unit(r[2], r[3]);
        const double rad = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        return {rad * std::cos(theta), rad * std::sin(theta)};
    }

    double normal(std::uint64_t index) const noexcept {
        const auto pr = normal_pair(index / 2);
        return (index % 2 == 0) ? pr.first : pr.second;
    }

    /// Fills out[0..n) with normals first, first+1, ...; `first` must be even.
    void normals(std::uint64_t first, double* out, int n) const noexcept {
        int i = 0;
        for (; i + 1 < n; i += 2) {
            const auto pr = normal_pair((first + static_cast<std::uint64_t>(i)) / 2);
            out[i] = pr.first;
            out[i + 1] = pr.second;
        }
        if (i < n) out[i] = normal_pair((first + static_cast<std::uint64_t>(i)) / 2).first;
    }

private:
    // 53-bit uniform in (0, 1).
    static double to_unit(std::uint32_t hi, std::uint32_t lo) noexcept {
        const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
        return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
    }

    Philox4x32::Key key_;
    std::uint64_t path_;
};

}  // namespace spdelq
