#pragma once

#include <cstdint>

namespace spdelq {

struct MCConfig {
    long long paths = 1000;
    std::uint64_t seed = 1;
    /// Substeps per grid interval (or total steps where no grid is given).
    int steps = 1;
    /// Noise channels simulated; 0 means all channels of the basis.
    int noise_channels = 0;
    bool store_states = false;

    void validate() const;
};

}  // namespace spdelq
