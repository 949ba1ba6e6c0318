#pragma once

#include <cstdint>
#include <random>

namespace airylab {

// Seeded random stream. Identical (seed, stream) reproduces identical draws
// bit-for-bit on one build; substreams let estimators shard work
// deterministically regardless of thread scheduling.
class RngState {
public:
    explicit RngState(std::uint64_t seed, std::uint64_t stream = 0)
        : seed_(seed), stream_(stream) {
        std::seed_seq seq{seed, stream};
        engine_.seed(seq);
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

    RngState substream(std::uint64_t i) const {
        // Mix so nested sharding never collides with sibling streams.
        return RngState(seed_, stream_ * 0x9e3779b97f4a7c15ULL + i + 1);
    }

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }
    std::uint64_t bits() { return engine_(); }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
    std::uint64_t seed_;
    std::uint64_t stream_;
};

} // namespace airylab
