#ifndef MICROHMC_RANDOM_HPP
#define MICROHMC_RANDOM_HPP

#include <cstdint>
#include <random>

namespace microhmc {

/// Per-chain pseudo-random source. Each chain owns one; streams for different
/// chain indices are derived from the same base seed through std::seed_seq,
/// so chain k draws the same numbers regardless of how many chains run.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint32_t stream_id) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                          stream_id, 0x6d686d63u};
        engine_.seed(seq);
    }

    explicit RandomStream(std::uint64_t seed) : RandomStream(seed, 0) {}

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform_(engine_); }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace microhmc

#endif  // MICROHMC_RANDOM_HPP
