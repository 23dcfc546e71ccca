#pragma once

#include <cstdint>

namespace ldadam {

// Philox4x32-10 counter-based generator (Salmon et al., "Parallel random
// numbers: as easy as 1, 2, 3"). Chosen so that every stream is addressable
// as (seed, stream) and trajectories reproduce exactly across platforms and
// re-implementations. Derived distributions are pinned too:
//   uniform01:  (x + 0.5) * 2^-32 from one 32-bit word, in (0, 1)
//   gaussian:   Box-Muller on consecutive uniform pairs
//   index(n):   floor(uniform01 * n), clamped to n - 1
class PhiloxRng {
public:
    explicit PhiloxRng(std::uint64_t seed, std::uint64_t stream = 0);

    std::uint32_t next_u32();
    double uniform01();
    double gaussian();
    std::uint64_t index(std::uint64_t n);

private:
    void refill();

    std::uint32_t key_[2];
    std::uint32_t ctr_[4];
    std::uint32_t buf_[4];
    int buf_pos_ = 4;
    bool have_cached_gauss_ = false;
    double cached_gauss_ = 0.0;
};

} // namespace ldadam
