#pragma once

#include <cstddef>

namespace ldadam {

// Learning-rate schedule: linear warmup from 0 over `warmup_steps`, then the
// configured decay over the remaining steps. Continuous at the warmup
// boundary; step indices are 1-based and must stay within total_steps.
struct Schedule {
    enum class Decay { linear_to_zero, cosine_to_fraction, constant };

    double base_lr = 1e-3;
    std::size_t warmup_steps = 0;
    Decay decay = Decay::constant;
    double fraction = 0.1; // cosine_to_fraction endpoint, as a share of base_lr
    std::size_t total_steps = 1;

    double lr(std::size_t t) const;
};

} // namespace ldadam
