#include "ldadam/schedule.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ldadam {

double Schedule::lr(std::size_t t) const {
    if (t < 1 || t > total_steps) throw std::out_of_range("Schedule::lr: step out of range");
    if (warmup_steps > 0 && t <= warmup_steps)
        return base_lr * static_cast<double>(t) / static_cast<double>(warmup_steps);

    const double span = static_cast<double>(total_steps - warmup_steps);
    const double u = span > 0.0 ? static_cast<double>(t - warmup_steps) / span : 1.0;
    switch (decay) {
        case Decay::constant:
            return base_lr;
        case Decay::linear_to_zero:
            return base_lr * (1.0 - u);
        case Decay::cosine_to_fraction:
            return base_lr *
                   (fraction + (1.0 - fraction) * 0.5 * (1.0 + std::cos(std::numbers::pi * u)));
    }
    return base_lr;
}

} // namespace ldadam
