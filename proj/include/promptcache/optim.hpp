#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace promptcache {

/// Defaults match the common AdamW defaults (beta1 0.9, beta2 0.999, eps 1e-8).
struct AdamWOptions {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamWState {
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    std::uint64_t step = 0;

    static AdamWState zeros(std::size_t n);
};

/// One bias-corrected AdamW update with decoupled weight decay.
///
/// Decay multiplies params[i] by (1 - lr * weight_decay) before the adaptive
/// step, for every i with decay_mask[i] != 0 (all entries when the mask is
/// empty). Throws std::invalid_argument on mismatched sizes.
void adamw_step(AdamWState& state, std::span<double> params, std::span<const double> grads,
                double lr, double weight_decay, std::span<const std::uint8_t> decay_mask = {},
                const AdamWOptions& options = {});

}  // namespace promptcache
