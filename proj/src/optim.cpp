#include "promptcache/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace promptcache {

AdamWState AdamWState::zeros(std::size_t n) {
    return AdamWState{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0};
}

void adamw_step(AdamWState& state, std::span<double> params, std::span<const double> grads,
                double lr, double weight_decay, std::span<const std::uint8_t> decay_mask,
                const AdamWOptions& options) {
    const std::size_t n = params.size();
    if (grads.size() != n || state.first_moment.size() != n || state.second_moment.size() != n) {
        throw std::invalid_argument("adamw_step: parameter, gradient and state sizes differ");
    }
    if (!decay_mask.empty() && decay_mask.size() != n) {
        throw std::invalid_argument("adamw_step: decay mask size differs from parameter count");
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double bias1 = 1.0 - std::pow(options.beta1, t);
    const double bias2 = 1.0 - std::pow(options.beta2, t);
    const double decay = 1.0 - lr * weight_decay;
    for (std::size_t i = 0; i < n; ++i) {
        if (weight_decay != 0.0 && (decay_mask.empty() || decay_mask[i] != 0)) params[i] *= decay;
        const double g = grads[i];
        double& m = state.first_moment[i];
        double& v = state.second_moment[i];
        m = options.beta1 * m + (1.0 - options.beta1) * g;
        v = options.beta2 * v + (1.0 - options.beta2) * g * g;
        const double m_hat = m / bias1;
        const double v_hat = v / bias2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + options.eps);
    }
}

}  // namespace promptcache
