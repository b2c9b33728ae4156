#include "edip/optim.hpp"

#include <cmath>

namespace edip {

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const std::string& block) {
    if (params.size() != grads.size() || params.size() != state.first_moment.size())
        throw ShapeError("adam_step: length mismatch for block '" + block + "'");
    for (double g : grads)
        if (!std::isfinite(g))
            throw Error("adam_step: non-finite gradient in block '" + block + "'");
    const double lr = state.lr_schedule.lr(state.step_count);
    state.step_count += 1;
    const double b1 = state.beta1, b2 = state.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step_count));
    for (size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.first_moment[i] = b1 * state.first_moment[i] + (1.0 - b1) * g;
        state.second_moment[i] = b2 * state.second_moment[i] + (1.0 - b2) * g * g;
        const double mhat = state.first_moment[i] / bc1;
        const double vhat = state.second_moment[i] / bc2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + state.epsilon);
    }
}

}  // namespace edip
