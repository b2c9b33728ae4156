#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "edip/error.hpp"

namespace edip {

struct LearningRateSchedule {
    enum class Kind { Constant, LinearWarmdown };
    Kind kind = Kind::Constant;
    double initial_lr = 1e-4;
    double final_lr = 1e-4;
    int64_t transition_iters = 1;

    static LearningRateSchedule constant(double lr) {
        return {Kind::Constant, lr, lr, 1};
    }
    static LearningRateSchedule linear_warmdown(double initial, double final, int64_t iters) {
        return {Kind::LinearWarmdown, initial, final, iters};
    }

    double lr(int64_t iter) const {
        if (kind == Kind::Constant) return initial_lr;
        double t = std::min(static_cast<double>(iter) / static_cast<double>(transition_iters), 1.0);
        return initial_lr + (final_lr - initial_lr) * t;
    }
};

// Adam with bias correction; one state per parameter block.
struct AdamState {
    int64_t step_count = 0;
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    LearningRateSchedule lr_schedule;

    explicit AdamState(size_t n, LearningRateSchedule sched = {})
        : first_moment(n, 0.0), second_moment(n, 0.0), lr_schedule(sched) {}
};

// In-place update; lr is taken from the schedule at the pre-increment step
// index. Throws on non-finite gradients, naming `block` in the message.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const std::string& block = "");

}  // namespace edip
