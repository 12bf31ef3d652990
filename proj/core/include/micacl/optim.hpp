#pragma once

#include <string>
#include <utility>
#include <vector>

#include "micacl/config.hpp"
#include "micacl/tensor.hpp"

namespace micacl {

// lr_min + 0.5 * (lr_max - lr_min) * (1 + cos(pi * step / total_steps));
// steps beyond total_steps clamp to lr_min.
double cosine_lr(int step, int total_steps, double lr_max, double lr_min);

// AdamW moment buffers, laid out parallel to a fixed parameter list.
struct OptimState {
    struct Slot {
        std::vector<double> m, v;
    };
    std::vector<Slot> slots;
    long step = 0;
    OptimConfig hp;

    static OptimState init(const std::vector<std::pair<std::string, Tensor>>& params,
                           OptimConfig hp);
};

// Decoupled weight decay (p -= lr * wd * p) followed by the bias-corrected
// Adam update. Parameters whose gradient was never populated are treated as
// zero-gradient (they still decay). Non-finite gradients abort, naming the
// parameter.
void adamw_step(const std::vector<std::pair<std::string, Tensor>>& params, OptimState& state,
                double lr);

}  // namespace micacl
