#include "micacl/optim.hpp"

#include <cmath>

#include "micacl/errors.hpp"

namespace micacl {

double cosine_lr(int step, int total_steps, double lr_max, double lr_min) {
    if (total_steps < 1) throw ConfigError("cosine_lr: total_steps must be >= 1");
    if (step < 0) throw ConfigError("cosine_lr: negative step");
    if (step > total_steps) return lr_min;
    const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(3.14159265358979323846 * frac));
}

OptimState OptimState::init(const std::vector<std::pair<std::string, Tensor>>& params,
                            OptimConfig hp) {
    hp.validate();
    OptimState st;
    st.hp = hp;
    st.slots.reserve(params.size());
    for (const auto& [name, p] : params) {
        (void)name;
        Slot s;
        s.m.assign(static_cast<std::size_t>(p.size()), 0.0);
        s.v.assign(static_cast<std::size_t>(p.size()), 0.0);
        st.slots.push_back(std::move(s));
    }
    return st;
}

void adamw_step(const std::vector<std::pair<std::string, Tensor>>& params, OptimState& state,
                double lr) {
    if (params.size() != state.slots.size())
        throw ConfigError("adamw_step: parameter list does not match optimizer state");
    ++state.step;
    const double b1 = state.hp.beta1;
    const double b2 = state.hp.beta2;
    const double bias1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double bias2 = 1.0 - std::pow(b2, static_cast<double>(state.step));

    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        const auto& [name, param] = params[pi];
        Tensor p = param;
        auto& values = p.mutable_values();
        auto& slot = state.slots[pi];
        if (slot.m.size() != values.size())
            throw ShapeError("adamw_step: state size mismatch for parameter '" + name + "'");
        const bool has_grad = p.has_grad();
        const std::vector<double>* grad = has_grad ? &p.grad() : nullptr;
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double g = has_grad ? (*grad)[i] : 0.0;
            if (!std::isfinite(g))
                throw NumericError("adamw_step: non-finite gradient in parameter '" + name +
                                   "' at coordinate " + std::to_string(i));
            values[i] -= lr * state.hp.weight_decay * values[i];
            slot.m[i] = b1 * slot.m[i] + (1.0 - b1) * g;
            slot.v[i] = b2 * slot.v[i] + (1.0 - b2) * g * g;
            const double m_hat = slot.m[i] / bias1;
            const double v_hat = slot.v[i] / bias2;
            values[i] -= lr * m_hat / (std::sqrt(v_hat) + state.hp.eps);
        }
    }
}

}  // namespace micacl
