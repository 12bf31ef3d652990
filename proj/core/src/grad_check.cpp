#include "micacl/grad_check.hpp"

#include <cmath>
#include <string>

#include "micacl/errors.hpp"

namespace micacl {

GradCheckResult grad_check_detail(const std::function<Tensor()>& f,
                                  const std::vector<Tensor>& params, double eps) {
    if (!(eps > 0.0 && eps <= 1e-2))
        throw NumericError("grad_check: eps must lie in (0, 1e-2], got " + std::to_string(eps));

    for (const auto& p : params) p.zero_grad();
    Tensor loss = f();
    backward(loss);

    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (const auto& p : params) {
        if (p.has_grad())
            analytic.push_back(p.grad());
        else
            analytic.emplace_back(static_cast<std::size_t>(p.size()), 0.0);  // unused parameter
    }

    GradCheckResult result;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Tensor p = params[pi];
        auto& vals = p.mutable_values();
        for (std::size_t c = 0; c < vals.size(); ++c) {
            const double saved = vals[c];
            vals[c] = saved + eps;
            const double up = f().item();
            vals[c] = saved - eps;
            const double down = f().item();
            vals[c] = saved;
            if (!std::isfinite(up) || !std::isfinite(down))
                throw NumericError("grad_check: non-finite loss at perturbed coordinate " +
                                   std::to_string(c) + " of parameter " + std::to_string(pi));
            const double numeric = (up - down) / (2.0 * eps);
            const double a = analytic[pi][c];
            const double denom = std::max({1.0, std::abs(a), std::abs(numeric)});
            const double rel = std::abs(a - numeric) / denom;
            if (rel > result.max_rel_err) {
                result.max_rel_err = rel;
                result.param_index = pi;
                result.coord = c;
                result.analytic = a;
                result.numeric = numeric;
            }
        }
    }
    return result;
}

double grad_check(const std::function<Tensor()>& f, const std::vector<Tensor>& params,
                  double eps) {
    return grad_check_detail(f, params, eps).max_rel_err;
}

}  // namespace micacl
