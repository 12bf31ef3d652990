#pragma once

#include <functional>
#include <vector>

#include "micacl/tensor.hpp"

namespace micacl {

struct GradCheckResult {
    double max_rel_err = 0.0;
    // location of the worst coordinate, for diagnostics
    std::size_t param_index = 0;
    std::size_t coord = 0;
    double analytic = 0.0;
    double numeric = 0.0;
};

// Compares reverse-mode gradients of the scalar function `f` against central
// finite differences over every coordinate of `params`. `f` must rebuild its
// graph from the current leaf values on each call and be deterministic.
// Relative error per coordinate: |analytic - numeric| / max(1, |analytic|, |numeric|).
// Throws NumericError if f evaluates non-finite at a perturbed point, naming
// the parameter and coordinate. eps must lie in (0, 1e-2].
GradCheckResult grad_check_detail(const std::function<Tensor()>& f,
                                  const std::vector<Tensor>& params, double eps);

double grad_check(const std::function<Tensor()>& f, const std::vector<Tensor>& params,
                  double eps);

}  // namespace micacl
