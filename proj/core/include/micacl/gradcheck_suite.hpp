#pragma once

#include <string>
#include <vector>

namespace micacl {

struct ModuleGradCheck {
    std::string module;
    double max_rel_err = 0.0;
};

// Finite-difference verification of the analytic gradients on fixed toy
// configurations. `module` is one of geiim | wian | mccl | all; "all" adds an
// end-to-end check through the assembled model and both loss terms.
std::vector<ModuleGradCheck> run_gradcheck(const std::string& module, double eps);

}  // namespace micacl
