#pragma once

#include <vector>

#include "micacl/config.hpp"
#include "micacl/databag.hpp"
#include "micacl/model.hpp"

namespace micacl {

struct MetricsReport {
    std::vector<std::vector<int>> confusion;  // [true class][predicted class]
    std::vector<double> per_class_recall;     // NaN for classes with no true samples
    double war = 0.0;  // sum(diag) / sum(all)
    double uar = 0.0;  // mean recall over classes with >= 1 true sample
};

MetricsReport metrics_from_confusion(const std::vector<std::vector<int>>& confusion);

// Argmax classification over the given bag indices (ties break to the lowest
// class index). Runs in fixed-size chunks; the result does not depend on the
// chunking.
MetricsReport evaluate(const ModelParams& params, const ModelConfig& cfg, const Dataset& ds,
                       const std::vector<int>& indices);

// Convenience: evaluate the whole dataset.
MetricsReport evaluate(const ModelParams& params, const ModelConfig& cfg, const Dataset& ds);

}  // namespace micacl
