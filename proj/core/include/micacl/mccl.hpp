#pragma once

#include <string>
#include <utility>
#include <vector>

#include "micacl/tensor.hpp"

namespace micacl {

// Per-class sample counts of the training split plus the base temperature.
// Counts are dataset-level statistics, computed once, not per batch.
struct ClassStats {
    std::vector<int> counts;  // length K, every entry >= 1
    double tau0 = 0.1;

    int num_classes() const { return static_cast<int>(counts.size()); }
    void validate() const;
};

// Multiscale projection bank: each scale pools the bag embedding down to
// `scale` buckets and projects it into a shared embedding width.
struct ScaleSet {
    std::vector<int> scales;          // nonempty, strictly increasing, each <= in_width
    std::vector<Tensor> projections;  // per scale: [scale x embed_width]
    int in_width = 0;
    int embed_width = 0;

    // projections ~ U[-1/sqrt(scale), 1/sqrt(scale)]
    static ScaleSet init(std::vector<int> scales, int in_width, int embed_width, Rng& rng);
    void validate() const;

    std::vector<std::pair<std::string, Tensor>> named(const std::string& prefix) const;
};

// w_c[b] = (1 / counts[labels[b]]) * (1 - softmax(logits[b])[labels[b]]).
// The logits act as fixed coefficients: the result is a non-differentiable
// leaf regardless of the input's grad status (detach before calling to make
// that explicit at the call site).
Tensor class_weights(const ClassStats& stats, const Tensor& logits, const std::vector<int>& labels);

// For each scale s: project(adaptive_avg_pool(x_bag, s)); outputs [B x E] each.
std::vector<Tensor> multiscale_project(const Tensor& x_bag, const ScaleSet& scale_set);

// tau = tau0 * (1/K) * sum_i (1 + counts[i] / max(counts)); in (tau0, 2*tau0].
double dynamic_temperature(const ClassStats& stats);

// S[i][j] = cos(x_i, x_j) / tau; symmetric with diagonal 1/tau. Throws if any
// row norm falls below 1e-12 (degenerate embedding).
Tensor similarity_matrix(const Tensor& x, double tau);

// Per-scale contrastive loss over a similarity matrix:
//   L = -(1/B) * sum_i [ sum_{j in P(i)} w_c[i] * exp(S_ij) ] / [ sum_{k != i} exp(S_ik) ]
// with P(i) = same-label samples excluding the anchor. Anchors without
// positives contribute 0. Exponentials are shifted by the row max (the ratio
// is invariant to the shift). With log_form each anchor instead contributes
// -log(ratio), skipping anchors whose ratio underflows to zero.
// Gradient flows into s_mat only; w_c is a coefficient vector.
Tensor contrastive_loss_scale(const Tensor& s_mat, const std::vector<int>& labels,
                              const Tensor& w_c, bool log_form = false);

// Average of the per-scale contrastive losses over the scale set.
Tensor mccl_loss(const Tensor& x_bag, const std::vector<int>& labels, const ClassStats& stats,
                 const Tensor& logits_detached, const ScaleSet& scale_set, bool log_form = false);

// Mean cross-entropy with a stable log-softmax.
Tensor cet_loss(const Tensor& logits, const std::vector<int>& labels);

// Plain unit-weight sum of the two terms.
Tensor total_loss(const Tensor& l_mc, const Tensor& l_cet);

}  // namespace micacl
