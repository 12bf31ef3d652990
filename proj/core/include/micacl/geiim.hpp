#pragma once

#include <string>
#include <utility>
#include <vector>

#include "micacl/tensor.hpp"

namespace micacl {

// Graph-enhanced instance interaction: a learnable adjacency over the T
// instances of a bag, applied as one step of linear diffusion mixed with the
// original features through a gated coefficient.
struct GeiimParams {
    Tensor embed_src;  // [T x d], source-side node embedding
    Tensor embed_dst;  // [d x T], destination-side node embedding
    Tensor alpha_raw;  // scalar; the mixing coefficient is sigmoid(alpha_raw)

    // embeddings ~ U[-1/sqrt(d), 1/sqrt(d)], alpha_raw = 0 (mix starts at 0.5)
    static GeiimParams init(int instances, int embed_dim, Rng& rng);

    std::vector<std::pair<std::string, Tensor>> named(const std::string& prefix) const;
};

// A = softmax(relu(embed_src * embed_dst)), softmax over each row, so every
// row is a distribution over the instances it mixes from.
Tensor build_adjacency(const GeiimParams& params);

// H[b] = alpha * X[b] + (1 - alpha) * A * X[b] for each batch element.
// x: [B x T x C], a: [T x T] row-stochastic, alpha: scalar in [0, 1].
Tensor diffuse(const Tensor& x, const Tensor& a, const Tensor& alpha);

struct GeiimOut {
    Tensor h;          // [B x T x C]
    Tensor adjacency;  // [T x T]
};

GeiimOut geiim_forward(const Tensor& x, const GeiimParams& params);

}  // namespace micacl
