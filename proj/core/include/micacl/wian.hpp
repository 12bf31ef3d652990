#pragma once

#include <string>
#include <utility>
#include <vector>

#include "micacl/tensor.hpp"

namespace micacl {

// Weighted instance aggregation: an LSTM variant whose candidate cell update
// is modulated by a dynamic weight gate driven by per-instance channel
// weights, followed by multi-head self-attention over the hidden sequence.
//
// All projection matrices are stored [in x out] and applied as row-vector
// products (x * W), which matches the usual column-vector form W' * x'.
struct WianParams {
    int in_width = 0;  // C, channel width of the incoming instance features
    int hidden = 0;    // C_h, recurrent cell width
    int n_heads = 0;

    // dynamic weight gate
    Tensor gate_wx;      // [C x C_h]
    Tensor gate_wh;      // [C_h x C_h]
    Tensor weight_proj;  // [C x C_h]; defined() only when C != C_h

    // lstm gates
    Tensor forget_wx, forget_wh, forget_b;
    Tensor input_wx, input_wh, input_b;
    Tensor output_wx, output_wh, output_b;
    Tensor cand_wx, cand_wh, cand_b;

    // self-attention: per-head query/key/value projections plus output mix
    std::vector<Tensor> attn_q, attn_k, attn_v;  // each [C_h x head_dim]
    Tensor attn_out;                             // [C_h x C_h]

    // weights ~ U[-1/sqrt(fan_in), 1/sqrt(fan_in)]; forget bias starts at +1
    static WianParams init(int in_width, int hidden, int n_heads, Rng& rng);

    std::vector<std::pair<std::string, Tensor>> named(const std::string& prefix) const;
};

struct RecurrentState {
    Tensor h;  // [B x C_h]
    Tensor c;  // [B x C_h]

    static RecurrentState zero(int batch, int hidden);
};

// Per-(bag, instance) distribution over the feature channels:
// softmax of the interaction output along its last axis.
Tensor instance_weights(const Tensor& h_geiim);

// d_t = sigmoid(x_t * gate_wx + h_prev * gate_wh) .* w_t.
// w_t must already have width C_h (project before calling when C != C_h).
Tensor dwg(const Tensor& x_t, const Tensor& h_prev, const Tensor& w_t, const WianParams& params);

// One recurrent step; the candidate contribution is scaled elementwise by d_t:
// c_t = f .* c_prev + i .* cand .* d_t, h_t = o .* tanh(c_t).
RecurrentState wian_cell(const Tensor& x_t, const RecurrentState& state, const Tensor& d_t,
                         const WianParams& params);

// Unrolls wian_cell over t = 0..T-1 from a zero state and returns all hidden
// states as [B x T x C_h]. With unit_gate the dynamic gate is pinned to 1,
// which reduces the cell to a plain LSTM step.
Tensor wian_forward(const Tensor& h_geiim, const Tensor& w, const WianParams& params,
                    bool unit_gate = false);

// Scaled dot-product multi-head self-attention over the T axis with a
// residual connection (no normalization layers).
Tensor mhsa(const Tensor& seq, const WianParams& params);

// Temporal mean pooling into the bag embedding: [B x T x C_h] -> [B x C_h].
Tensor aggregate(const Tensor& seq);

}  // namespace micacl
