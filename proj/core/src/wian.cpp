#include "micacl/wian.hpp"

#include <cmath>

#include "micacl/errors.hpp"

namespace micacl {

namespace {

Tensor gate_preact(const Tensor& x_t, const Tensor& h_prev, const Tensor& wx, const Tensor& wh,
                   const Tensor& b) {
    return add_rowvec(add(matmul(x_t, wx), matmul(h_prev, wh)), b);
}

}  // namespace

WianParams WianParams::init(int in_width, int hidden, int n_heads, Rng& rng) {
    if (hidden % n_heads != 0)
        throw ConfigError("wian: hidden width " + std::to_string(hidden) +
                          " not divisible by n_heads " + std::to_string(n_heads));
    const double bx = 1.0 / std::sqrt(static_cast<double>(in_width));
    const double bh = 1.0 / std::sqrt(static_cast<double>(hidden));

    WianParams p;
    p.in_width = in_width;
    p.hidden = hidden;
    p.n_heads = n_heads;

    p.gate_wx = Tensor::uniform({in_width, hidden}, -bx, bx, rng, true);
    p.gate_wh = Tensor::uniform({hidden, hidden}, -bh, bh, rng, true);
    if (in_width != hidden)
        p.weight_proj = Tensor::uniform({in_width, hidden}, -bx, bx, rng, true);

    auto make_gate = [&](Tensor& wx, Tensor& wh, Tensor& b, double bias_init) {
        wx = Tensor::uniform({in_width, hidden}, -bx, bx, rng, true);
        wh = Tensor::uniform({hidden, hidden}, -bh, bh, rng, true);
        b = Tensor::full({hidden}, bias_init, true);
    };
    make_gate(p.forget_wx, p.forget_wh, p.forget_b, 1.0);
    make_gate(p.input_wx, p.input_wh, p.input_b, 0.0);
    make_gate(p.output_wx, p.output_wh, p.output_b, 0.0);
    make_gate(p.cand_wx, p.cand_wh, p.cand_b, 0.0);

    const int head_dim = hidden / n_heads;
    for (int h = 0; h < n_heads; ++h) {
        p.attn_q.push_back(Tensor::uniform({hidden, head_dim}, -bh, bh, rng, true));
        p.attn_k.push_back(Tensor::uniform({hidden, head_dim}, -bh, bh, rng, true));
        p.attn_v.push_back(Tensor::uniform({hidden, head_dim}, -bh, bh, rng, true));
    }
    p.attn_out = Tensor::uniform({hidden, hidden}, -bh, bh, rng, true);
    return p;
}

std::vector<std::pair<std::string, Tensor>> WianParams::named(const std::string& prefix) const {
    std::vector<std::pair<std::string, Tensor>> out = {
        {prefix + ".gate_wx", gate_wx},       {prefix + ".gate_wh", gate_wh},
        {prefix + ".forget_wx", forget_wx},   {prefix + ".forget_wh", forget_wh},
        {prefix + ".forget_b", forget_b},     {prefix + ".input_wx", input_wx},
        {prefix + ".input_wh", input_wh},     {prefix + ".input_b", input_b},
        {prefix + ".output_wx", output_wx},   {prefix + ".output_wh", output_wh},
        {prefix + ".output_b", output_b},     {prefix + ".cand_wx", cand_wx},
        {prefix + ".cand_wh", cand_wh},       {prefix + ".cand_b", cand_b},
        {prefix + ".attn_out", attn_out},
    };
    if (weight_proj.defined()) out.emplace_back(prefix + ".weight_proj", weight_proj);
    for (int h = 0; h < n_heads; ++h) {
        const std::string hs = std::to_string(h);
        out.emplace_back(prefix + ".attn_q" + hs, attn_q[static_cast<std::size_t>(h)]);
        out.emplace_back(prefix + ".attn_k" + hs, attn_k[static_cast<std::size_t>(h)]);
        out.emplace_back(prefix + ".attn_v" + hs, attn_v[static_cast<std::size_t>(h)]);
    }
    return out;
}

RecurrentState RecurrentState::zero(int batch, int hidden) {
    return {Tensor::zeros({batch, hidden}), Tensor::zeros({batch, hidden})};
}

Tensor instance_weights(const Tensor& h_geiim) {
    if (h_geiim.rank() != 3)
        throw ShapeError("instance_weights: expected [B x T x C], got " + shape_str(h_geiim.shape()));
    return softmax(h_geiim, 2);
}

Tensor dwg(const Tensor& x_t, const Tensor& h_prev, const Tensor& w_t, const WianParams& params) {
    Tensor s = sigmoid(add(matmul(x_t, params.gate_wx), matmul(h_prev, params.gate_wh)));
    return mul(s, w_t);
}

RecurrentState wian_cell(const Tensor& x_t, const RecurrentState& state, const Tensor& d_t,
                         const WianParams& params) {
    Tensor f = sigmoid(gate_preact(x_t, state.h, params.forget_wx, params.forget_wh, params.forget_b));
    Tensor i = sigmoid(gate_preact(x_t, state.h, params.input_wx, params.input_wh, params.input_b));
    Tensor o = sigmoid(gate_preact(x_t, state.h, params.output_wx, params.output_wh, params.output_b));
    Tensor cand = tanh_act(gate_preact(x_t, state.h, params.cand_wx, params.cand_wh, params.cand_b));
    Tensor c = add(mul(f, state.c), mul(mul(i, cand), d_t));
    Tensor h = mul(o, tanh_act(c));
    return {h, c};
}

Tensor wian_forward(const Tensor& h_geiim, const Tensor& w, const WianParams& params,
                    bool unit_gate) {
    if (h_geiim.rank() != 3)
        throw ShapeError("wian_forward: expected [B x T x C], got " + shape_str(h_geiim.shape()));
    if (w.shape() != h_geiim.shape())
        throw ShapeError("wian_forward: weights " + shape_str(w.shape()) +
                         " do not match input " + shape_str(h_geiim.shape()));
    const int batch = h_geiim.dim(0);
    const int steps = h_geiim.dim(1);

    RecurrentState state = RecurrentState::zero(batch, params.hidden);
    Tensor ones = Tensor::full({batch, params.hidden}, 1.0);
    std::vector<Tensor> hidden;
    hidden.reserve(static_cast<std::size_t>(steps));
    for (int t = 0; t < steps; ++t) {
        Tensor x_t = select(h_geiim, 1, t);
        Tensor d_t;
        if (unit_gate) {
            d_t = ones;
        } else {
            Tensor w_t = select(w, 1, t);
            if (params.weight_proj.defined()) w_t = matmul(w_t, params.weight_proj);
            d_t = dwg(x_t, state.h, w_t, params);
        }
        state = wian_cell(x_t, state, d_t, params);
        hidden.push_back(state.h);
    }
    return stack(hidden, 1);
}

Tensor mhsa(const Tensor& seq, const WianParams& params) {
    if (seq.rank() != 3)
        throw ShapeError("mhsa: expected [B x T x C_h], got " + shape_str(seq.shape()));
    if (params.hidden % params.n_heads != 0)
        throw ConfigError("mhsa: hidden width " + std::to_string(params.hidden) +
                          " not divisible by n_heads " + std::to_string(params.n_heads));
    const int batch = seq.dim(0);
    const int head_dim = params.hidden / params.n_heads;
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(head_dim));

    std::vector<Tensor> out_rows;
    out_rows.reserve(static_cast<std::size_t>(batch));
    for (int b = 0; b < batch; ++b) {
        Tensor x = select(seq, 0, b);  // [T x C_h]
        std::vector<Tensor> heads;
        heads.reserve(static_cast<std::size_t>(params.n_heads));
        for (int h = 0; h < params.n_heads; ++h) {
            const auto hi = static_cast<std::size_t>(h);
            Tensor q = matmul(x, params.attn_q[hi]);
            Tensor k = matmul(x, params.attn_k[hi]);
            Tensor v = matmul(x, params.attn_v[hi]);
            Tensor attn = softmax(mul_scalar(matmul(q, transpose(k)), inv_scale), 1);
            heads.push_back(matmul(attn, v));
        }
        Tensor mixed = matmul(concat_last(heads), params.attn_out);
        out_rows.push_back(add(x, mixed));
    }
    return stack(out_rows, 0);
}

Tensor aggregate(const Tensor& seq) {
    if (seq.rank() != 3)
        throw ShapeError("aggregate: expected [B x T x C_h], got " + shape_str(seq.shape()));
    return reduce(seq, 1, Reduce::Mean);
}

}  // namespace micacl
