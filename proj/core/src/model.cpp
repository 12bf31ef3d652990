#include "micacl/model.hpp"

#include <cmath>

#include "micacl/errors.hpp"

namespace micacl {

ModelParams ModelParams::init(const ModelConfig& cfg, Rng& rng) {
    cfg.validate();
    ModelParams p;
    const double b_in = 1.0 / std::sqrt(static_cast<double>(cfg.C_in));
    const double b_hid = 1.0 / std::sqrt(static_cast<double>(cfg.encoder_hidden));
    const double b_ch = 1.0 / std::sqrt(static_cast<double>(cfg.C_h));
    p.enc_w1 = Tensor::uniform({cfg.C_in, cfg.encoder_hidden}, -b_in, b_in, rng, true);
    p.enc_b1 = Tensor::zeros({cfg.encoder_hidden}, true);
    p.enc_w2 = Tensor::uniform({cfg.encoder_hidden, cfg.C}, -b_hid, b_hid, rng, true);
    p.enc_b2 = Tensor::zeros({cfg.C}, true);
    p.geiim = GeiimParams::init(cfg.T, cfg.d, rng);
    p.wian = WianParams::init(cfg.C, cfg.C_h, cfg.n_heads, rng);
    p.cls_w = Tensor::uniform({cfg.C_h, cfg.K}, -b_ch, b_ch, rng, true);
    p.cls_b = Tensor::zeros({cfg.K}, true);
    p.scale_set = ScaleSet::init(cfg.effective_scales(), cfg.C_h, cfg.E, rng);
    return p;
}

std::vector<std::pair<std::string, Tensor>> ModelParams::named_parameters() const {
    std::vector<std::pair<std::string, Tensor>> out = {
        {"enc.w1", enc_w1}, {"enc.b1", enc_b1}, {"enc.w2", enc_w2}, {"enc.b2", enc_b2}};
    for (auto& kv : geiim.named("geiim")) out.push_back(std::move(kv));
    for (auto& kv : wian.named("wian")) out.push_back(std::move(kv));
    out.emplace_back("cls.w", cls_w);
    out.emplace_back("cls.b", cls_b);
    for (auto& kv : scale_set.named("mccl")) out.push_back(std::move(kv));
    return out;
}

ModelOut forward_model(const Tensor& bags, const ModelParams& params, const ModelConfig& cfg) {
    if (bags.rank() != 3 || bags.dim(1) != cfg.T || bags.dim(2) != cfg.C_in)
        throw ShapeError("forward_model: expected [B x " + std::to_string(cfg.T) + " x " +
                         std::to_string(cfg.C_in) + "], got " + shape_str(bags.shape()));
    const int batch = bags.dim(0);

    // per-instance encoder over the flattened (B*T) rows
    Tensor flat = reshape(bags, {batch * cfg.T, cfg.C_in});
    Tensor h1 = relu(add_rowvec(matmul(flat, params.enc_w1), params.enc_b1));
    Tensor enc = add_rowvec(matmul(h1, params.enc_w2), params.enc_b2);
    Tensor x = reshape(enc, {batch, cfg.T, cfg.C});

    Tensor h;
    if (cfg.force_alpha_one) {
        h = x;  // interaction pinned to the identity
    } else {
        h = geiim_forward(x, params.geiim).h;
    }

    Tensor w = cfg.force_uniform_weights
                   ? Tensor::full({batch, cfg.T, cfg.C}, 1.0 / static_cast<double>(cfg.C))
                   : instance_weights(h);

    Tensor seq = wian_forward(h, w, params.wian, cfg.force_unit_gate);
    Tensor attended = mhsa(seq, params.wian);
    Tensor bag_embed = aggregate(attended);
    Tensor logits = add_rowvec(matmul(bag_embed, params.cls_w), params.cls_b);
    return {logits, bag_embed};
}

}  // namespace micacl
