#pragma once

#include <string>
#include <utility>
#include <vector>

#include "micacl/config.hpp"
#include "micacl/geiim.hpp"
#include "micacl/mccl.hpp"
#include "micacl/tensor.hpp"
#include "micacl/wian.hpp"

namespace micacl {

// Full model: per-instance encoder -> graph interaction -> weighted recurrent
// aggregation -> self-attention -> temporal pooling -> linear classifier,
// plus the multiscale projection bank used by the contrastive loss.
struct ModelParams {
    Tensor enc_w1, enc_b1, enc_w2, enc_b2;  // 2-layer per-instance encoder
    GeiimParams geiim;
    WianParams wian;
    ScaleSet scale_set;
    Tensor cls_w, cls_b;  // [C_h x K], [K]

    static ModelParams init(const ModelConfig& cfg, Rng& rng);

    // Fixed enumeration order; drives the optimizer state layout and the
    // checkpoint array order.
    std::vector<std::pair<std::string, Tensor>> named_parameters() const;
};

struct ModelOut {
    Tensor logits;     // [B x K]
    Tensor bag_embed;  // [B x C_h]
};

// bags: [B x T x C_in]. Honors the force_* reduction hooks in cfg.
ModelOut forward_model(const Tensor& bags, const ModelParams& params, const ModelConfig& cfg);

}  // namespace micacl
