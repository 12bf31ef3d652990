#include "micacl/gradcheck_suite.hpp"

#include "micacl/errors.hpp"
#include "micacl/geiim.hpp"
#include "micacl/grad_check.hpp"
#include "micacl/mccl.hpp"
#include "micacl/model.hpp"
#include "micacl/wian.hpp"

namespace micacl {

namespace {

double check_geiim(double eps) {
    Rng rng(11);
    GeiimParams params = GeiimParams::init(4, 3, rng);
    Tensor x = Tensor::uniform({2, 4, 5}, -1.0, 1.0, rng);
    auto f = [&]() { return reduce_all(geiim_forward(x, params).h, Reduce::Sum); };
    return grad_check(f, {params.embed_src, params.embed_dst, params.alpha_raw}, eps);
}

double check_wian(double eps) {
    Rng rng(13);
    WianParams params = WianParams::init(6, 8, 2, rng);
    Tensor h = Tensor::uniform({2, 4, 6}, -1.0, 1.0, rng);
    auto f = [&]() {
        Tensor w = instance_weights(h);
        return reduce_all(aggregate(mhsa(wian_forward(h, w, params), params)), Reduce::Sum);
    };
    std::vector<Tensor> checked;
    for (auto& [name, p] : params.named(std::string("wian"))) checked.push_back(p);
    return grad_check(f, checked, eps);
}

double check_mccl(double eps) {
    Rng rng(17);
    const std::vector<int> labels{0, 1, 0, 2};
    ClassStats stats{{3, 2, 1}, 0.1};
    ScaleSet scale_set = ScaleSet::init({1, 4, 8}, 8, 4, rng);
    Tensor x_bag = Tensor::uniform({4, 8}, -1.0, 1.0, rng, true);
    Tensor logits = Tensor::uniform({4, 3}, -1.0, 1.0, rng, true);
    // the class weights are coefficients, not a gradient path: freeze them
    // outside the probe so finite differences match that contract
    Tensor frozen_yp = logits.detach();
    auto f = [&]() {
        Tensor l_mc = mccl_loss(x_bag, labels, stats, frozen_yp, scale_set);
        return total_loss(l_mc, cet_loss(logits, labels));
    };
    std::vector<Tensor> checked{x_bag, logits};
    for (auto& [name, p] : scale_set.named(std::string("mccl"))) checked.push_back(p);
    return grad_check(f, checked, eps);
}

double check_end_to_end(double eps) {
    ModelConfig cfg;
    cfg.C_in = 5;
    cfg.C = 6;
    cfg.d = 3;
    cfg.C_h = 8;
    cfg.E = 4;
    cfg.n_heads = 2;
    cfg.K = 3;
    cfg.T = 4;
    cfg.encoder_hidden = 6;
    cfg.scales = {1, 4, 8};
    Rng rng(19);
    ModelParams params = ModelParams::init(cfg, rng);
    Tensor bags = Tensor::uniform({2, cfg.T, cfg.C_in}, -1.0, 1.0, rng);
    const std::vector<int> labels{0, 0};
    ClassStats stats{{2, 2, 1}, cfg.tau0};
    Tensor frozen_yp = forward_model(bags, params, cfg).logits.detach();
    auto f = [&]() {
        const ModelOut out = forward_model(bags, params, cfg);
        Tensor l_mc = mccl_loss(out.bag_embed, labels, stats, frozen_yp, params.scale_set);
        return total_loss(l_mc, cet_loss(out.logits, labels));
    };
    std::vector<Tensor> checked;
    for (auto& [name, p] : params.named_parameters()) checked.push_back(p);
    return grad_check(f, checked, eps);
}

}  // namespace

std::vector<ModuleGradCheck> run_gradcheck(const std::string& module, double eps) {
    std::vector<ModuleGradCheck> out;
    const bool all = module == "all";
    if (all || module == "geiim") out.push_back({"geiim", check_geiim(eps)});
    if (all || module == "wian") out.push_back({"wian", check_wian(eps)});
    if (all || module == "mccl") out.push_back({"mccl", check_mccl(eps)});
    if (all) out.push_back({"model", check_end_to_end(eps)});
    if (out.empty())
        throw ConfigError("gradcheck: unknown module '" + module +
                          "', expected geiim | wian | mccl | all");
    return out;
}

}  // namespace micacl
