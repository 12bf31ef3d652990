#include "micacl/geiim.hpp"

#include <cmath>

#include "micacl/errors.hpp"

namespace micacl {

GeiimParams GeiimParams::init(int instances, int embed_dim, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(embed_dim));
    GeiimParams p;
    p.embed_src = Tensor::uniform({instances, embed_dim}, -bound, bound, rng, true);
    p.embed_dst = Tensor::uniform({embed_dim, instances}, -bound, bound, rng, true);
    p.alpha_raw = Tensor::scalar(0.0, true);
    return p;
}

std::vector<std::pair<std::string, Tensor>> GeiimParams::named(const std::string& prefix) const {
    return {{prefix + ".embed_src", embed_src},
            {prefix + ".embed_dst", embed_dst},
            {prefix + ".alpha_raw", alpha_raw}};
}

Tensor build_adjacency(const GeiimParams& params) {
    return softmax(relu(matmul(params.embed_src, params.embed_dst)), 1);
}

Tensor diffuse(const Tensor& x, const Tensor& a, const Tensor& alpha) {
    if (x.rank() != 3)
        throw ShapeError("diffuse: expected [B x T x C] input, got " + shape_str(x.shape()));
    const int t = x.dim(1);
    if (a.rank() != 2 || a.dim(0) != t || a.dim(1) != t)
        throw ShapeError("diffuse: adjacency " + shape_str(a.shape()) +
                         " does not match instance count " + std::to_string(t));
    const double av = alpha.item();
    if (!(av >= 0.0 && av <= 1.0))
        throw NumericError("diffuse: alpha must lie in [0, 1], got " + std::to_string(av));

    const int batch = x.dim(0);
    Tensor one_minus = add_scalar(mul_scalar(alpha, -1.0), 1.0);
    std::vector<Tensor> rows;
    rows.reserve(static_cast<std::size_t>(batch));
    for (int b = 0; b < batch; ++b) {
        Tensor xb = select(x, 0, b);  // [T x C]
        rows.push_back(add(scale(xb, alpha), scale(matmul(a, xb), one_minus)));
    }
    return stack(rows, 0);
}

GeiimOut geiim_forward(const Tensor& x, const GeiimParams& params) {
    Tensor a = build_adjacency(params);
    Tensor alpha = sigmoid(params.alpha_raw);
    return {diffuse(x, a, alpha), a};
}

}  // namespace micacl
