#include "micacl/metrics.hpp"

#include <cmath>
#include <limits>

#include "micacl/errors.hpp"

namespace micacl {

MetricsReport metrics_from_confusion(const std::vector<std::vector<int>>& confusion) {
    MetricsReport r;
    r.confusion = confusion;
    const std::size_t k = confusion.size();
    r.per_class_recall.assign(k, std::numeric_limits<double>::quiet_NaN());
    long long correct = 0, total = 0;
    double recall_sum = 0.0;
    int present = 0;
    for (std::size_t c = 0; c < k; ++c) {
        long long row = 0;
        for (std::size_t j = 0; j < k; ++j) row += confusion[c][j];
        correct += confusion[c][c];
        total += row;
        if (row > 0) {
            r.per_class_recall[c] = static_cast<double>(confusion[c][c]) / static_cast<double>(row);
            recall_sum += r.per_class_recall[c];
            ++present;
        }
    }
    r.war = total > 0 ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
    r.uar = present > 0 ? recall_sum / present : 0.0;
    return r;
}

MetricsReport evaluate(const ModelParams& params, const ModelConfig& cfg, const Dataset& ds,
                       const std::vector<int>& indices) {
    if (indices.empty()) throw ConfigError("evaluate: empty index set");
    std::vector<std::vector<int>> confusion(static_cast<std::size_t>(cfg.K),
                                            std::vector<int>(static_cast<std::size_t>(cfg.K), 0));
    constexpr int kChunk = 64;
    const int per_bag = cfg.T * cfg.C_in;
    for (std::size_t start = 0; start < indices.size(); start += kChunk) {
        const std::size_t end = std::min(indices.size(), start + kChunk);
        const int b = static_cast<int>(end - start);
        std::vector<double> data(static_cast<std::size_t>(b * per_bag));
        for (int i = 0; i < b; ++i) {
            const Bag& bag = ds.bags[static_cast<std::size_t>(indices[start + static_cast<std::size_t>(i)])];
            std::copy(bag.instances.begin(), bag.instances.end(),
                      data.begin() + static_cast<std::size_t>(i * per_bag));
        }
        Tensor batch = Tensor::from({b, cfg.T, cfg.C_in}, std::move(data));
        const ModelOut out = forward_model(batch, params, cfg);
        const auto& logits = out.logits.values();
        for (int i = 0; i < b; ++i) {
            int best = 0;
            double best_v = logits[static_cast<std::size_t>(i * cfg.K)];
            for (int j = 1; j < cfg.K; ++j) {
                const double v = logits[static_cast<std::size_t>(i * cfg.K + j)];
                if (v > best_v) {  // ties keep the lowest class index
                    best_v = v;
                    best = j;
                }
            }
            const int truth = ds.bags[static_cast<std::size_t>(indices[start + static_cast<std::size_t>(i)])].label;
            ++confusion[static_cast<std::size_t>(truth)][static_cast<std::size_t>(best)];
        }
    }
    return metrics_from_confusion(confusion);
}

MetricsReport evaluate(const ModelParams& params, const ModelConfig& cfg, const Dataset& ds) {
    std::vector<int> all(static_cast<std::size_t>(ds.size()));
    for (int i = 0; i < ds.size(); ++i) all[static_cast<std::size_t>(i)] = i;
    return evaluate(params, cfg, ds, all);
}

}  // namespace micacl
